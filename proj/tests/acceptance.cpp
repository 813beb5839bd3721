// Release acceptance: one PASS / WARN / FAIL line per criterion.
// Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gradient_suite.hpp"
#include "oracles.hpp"
#include "tabdl/pipeline.hpp"
#include "tabdl/weights.hpp"

using namespace tabdl;
namespace fs = std::filesystem;

namespace {

enum class Verdict { pass, warn, fail };

struct Line {
  Verdict verdict;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Line& line) {
  const char* tag = line.verdict == Verdict::pass ? "PASS" : line.verdict == Verdict::warn ? "WARN" : "FAIL";
  if (line.verdict == Verdict::fail) ++failures;
  std::printf("[%s] %2d %s: %s\n", tag, id, name.c_str(), line.detail.c_str());
  std::fflush(stdout);
}

// Runs one criterion; an exception counts as a failure.
void criterion(int id, const std::string& name, const std::function<Line()>& body) {
  try {
    report(id, name, body());
  } catch (const std::exception& e) {
    report(id, name, {Verdict::fail, std::string("threw: ") + e.what()});
  }
}

Line verdict(bool ok, const std::string& detail) { return {ok ? Verdict::pass : Verdict::fail, detail}; }

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join(const std::vector<double>& v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? " " : "") << v[i];
  return s.str();
}

PipelineConfig default_config() { return load_config(fs::path(TABDL_DATA_DIR).parent_path() / "configs" / "default.ini"); }

constexpr int kSeeds = 5;

// Results shared between criteria that need the same full-size runs.
struct SharedRuns {
  std::vector<RunResult> joint;
  double joint_seconds = 0.0;
};

} // namespace

int main() {
  configure_runtime();
  std::printf("acceptance suite\n");
  const PipelineConfig cfg = default_config();
  const PreparedData prepared = prepare_data(cfg);
  SharedRuns shared;

  criterion(1, "gradient suite", [] {
    const auto start = std::chrono::steady_clock::now();
    const auto ledger = testing::run_all(20);
    const double secs = seconds_since(start);
    bool ok = ledger.mismatches().empty() && secs < 60.0;
    std::string worst_name;
    double worst = 0.0;
    int fewest = 1 << 30;
    for (const auto& [name, s] : ledger.summary()) {
      ok = ok && s.instances >= 20 && s.worst < 1e-4;
      fewest = std::min(fewest, s.instances);
      if (s.worst >= worst) worst = s.worst, worst_name = name;
    }
    char buf[200];
    std::snprintf(buf, sizeof buf, "%zu primitives, >= %d instances each, worst rel err %.2e (%s), %.1f s",
                  ledger.summary().size(), fewest, worst, worst_name.c_str(), secs);
    return verdict(ok, buf);
  });

  criterion(2, "kl oracle", [] {
    double worst = 0.0;
    for (double mu : {-2.0, -1.0, 0.0, 1.0, 2.0})
      for (double sigma : {0.3, 1.0, 3.0}) {
        const double closed = ops::kl_standard_normal(nullptr, Tensor({1}, mu), Tensor({1}, sigma)).item();
        const double lo = std::min(-12.0, mu - 12.0 * sigma), hi = std::max(12.0, mu + 12.0 * sigma);
        worst = std::max(worst, std::abs(closed - testing::kl_by_quadrature(mu, sigma, lo, hi)));
      }
    char buf[120];
    std::snprintf(buf, sizeof buf, "15 (mu, sigma) points, max |closed - quadrature| = %.2e", worst);
    return verdict(worst < 1e-6, buf);
  });

  criterion(3, "data counts and split", [&] {
    const bool ok = prepared.total_rows == 768 && prepared.total_label0 == 500 && prepared.total_label1 == 268 &&
                    prepared.train.rows() == 691 && prepared.test.rows() == 77 &&
                    prepared.train.count_label(0) == 449 && prepared.train.count_label(1) == 242;
    std::ostringstream s;
    s << prepared.total_rows << " rows (" << prepared.total_label0 << "/" << prepared.total_label1 << "), split "
      << prepared.train.rows() << "/" << prepared.test.rows() << ", train classes " << prepared.train.count_label(0)
      << "/" << prepared.train.count_label(1);
    return verdict(ok, s.str());
  });

  criterion(4, "vae balancing", [&] {
    const auto& train = prepared.train;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < train.rows(); ++i)
      if (train.y[i] == 1) idx.push_back(i);
    VaeConfig vc = cfg.vae;
    vc.seed = component_seed(cfg.seed, 1);
    const auto vae = train_vae(data::subset(train, idx), vc).model;
    Rng rng(component_seed(cfg.seed, 2));
    const auto b = balance_dataset(train, vae, rng, cfg.balance);
    bool ok = b.count_label(0) == 449 && b.count_label(1) == 484 && b.rows() == train.rows() + 242;
    ok = ok && std::equal(train.X.values().begin(), train.X.values().end(), b.X.values().begin()) &&
         std::equal(train.y.begin(), train.y.end(), b.y.begin());
    for (std::size_t i = 0; i < b.rows(); ++i) ok = ok && b.synthetic[i] == (i >= train.rows());
    std::ostringstream s;
    s << "449/242 -> " << b.count_label(0) << "/" << b.count_label(1)
      << ", real rows bit-identical, synthetic rows flagged";
    return verdict(ok, s.str());
  });

  criterion(5, "cnn shape chain", [&] {
    const auto chain = cnn_shape_chain(build_cnn(cfg.cnn));
    const bool ok = chain.size() == 4 && chain[0] == Shape{20, 20, 1} && chain[1] == Shape{19, 15, 100} &&
                    chain[2] == Shape{9, 2, 100} && chain[3] == Shape{1800};
    std::string s;
    for (const auto& sh : chain) s += (s.empty() ? "" : " -> ") + shape_to_string(sh);
    return verdict(ok, s);
  });

  criterion(6, "end-to-end accuracy (sae_with_cnn, 5 seeds)", [&] {
    const auto start = std::chrono::steady_clock::now();
    std::vector<double> acc;
    int beats = 0;
    for (int i = 0; i < kSeeds; ++i) {
      shared.joint.push_back(run_configuration(cfg, prepared, Configuration::sae_with_cnn, run_seed(cfg.seed, i)));
      const auto& m = shared.joint.back().metrics;
      acc.push_back(m.accuracy);
      beats += (m.tp + m.tn) > 51;
      shared.joint.back().models = {};  // keep memory flat; weights are re-derived in criterion 9
    }
    shared.joint_seconds = seconds_since(start);
    const double med = median(acc);
    const bool ok = med >= 0.70 && shared.joint_seconds < 15 * 60 && beats >= 4;
    char buf[300];
    std::snprintf(buf, sizeof buf, "accuracies [%s], median %.4f (>= 0.70), %d/5 above 51/77 (>= 4), %.0f s (< 900)",
                  join(acc).c_str(), med, beats, shared.joint_seconds);
    return verdict(ok, buf);
  });

  criterion(7, "joint vs separate training (paired seeds)", [&] {
    if (shared.joint.size() != kSeeds) return Line{Verdict::fail, "joint runs unavailable"};
    std::vector<double> joint, separate;
    for (int i = 0; i < kSeeds; ++i) {
      joint.push_back(shared.joint[i].metrics.accuracy);
      separate.push_back(
          run_configuration(cfg, prepared, Configuration::sae_cnn, run_seed(cfg.seed, i)).metrics.accuracy);
    }
    const double mj = median(joint), ms = median(separate);
    char buf[300];
    std::snprintf(buf, sizeof buf, "sae_with_cnn median %.4f vs sae_cnn median %.4f (sae_cnn [%s])", mj, ms,
                  join(separate).c_str());
    if (mj >= ms) return Line{Verdict::pass, buf};
    return Line{ms - mj < 0.01 ? Verdict::warn : Verdict::fail, buf};
  });

  criterion(8, "anova and tukey oracles", [] {
    Rng rng(2024);
    double worst_f = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t k = 2 + rng.below(5);
      std::vector<std::vector<double>> values(k);
      std::vector<stats::RunGroup> groups;
      std::size_t n = 0;
      for (std::size_t g = 0; g < k; ++g) {
        const std::size_t size = 2 + rng.below(12);
        const double shift = rng.uniform(-2.0, 2.0);
        for (std::size_t i = 0; i < size; ++i) values[g].push_back(shift + rng.normal());
        n += size;
        groups.push_back({"g" + std::to_string(g), values[g]});
      }
      const auto [ssb, ssw] = testing::sums_of_squares(values);
      const double F = (ssb / static_cast<double>(k - 1)) / (ssw / static_cast<double>(n - k));
      worst_f = std::max(worst_f, std::abs(stats::one_way_anova(groups).F - F) / std::max(1.0, F));
    }

    double worst_p = 0.0;
    for (auto [f, d1, d2] : {std::tuple{0.5, 1.0, 5.0}, {1.0, 4.0, 51.0}, {2.5, 3.0, 20.0}, {4.0, 2.0, 9.0},
                             {10.0, 4.0, 51.0}, {0.2, 6.0, 6.0}})
      worst_p = std::max(worst_p, std::abs(stats::f_survival(f, d1, d2) - testing::f_survival_by_quadrature(f, d1, d2)));

    const std::vector<double> base{0.78, 0.80, 0.81, 0.79, 0.83};
    bool identical_clean = true;
    for (const auto& p : stats::tukey_hsd({{"a", base}, {"b", base}, {"c", base}})) identical_clean &= !p.significant;

    const std::vector<stats::RunGroup> summary_groups{{"sae_with_cnn", testing::values_with_moments(12, 92.31, 1.04)},
                                                 {"sae_cnn", testing::values_with_moments(11, 85.71, 0.66)},
                                                 {"sae_with_mlp", testing::values_with_moments(11, 80.52, 0.65)},
                                                 {"sae_mlp", testing::values_with_moments(11, 80.52, 0.65)},
                                                 {"mlp", testing::values_with_moments(11, 79.22, 0.77)}};
    const auto a = stats::one_way_anova(summary_groups);
    bool top_apart = true;
    for (const auto& p : stats::tukey_hsd(summary_groups))
      if (p.i == 0) top_apart &= p.significant;

    const bool ok = worst_f <= 1e-10 && worst_p < 1e-6 && identical_clean && top_apart && a.df_between == 4 &&
                    a.df_within == 51;
    char buf[300];
    std::snprintf(buf, sizeof buf,
                  "F rel err %.1e over 50 sets, p err %.1e, identical groups %s, top group apart %s, df (%zu, %zu)",
                  worst_f, worst_p, identical_clean ? "clean" : "flagged", top_apart ? "yes" : "no", a.df_between,
                  a.df_within);
    return verdict(ok, buf);
  });

  criterion(9, "determinism", [&] {
    const auto seed = run_seed(cfg.seed, 0);
    const auto a = run_configuration(cfg, prepared, Configuration::sae_with_cnn, seed);
    const auto b = run_configuration(cfg, prepared, Configuration::sae_with_cnn, seed);
    const bool same_acc = a.metrics.accuracy == b.metrics.accuracy &&
                          (shared.joint.empty() || shared.joint[0].metrics.accuracy == a.metrics.accuracy);
    const bool same_bytes = encode_weights(a.models.named_parameters()) == encode_weights(b.models.named_parameters());
    char buf[200];
    std::snprintf(buf, sizeof buf, "two sae_with_cnn trainings at seed %llu: accuracy %.4f / %.4f, weights %s",
                  static_cast<unsigned long long>(seed), a.metrics.accuracy, b.metrics.accuracy,
                  same_bytes ? "byte-identical" : "differ");
    return verdict(same_acc && same_bytes, buf);
  });

  criterion(10, "sparsity pressure", [&] {
    std::vector<double> l1;
    for (double lambda : {0.0, 1e-3, 1e-1}) {
      SaeConfig sc = cfg.sae;
      sc.lambda = lambda;
      sc.seed = component_seed(cfg.seed, 3);
      l1.push_back(mean_latent_l1(train_sae(prepared.train.X, sc).model, prepared.train.X));
    }
    const bool ok = l1[1] <= 1.05 * l1[0] && l1[2] <= 1.05 * l1[1];
    return verdict(ok, "lambda {0, 1e-3, 1e-1} -> mean latent L1 [" + join(l1) + "]");
  });

  std::printf("%s\n", failures ? "acceptance: FAILED" : "acceptance: all criteria met");
  return failures ? 1 : 0;
}
