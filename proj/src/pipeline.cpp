#include "tabdl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

#include "tabdl/errors.hpp"
#include "tabdl/weights.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace tabdl {

void configure_runtime() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);  // glibc caps it here on 64-bit
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

using nlohmann::json;

PreparedData prepare_data(const PipelineConfig& cfg) {
  const auto records = data::binarize_pregnancies(data::load_pima_csv(cfg.input));
  const data::Dataset all = data::make_dataset(records);
  PreparedData p;
  p.total_rows = all.rows();
  p.total_label0 = all.count_label(0);
  p.total_label1 = all.count_label(1);
  p.split = data::split_train_test(all.y, cfg.train_ratio, cfg.split_seed);

  auto imputed = data::impute_missing(data::subset(all, p.split.train), data::subset(all, p.split.test));
  p.means = imputed.means;
  p.normalizer = data::fit_normalizer(imputed.train.X, cfg.normalizer);
  p.train = std::move(imputed.train);
  p.test = std::move(imputed.test);
  p.train.X = data::apply_normalizer(p.normalizer, p.train.X);
  p.test.X = data::apply_normalizer(p.normalizer, p.test.X);
  return p;
}

json preprocess_summary(const PipelineConfig& cfg, const PreparedData& p) {
  json imputation = json::object();
  for (std::size_t c = 0; c < data::kFeatureCount; ++c)
    if (p.means.applied[c]) imputation[std::string(data::kFeatureNames[c])] = p.means.mean[c];
  json features = json::array();
  for (auto name : data::kFeatureNames) features.push_back(std::string(name));

  return {
      {"input", cfg.input.string()},
      {"rows", p.total_rows},
      {"class_counts", {{"0", p.total_label0}, {"1", p.total_label1}}},
      {"split",
       {{"seed", p.split.seed},
        {"ratio", cfg.train_ratio},
        {"train_rows", p.split.train.size()},
        {"test_rows", p.split.test.size()},
        {"train_class_counts", {{"0", p.train.count_label(0)}, {"1", p.train.count_label(1)}}},
        {"test_class_counts", {{"0", p.test.count_label(0)}, {"1", p.test.count_label(1)}}},
        {"train", p.split.train},
        {"test", p.split.test}}},
      {"imputation_means", imputation},
      {"normalizer",
       {{"kind", data::to_string(p.normalizer.kind)},
        {"features", features},
        {"lo", p.normalizer.lo},
        {"hi", p.normalizer.hi},
        {"fitted_on", p.normalizer.fitted_on}}},
  };
}

std::uint64_t component_seed(std::uint64_t run_seed, std::uint64_t component) {
  return mix_seed(run_seed * 16 + component);
}

std::uint64_t run_seed(std::uint64_t base, std::size_t run_index) { return base + 10007ull * run_index; }

namespace {

enum Component : std::uint64_t { kVae = 1, kBalance = 2, kSae = 3, kClassifier = 4, kJoint = 5 };

bool uses_sae(Configuration c) { return c == Configuration::sae_mlp || c == Configuration::sae_cnn; }
bool is_joint(Configuration c) { return c == Configuration::sae_with_mlp || c == Configuration::sae_with_cnn; }

VaeConfig vae_config(const PipelineConfig& cfg, std::uint64_t seed) {
  VaeConfig v = cfg.vae;
  v.seed = component_seed(seed, kVae);
  return v;
}

SaeConfig sae_config(const PipelineConfig& cfg, std::uint64_t seed) {
  SaeConfig s = cfg.sae;
  s.seed = component_seed(seed, kSae);
  return s;
}

ClassifierConfig classifier_config(const PipelineConfig& cfg, Configuration c, std::uint64_t seed) {
  ClassifierConfig k = c == Configuration::sae_cnn ? cfg.cnn : cfg.mlp;
  k.seed = component_seed(seed, kClassifier);
  return k;
}

JointConfig joint_config(const PipelineConfig& cfg, Configuration c, std::uint64_t seed) {
  JointConfig j;
  const bool cnn = c == Configuration::sae_with_cnn;
  j.head = cnn ? ClassifierKind::cnn : ClassifierKind::mlp;
  j.head_config = cnn ? cfg.cnn : cfg.mlp;
  j.hidden = cfg.sae.hidden;
  j.latent = cfg.sae.latent;
  j.alpha = cfg.joint.alpha;
  j.beta = cfg.joint.beta;
  j.lambda = cfg.joint.lambda;
  j.epochs = cnn ? cfg.joint.cnn_epochs : cfg.joint.mlp_epochs;
  j.batch = cfg.joint.batch;
  j.lr = cfg.joint.lr;
  j.seed = component_seed(seed, kJoint);
  return j;
}

Tensor classifier_input(Configuration c, const Tensor& features) {
  return c == Configuration::sae_cnn ? reshape_to_grid(features) : features;
}

data::Dataset minority_rows(const data::Dataset& train) {
  const int label = train.count_label(1) <= train.count_label(0) ? 1 : 0;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < train.rows(); ++i)
    if (train.y[i] == label) rows.push_back(i);
  return data::subset(train, rows);
}

} // namespace

std::vector<NamedTensor> PipelineModels::named_parameters() const {
  auto out = vae.named_parameters();
  auto append = [&out](const std::vector<NamedTensor>& more) { out.insert(out.end(), more.begin(), more.end()); };
  if (sae) append(sae->named_parameters());
  if (classifier) append(classifier->net.named_parameters());
  if (joint) append(joint->named_parameters());
  return out;
}

Prediction PipelineModels::predict(const Tensor& X, double threshold) const {
  if (joint) return predict_joint(*joint, X, threshold);
  if (!classifier) throw std::logic_error("pipeline: no classifier to predict with");
  if (sae) return tabdl::predict(*classifier, classifier_input(configuration, encode_features(*sae, X)), threshold);
  return tabdl::predict(*classifier, X, threshold);
}

PipelineModels build_models(const PipelineConfig& cfg, Configuration c, std::uint64_t seed) {
  PipelineModels m;
  m.configuration = c;
  m.vae = build_vae(vae_config(cfg, seed));
  if (is_joint(c)) {
    m.joint = build_joint(joint_config(cfg, c, seed));
  } else if (uses_sae(c)) {
    const auto sc = sae_config(cfg, seed);
    m.sae = build_sae(sc);
    const auto kc = classifier_config(cfg, c, seed);
    m.classifier = c == Configuration::sae_cnn ? build_cnn(kc) : build_mlp(kc, sc.latent);
  } else {
    m.classifier = build_mlp(classifier_config(cfg, c, seed), data::kFeatureCount);
  }
  return m;
}

RunResult run_configuration(const PipelineConfig& cfg, const PreparedData& prepared, Configuration c,
                            std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  RunResult r;
  r.configuration = c;
  r.seed = seed;
  r.models.configuration = c;

  auto vae = train_vae(minority_rows(prepared.train), vae_config(cfg, seed));
  r.models.vae = vae.model;
  r.vae_history = std::move(vae.history);
  Rng balance_rng(component_seed(seed, kBalance));
  const data::Dataset balanced = balance_dataset(prepared.train, r.models.vae, balance_rng, cfg.balance);
  r.train_rows = balanced.rows();
  r.synthetic_rows = static_cast<std::size_t>(std::count(balanced.synthetic.begin(), balanced.synthetic.end(), true));

  double threshold = cfg.mlp.threshold;
  if (is_joint(c)) {
    const auto jc = joint_config(cfg, c, seed);
    threshold = jc.head_config.threshold;
    auto trained = train_joint(build_joint(jc), balanced.X, balanced.y, jc);
    r.models.joint = std::move(trained.model);
    r.history = std::move(trained.history);
  } else {
    const auto kc = classifier_config(cfg, c, seed);
    threshold = kc.threshold;
    Tensor features = balanced.X;
    if (uses_sae(c)) {
      auto sae = train_sae(balanced.X, sae_config(cfg, seed));
      r.models.sae = sae.model;
      r.sae_history = std::move(sae.history);
      features = encode_features(*r.models.sae, balanced.X);
    }
    Classifier model = c == Configuration::sae_cnn ? build_cnn(kc) : build_mlp(kc, features.dim(1));
    auto trained = train_classifier(std::move(model), classifier_input(c, features), balanced.y, kc);
    r.models.classifier = std::move(trained.model);
    r.history = std::move(trained.history);
  }

  quantize_to_float(r.models.named_parameters());
  const auto pred = r.models.predict(prepared.test.X, threshold);
  r.metrics = stats::accuracy_and_confusion(pred.label, prepared.test.y);
  r.metrics.config = to_string(c);
  r.metrics.seed = seed;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

stats::RunMetrics evaluate_weights(const PipelineConfig& cfg, const PreparedData& prepared, Configuration c,
                                   std::uint64_t seed, const std::filesystem::path& weights) {
  auto models = build_models(cfg, c, seed);
  load_weights(weights, models.named_parameters());
  const double threshold = c == Configuration::sae_cnn || c == Configuration::sae_with_cnn ? cfg.cnn.threshold
                                                                                           : cfg.mlp.threshold;
  const auto pred = models.predict(prepared.test.X, threshold);
  auto m = stats::accuracy_and_confusion(pred.label, prepared.test.y);
  m.config = to_string(c);
  m.seed = seed;
  return m;
}

std::filesystem::path weights_path(const std::filesystem::path& out_dir, Configuration c, std::uint64_t seed) {
  return out_dir / (to_string(c) + "_seed" + std::to_string(seed) + ".adpm");
}

namespace {

json loss_summary(const LossHistory& h) {
  if (h.empty()) return nullptr;
  double lowest = h.front().total;
  for (const auto& e : h) lowest = std::min(lowest, e.total);
  const auto& last = h.back();
  return {{"epochs", h.size()},
          {"first", h.front().total},
          {"final", last.total},
          {"min", lowest},
          {"final_components",
           {{"reconstruction", last.reconstruction},
            {"kl", last.kl},
            {"sparsity", last.sparsity},
            {"classification", last.classification}}}};
}

json metrics_fields(const stats::RunMetrics& m) {
  return {{"config", m.config}, {"seed", m.seed},   {"accuracy", m.accuracy}, {"tp", m.tp},
          {"tn", m.tn},         {"fp", m.fp},       {"fn", m.fn},             {"test_rows", m.total()}};
}

} // namespace

json metrics_record(const std::string& command, const RunResult& run) {
  json j = metrics_fields(run.metrics);
  j["command"] = command;
  j["train_rows"] = run.train_rows;
  j["synthetic_rows"] = run.synthetic_rows;
  j["loss"] = loss_summary(run.history);
  j["vae_loss"] = loss_summary(run.vae_history);
  j["sae_loss"] = loss_summary(run.sae_history);
  j["wall_seconds"] = run.seconds;
  return j;
}

json metrics_record(const std::string& command, const stats::RunMetrics& metrics, double seconds) {
  json j = metrics_fields(metrics);
  j["command"] = command;
  j["wall_seconds"] = seconds;
  return j;
}

void summarize(ExperimentReport& report) {
  report.anova.reset();
  report.tukey.clear();
  report.anova_error.clear();
  for (const auto& g : report.groups)
    if (g.values.size() < 2) {
      report.anova_error = "group '" + g.label + "' has fewer than two successful runs";
      return;
    }
  try {
    report.anova = stats::one_way_anova(report.groups);
    report.tukey = stats::tukey_hsd(report.groups);
  } catch (const std::exception& e) {
    if (!report.anova) report.anova_error = e.what();
    else report.anova_error = std::string("tukey: ") + e.what();
  }
}

ExperimentReport run_experiment(const PipelineConfig& cfg, const PreparedData& prepared,
                                const std::array<std::size_t, 5>& runs,
                                const std::function<void(const RunResult&)>& on_run,
                                const std::function<void(const std::string&)>& on_failure) {
  ExperimentReport report;
  for (std::size_t k = 0; k < kAllConfigurations.size(); ++k) {
    if (runs[k] == 0) continue;
    const auto c = kAllConfigurations[k];
    stats::RunGroup group{to_string(c), {}};
    // Run index counts within a configuration, so seeds pair across configurations.
    for (std::size_t i = 0; i < runs[k]; ++i) {
      const auto seed = run_seed(cfg.seed, i);
      try {
        auto r = run_configuration(cfg, prepared, c, seed);
        group.values.push_back(r.metrics.accuracy);
        if (on_run) on_run(r);
        r.models = {};
        report.runs.push_back(std::move(r));
      } catch (const std::exception& e) {
        const std::string msg = to_string(c) + " seed " + std::to_string(seed) + ": " + e.what();
        report.failures.push_back(msg);
        if (on_failure) on_failure(msg);
      }
    }
    report.groups.push_back(std::move(group));
  }
  summarize(report);
  return report;
}

json report_json(const ExperimentReport& report) {
  json groups = json::array();
  for (const auto& g : report.groups) {
    json seeds = json::array();
    for (const auto& r : report.runs)
      if (r.metrics.config == g.label) seeds.push_back(r.seed);
    groups.push_back({{"label", g.label},
                      {"n", g.values.size()},
                      {"mean", g.values.empty() ? 0.0 : stats::mean(g.values)},
                      {"sd", stats::sample_sd(g.values)},
                      {"accuracies", g.values},
                      {"seeds", seeds}});
  }
  json j = {{"groups", groups}, {"failures", report.failures}};
  if (report.anova) {
    const auto& a = *report.anova;
    j["anova"] = {{"F", a.f_infinite ? json("inf") : json(a.F)},
                  {"f_infinite", a.f_infinite},
                  {"df_between", a.df_between},
                  {"df_within", a.df_within},
                  {"p", a.p},
                  {"ss_between", a.ss_between},
                  {"ss_within", a.ss_within}};
  } else {
    j["anova"] = nullptr;
    j["anova_error"] = report.anova_error;
  }
  json pairs = json::array();
  for (const auto& t : report.tukey)
    pairs.push_back({{"a", t.a},
                     {"b", t.b},
                     {"mean_difference", t.mean_difference},
                     {"critical", t.critical},
                     {"significant", t.significant}});
  j["tukey"] = pairs;
  return j;
}

std::string report_table(const ExperimentReport& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %4s %10s %8s\n", "configuration", "n", "mean (%)", "sd");
  out << line;
  for (const auto& g : report.groups) {
    std::snprintf(line, sizeof line, "%-14s %4zu %10.2f %8.2f\n", g.label.c_str(), g.values.size(),
                  g.values.empty() ? 0.0 : 100.0 * stats::mean(g.values), 100.0 * stats::sample_sd(g.values));
    out << line;
  }
  out << '\n';
  if (report.anova) {
    const auto& a = *report.anova;
    if (a.f_infinite)
      std::snprintf(line, sizeof line, "ANOVA: F(%zu, %zu) = inf, p = 0\n", a.df_between, a.df_within);
    else
      std::snprintf(line, sizeof line, "ANOVA: F(%zu, %zu) = %.3f, p = %.3g\n", a.df_between, a.df_within, a.F, a.p);
    out << line << "\nTukey HSD (alpha 0.05)\n";
    std::snprintf(line, sizeof line, "%-14s %-14s %10s %10s %s\n", "a", "b", "diff (%)", "crit (%)", "significant");
    out << line;
    for (const auto& t : report.tukey) {
      std::snprintf(line, sizeof line, "%-14s %-14s %10.2f %10.2f %s\n", t.a.c_str(), t.b.c_str(),
                    100.0 * t.mean_difference, 100.0 * t.critical, t.significant ? "yes" : "no");
      out << line;
    }
  } else {
    out << "ANOVA not computed: " << report.anova_error << '\n';
  }
  if (!report.failures.empty()) {
    out << "\nFailed runs (excluded):\n";
    for (const auto& f : report.failures) out << "  " << f << '\n';
  }
  return out.str();
}

} // namespace tabdl
