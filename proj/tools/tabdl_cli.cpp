// tabdl: preprocess | train | evaluate | experiment
//
// Exit codes: 0 ok, 1 usage or config, 2 data, 3 numeric failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "tabdl/errors.hpp"
#include "tabdl/pipeline.hpp"
#include "tabdl/weights.hpp"

namespace fs = std::filesystem;
using namespace tabdl;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> repeats;
  std::string out;
  std::string weights;
};

PipelineConfig load(const Options& o) {
  auto cfg = load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output_dir = o.out;
  fs::create_directories(cfg.output_dir);
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw data_error("cannot write " + path.string());
  f << text;
  if (!f) throw data_error("failed writing " + path.string());
}

void append_metrics(const fs::path& out_dir, const nlohmann::json& record) {
  const std::string line = record.dump();
  std::ofstream f(out_dir / "metrics.jsonl", std::ios::app);
  if (!f) throw data_error("cannot write " + (out_dir / "metrics.jsonl").string());
  f << line << '\n';
  std::cout << line << '\n';
}

int cmd_preprocess(const Options& o) {
  const auto cfg = load(o);
  const auto prepared = prepare_data(cfg);
  const auto path = cfg.output_dir / "preprocess.json";
  write_text(path, preprocess_summary(cfg, prepared).dump(2) + "\n");
  std::cerr << "train=" << prepared.train.rows() << " test=" << prepared.test.rows() << " -> " << path.string()
            << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  const auto cfg = load(o);
  const auto prepared = prepare_data(cfg);
  const auto run = run_configuration(cfg, prepared, cfg.configuration, cfg.seed);
  const auto path = weights_path(cfg.output_dir, cfg.configuration, cfg.seed);
  save_weights(path, run.models.named_parameters());
  append_metrics(cfg.output_dir, metrics_record("train", run));
  std::cerr << "weights -> " << path.string() << '\n';
  return 0;
}

int cmd_evaluate(const Options& o) {
  const auto start = std::chrono::steady_clock::now();
  const auto cfg = load(o);
  const auto prepared = prepare_data(cfg);
  const fs::path path = o.weights.empty() ? weights_path(cfg.output_dir, cfg.configuration, cfg.seed) : fs::path(o.weights);
  const auto metrics = evaluate_weights(cfg, prepared, cfg.configuration, cfg.seed, path);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  append_metrics(cfg.output_dir, metrics_record("evaluate", metrics, seconds));
  return 0;
}

int cmd_experiment(const Options& o) {
  auto cfg = load(o);
  if (o.repeats) cfg.runs.fill(*o.repeats);
  for (auto n : cfg.runs)
    if (n < 2) throw config_error("experiment needs at least 2 runs per configuration");
  const auto prepared = prepare_data(cfg);
  const auto report = run_experiment(
      cfg, prepared, cfg.runs, [&](const RunResult& r) { append_metrics(cfg.output_dir, metrics_record("experiment", r)); },
      [](const std::string& msg) { std::cerr << "warning: run failed and is excluded: " << msg << '\n'; });
  write_text(cfg.output_dir / "experiment.json", report_json(report).dump(2) + "\n");
  const auto table = report_table(report);
  write_text(cfg.output_dir / "experiment.txt", table);
  std::cout << table;
  return 0;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const config_error*>(&e) || dynamic_cast<const argument_error*>(&e)) return 1;
  if (dynamic_cast<const numeric_error*>(&e)) return 3;
  return 2;
}

} // namespace

int main(int argc, char** argv) {
  configure_runtime();
  CLI::App app{"Imbalanced tabular classification with VAE oversampling and sparse autoencoders"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "INI configuration file")->required();
    sub->add_option("--seed", o.seed, "Model seed (base seed for experiments)");
    sub->add_option("--out", o.out, "Output directory (overrides the config)");
  };
  auto* pre = app.add_subcommand("preprocess", "Split, impute and normalize; write preprocess.json");
  auto* train = app.add_subcommand("train", "Train the configured pipeline, save weights, append metrics");
  auto* eval = app.add_subcommand("evaluate", "Score saved weights on the test split");
  auto* exp = app.add_subcommand("experiment", "Run all configurations and compare them");
  for (auto* sub : {pre, train, eval, exp}) add_common(sub);
  eval->add_option("--weights", o.weights, "Weight file (default: <out>/<configuration>_seed<N>.adpm)");
  exp->add_option("--repeats", o.repeats, "Runs per configuration (default: from the config)")
      ->check(CLI::Range(std::size_t{2}, std::size_t{1000000}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*pre) return cmd_preprocess(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_evaluate(o);
    return cmd_experiment(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}
