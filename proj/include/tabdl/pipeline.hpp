#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tabdl/config.hpp"
#include "tabdl/stats.hpp"

namespace tabdl {

/// Process-wide allocator settings for long training runs.  Every batch
/// allocates and frees the same large tensor buffers; this keeps them in
/// the heap instead of mapping fresh, zero-filled pages each time.  Call
/// once at startup; a no-op outside glibc.
void configure_runtime();

/// Imputed, normalized train/test splits of the input CSV.
struct PreparedData {
  data::Dataset train;
  data::Dataset test;
  data::SplitIndices split;
  data::ImputationMeans means;
  data::NormalizerParams normalizer;
  std::size_t total_rows = 0;
  std::size_t total_label0 = 0;
  std::size_t total_label1 = 0;
};

/// load -> binarize pregnancies -> split (split_seed) -> impute -> normalize.
PreparedData prepare_data(const PipelineConfig& cfg);

/// Everything preprocessing decided, for the JSON sidecar.
nlohmann::json preprocess_summary(const PipelineConfig& cfg, const PreparedData& prepared);

/// Seed of one model component, derived from the run seed.
std::uint64_t component_seed(std::uint64_t run_seed, std::uint64_t component);

/// Per-run seed in an experiment: base + run_index * 10007.
std::uint64_t run_seed(std::uint64_t base, std::size_t run_index);

/// Models of one configuration; only the ones it uses are set.
struct PipelineModels {
  Configuration configuration = Configuration::sae_with_cnn;
  VaeModel vae;
  std::optional<SaeModel> sae;
  std::optional<Classifier> classifier;
  std::optional<JointModel> joint;

  std::vector<NamedTensor> named_parameters() const;
  /// Class predictions for normalized 8-feature rows.
  Prediction predict(const Tensor& X, double threshold) const;
};

/// Freshly initialized models with the architecture `cfg` describes.
PipelineModels build_models(const PipelineConfig& cfg, Configuration configuration, std::uint64_t seed);

struct RunResult {
  Configuration configuration = Configuration::sae_with_cnn;
  std::uint64_t seed = 0;
  stats::RunMetrics metrics;
  LossHistory vae_history;
  LossHistory sae_history;
  LossHistory history;  // classifier or joint model
  std::size_t train_rows = 0;  // after balancing
  std::size_t synthetic_rows = 0;
  double seconds = 0.0;
  PipelineModels models;
};

/// Trains one configuration end to end and scores it on the test split.
/// Weights are rounded to 32-bit floats before scoring, so the reported
/// metrics are exactly what a reloaded weight file reproduces.
RunResult run_configuration(const PipelineConfig& cfg, const PreparedData& prepared, Configuration configuration,
                            std::uint64_t seed);

/// Loads a weight file into freshly built models and scores the test split.
stats::RunMetrics evaluate_weights(const PipelineConfig& cfg, const PreparedData& prepared,
                                   Configuration configuration, std::uint64_t seed,
                                   const std::filesystem::path& weights);

std::filesystem::path weights_path(const std::filesystem::path& out_dir, Configuration configuration,
                                   std::uint64_t seed);

/// One JSON Lines record.
nlohmann::json metrics_record(const std::string& command, const RunResult& run);
nlohmann::json metrics_record(const std::string& command, const stats::RunMetrics& metrics, double seconds);

struct ExperimentReport {
  std::vector<RunResult> runs;
  std::vector<std::string> failures;
  std::vector<stats::RunGroup> groups;
  std::optional<stats::AnovaResult> anova;
  std::vector<stats::TukeyPair> tukey;
  std::string anova_error;  // why anova is absent
};

/// ANOVA and Tukey over the given groups; failures to compute them are
/// recorded in anova_error rather than thrown.
void summarize(ExperimentReport& report);

/// Runs every configuration `runs[i]` times with paired seeds.  A failed
/// run is reported through `on_failure` and excluded.
ExperimentReport run_experiment(const PipelineConfig& cfg, const PreparedData& prepared,
                                const std::array<std::size_t, 5>& runs,
                                const std::function<void(const RunResult&)>& on_run = {},
                                const std::function<void(const std::string&)>& on_failure = {});

nlohmann::json report_json(const ExperimentReport& report);
std::string report_table(const ExperimentReport& report);

} // namespace tabdl
