#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "tabdl/classifiers.hpp"
#include "tabdl/data.hpp"
#include "tabdl/joint.hpp"
#include "tabdl/sae.hpp"
#include "tabdl/vae.hpp"

namespace tabdl {

/// The five training set-ups compared by the experiment harness.
enum class Configuration { mlp, sae_mlp, sae_cnn, sae_with_mlp, sae_with_cnn };

inline constexpr std::array<Configuration, 5> kAllConfigurations = {
    Configuration::mlp, Configuration::sae_mlp, Configuration::sae_cnn, Configuration::sae_with_mlp,
    Configuration::sae_with_cnn};

std::string to_string(Configuration c);
Configuration parse_configuration(std::string_view text);

struct JointSettings {
  double alpha = 1.0;
  double beta = 1.0;
  double lambda = 1e-3;
  std::size_t mlp_epochs = 450;
  std::size_t cnn_epochs = 650;
  std::size_t batch = 50;
  double lr = 1e-3;
};

struct PipelineConfig {
  std::filesystem::path input;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;        // model seed for train / evaluate, base seed for experiments
  std::uint64_t split_seed = 0;  // fixes the held-out rows independently of the model seed
  double train_ratio = 0.9;
  data::NormalizerKind normalizer = data::NormalizerKind::minmax;
  Configuration configuration = Configuration::sae_with_cnn;
  BalancePolicy balance = BalancePolicy::one_pass;

  VaeConfig vae;
  SaeConfig sae;
  ClassifierConfig mlp = ClassifierConfig::mlp_defaults();
  ClassifierConfig cnn = ClassifierConfig::cnn_defaults();
  JointSettings joint;

  // Runs per configuration in an experiment, indexed like kAllConfigurations.
  std::array<std::size_t, 5> runs = {11, 11, 11, 11, 12};
};

/// INI text: [section] headers, key = value lines, '#' or ';' comments.
/// Unknown sections or keys, duplicates and malformed values raise
/// config_error with the line number.  Relative paths resolve against
/// `base_dir`.
PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir, const std::string& source);

/// Parses the file and checks that the input CSV exists (data_error if not).
PipelineConfig load_config(const std::filesystem::path& path);

} // namespace tabdl
