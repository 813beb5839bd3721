#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tabdl/layers.hpp"
#include "tabdl/training.hpp"

namespace tabdl {

enum class ClassifierKind { mlp, cnn };

std::string to_string(ClassifierKind kind);

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::mlp;
  std::size_t epochs = 450;
  std::size_t batch = 50;
  double lr = 1e-3;
  double dropout = 0.3;
  std::vector<std::size_t> hidden = {128, 32};  // dense widths before the output unit
  // Convolutional front end (cnn only).
  std::size_t filters = 100;
  std::size_t kernel_h = 2;
  std::size_t kernel_w = 6;
  std::size_t pool_h = 2;
  std::size_t pool_w = 6;
  double threshold = 0.5;
  std::uint64_t seed = 0;

  static ClassifierConfig mlp_defaults();
  static ClassifierConfig cnn_defaults();
};

void validate(const ClassifierConfig& cfg);

/// A Sequential ending in one sigmoid unit.
struct Classifier {
  ClassifierKind kind = ClassifierKind::mlp;
  Sequential net;
};

/// Dense stack: each hidden width is dense -> relu -> dropout.
Classifier build_mlp(const ClassifierConfig& cfg, std::size_t input_width, const std::string& name = "mlp");
Classifier build_mlp(const ClassifierConfig& cfg, std::size_t input_width, const std::string& name, Rng& init);

/// conv -> relu -> maxpool -> dropout -> flatten -> dense head.  The conv
/// and pool output shapes are recomputed independently and compared with
/// the layer stack; any disagreement throws dimension_error.
Classifier build_cnn(const ClassifierConfig& cfg, std::size_t grid_side = 20, const std::string& name = "cnn");
Classifier build_cnn(const ClassifierConfig& cfg, std::size_t grid_side, const std::string& name, Rng& init);

/// Per-sample shapes: input, conv output, pool output, flattened.
std::vector<Shape> cnn_shape_chain(const Classifier& cnn);

struct ClassifierTraining {
  Classifier model;
  LossHistory history;
};

/// Minimizes BCE with Adam.  X has a leading row axis matching y.
ClassifierTraining train_classifier(Classifier model, const Tensor& X, std::span<const int> y,
                                    const ClassifierConfig& cfg);

struct Prediction {
  std::vector<double> probability;
  std::vector<int> label;  // probability >= threshold
};

Prediction threshold_probabilities(const Tensor& probabilities, double threshold);
Prediction predict(const Classifier& model, const Tensor& X, double threshold = 0.5);

/// y as an N x 1 tensor; throws argument_error unless every label is 0 or 1.
Tensor label_column(std::span<const int> y);

} // namespace tabdl
