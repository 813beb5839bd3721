#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tabdl/classifiers.hpp"
#include "tabdl/data.hpp"
#include "tabdl/sae.hpp"

namespace tabdl {

struct JointConfig {
  ClassifierKind head = ClassifierKind::cnn;
  std::vector<std::size_t> hidden = {64};  // autoencoder widths between input and latent
  std::size_t latent = kLatentWidth;
  double lambda = 1e-3;  // latent L1 weight
  double alpha = 1.0;    // classification weight
  double beta = 1.0;     // reconstruction weight
  std::size_t epochs = 650;
  std::size_t batch = 50;
  double lr = 1e-3;
  ClassifierConfig head_config = ClassifierConfig::cnn_defaults();  // head architecture only
  std::uint64_t seed = 0;
};

void validate(const JointConfig& cfg);

/// One encoder feeding both a reconstruction decoder and a classifier head.
/// A cnn head sees the latent reshaped to 20 x 20 x 1.
struct JointModel {
  SaeModel autoencoder;
  Classifier head;

  std::vector<Tensor> encoder_parameters() const { return autoencoder.encoder.parameters(); }
  std::vector<Tensor> parameters() const;
  std::vector<NamedTensor> named_parameters() const;
};

JointModel build_joint(const JointConfig& cfg, std::size_t input_width = data::kFeatureCount);

struct JointOutput {
  Tensor latent;          // N x latent
  Tensor reconstruction;  // N x input
  Tensor probability;     // N x 1
};

JointOutput joint_forward(const JointModel& model, const Tensor& x, const ForwardContext& ctx);

struct JointLossParts {
  Tensor total;
  // Weighted terms; they sum to total.
  double reconstruction = 0.0;
  double classification = 0.0;
  double sparsity = 0.0;
};

/// beta * MSE(x, x_hat) + alpha * BCE(y_hat, y) + lambda * sum|latent| / rows.
JointLossParts joint_loss(Tape* tape, Tensor x, Tensor x_hat, Tensor latent, Tensor y, Tensor y_hat,
                          double alpha, double beta, double lambda);
JointLossParts joint_loss(Tape* tape, Tensor x, Tensor x_hat, Tensor latent, Tensor y, Tensor y_hat,
                          const JointConfig& cfg);

struct JointTraining {
  JointModel model;
  LossHistory history;
};

JointTraining train_joint(JointModel model, const Tensor& X, std::span<const int> y, const JointConfig& cfg);

Prediction predict_joint(const JointModel& model, const Tensor& X, double threshold = 0.5);

} // namespace tabdl
