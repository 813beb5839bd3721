#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tabdl/data.hpp"
#include "tabdl/layers.hpp"
#include "tabdl/training.hpp"

namespace tabdl {

inline constexpr std::size_t kGridSide = 20;
inline constexpr std::size_t kLatentWidth = kGridSide * kGridSide;

enum class SparsityTarget {
  activations,  // L1 on the latent activations, averaged over rows
  weights,      // L1 on every weight matrix of encoder and decoder
};

struct SaeConfig {
  double lambda = 1e-3;
  std::vector<std::size_t> hidden = {64};  // between input and latent; decoder mirrors it
  std::size_t latent = kLatentWidth;
  std::size_t epochs = 400;
  std::size_t batch = 32;
  double lr = 1e-3;
  SparsityTarget target = SparsityTarget::activations;
  std::uint64_t seed = 0;
};

void validate(const SaeConfig& cfg);

/// Overcomplete autoencoder: relu latent, sigmoid reconstruction.
struct SaeModel {
  Sequential encoder;
  Sequential decoder;

  std::vector<Tensor> parameters() const;
  std::vector<NamedTensor> named_parameters() const;
  std::size_t latent_width() const { return encoder.output_shape()[0]; }
};

/// Encoder and decoder stacks for an autoencoder of the given widths.
/// `prefix` names the parameters ("sae" or "joint").
SaeModel build_autoencoder(const std::string& prefix, std::size_t input_width, const std::vector<std::size_t>& hidden,
                           std::size_t latent, Rng& init);
SaeModel build_sae(const SaeConfig& cfg, std::size_t input_width = data::kFeatureCount);

struct SaeLossParts {
  Tensor total;
  double reconstruction = 0.0;
  double sparsity = 0.0;  // already multiplied by lambda
};

/// MSE(x, x_hat) + lambda * sum|latent| / rows.
SaeLossParts sae_loss(Tape* tape, Tensor x, Tensor x_hat, Tensor latent, double lambda);

struct SaeTraining {
  SaeModel model;
  LossHistory history;
};

SaeTraining train_sae(const Tensor& X, const SaeConfig& cfg);

/// Latent activations (N x latent), inference mode.
Tensor encode_features(const SaeModel& model, const Tensor& X);

/// Mean over rows of the latent L1 norm.
double mean_latent_l1(const SaeModel& model, const Tensor& X);

/// N x 400 -> N x 20 x 20 x 1, row-major: grid[r][c] = F[20 r + c].
Tensor reshape_to_grid(const Tensor& features);
/// Inverse of reshape_to_grid.
Tensor flatten_grid(const Tensor& grid);

} // namespace tabdl
