#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tabdl/data.hpp"
#include "tabdl/layers.hpp"
#include "tabdl/training.hpp"

namespace tabdl {

struct VaeConfig {
  std::size_t latent_dim = 2;
  std::vector<std::size_t> hidden = {16, 8};  // decoder mirrors this
  std::size_t epochs = 200;
  std::size_t batch = 32;
  double lr = 1e-3;
  double kl_weight = 1.0;
  std::uint64_t seed = 0;
};

/// Throws argument_error for an unusable configuration.
void validate(const VaeConfig& cfg);

/// Encoder stack, two heads on its output (mean and log-variance of the
/// latent Gaussian), and a decoder ending in a sigmoid.
struct VaeModel {
  Sequential encoder;
  Sequential mu_head;
  Sequential logvar_head;
  Sequential decoder;

  std::vector<Tensor> parameters() const;
  std::vector<NamedTensor> named_parameters() const;
  std::size_t input_width() const { return encoder.input_shape()[0]; }
};

VaeModel build_vae(const VaeConfig& cfg, std::size_t input_width = data::kFeatureCount);

/// z = mu + exp(log_var / 2) * eps with eps ~ N(0, I), differentiable in
/// mu and log_var.
Tensor reparameterize(Tape* tape, Tensor mu, Tensor log_var, Rng& rng);

struct VaeLossParts {
  Tensor total;
  double reconstruction = 0.0;
  double kl = 0.0;  // already multiplied by kl_weight
};

/// MSE(x, x_hat) + kl_weight * KL(N(mu, exp(log_var)) || N(0, I)), the KL
/// summed over latent units and averaged over rows.
VaeLossParts vae_loss(Tape* tape, Tensor x, Tensor x_hat, Tensor mu, Tensor log_var, double kl_weight);

struct VaeTraining {
  VaeModel model;
  LossHistory history;
};

/// Fits a VAE to `rows` (normalized to [0, 1]).  Needs at least two
/// batches of rows.
VaeTraining train_vae(const data::Dataset& rows, const VaeConfig& cfg);

/// Encodes seeds (cycled in order), samples a latent and decodes.  Outputs
/// are clamped to [0, 1], flagged synthetic and carry the seeds' label.
data::Dataset generate_synthetic(const VaeModel& model, const data::Dataset& seeds, std::int64_t count, Rng& rng);

enum class BalancePolicy {
  one_pass,  // whole passes over the real minority rows until minority >= majority
  exact,     // stop at minority == majority
};

std::string to_string(BalancePolicy policy);
BalancePolicy parse_balance_policy(std::string_view text);

/// Number of synthetic rows balance_dataset appends for the given counts.
std::size_t synthetic_rows_needed(std::size_t majority, std::size_t minority, BalancePolicy policy);

/// Appends synthetic minority rows generated from the real minority rows of
/// `train`.  Real rows are returned untouched and in order.  An already
/// balanced set comes back unchanged.
data::Dataset balance_dataset(const data::Dataset& train, const VaeModel& model, Rng& rng,
                              BalancePolicy policy = BalancePolicy::one_pass);

} // namespace tabdl
