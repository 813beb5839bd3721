#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tabdl/tensor.hpp"

namespace tabdl {

/// Mean loss terms over one epoch, weighted by batch size.  Terms a model
/// does not have stay at zero.  Components are already multiplied by their
/// loss weights, so they sum to `total`.
struct EpochLoss {
  double total = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
  double sparsity = 0.0;
  double classification = 0.0;
};

using LossHistory = std::vector<EpochLoss>;

/// Running per-epoch sums.
class EpochMeter {
public:
  void add(const EpochLoss& batch_loss, std::size_t rows);
  EpochLoss mean() const;

private:
  EpochLoss sum_;
  std::size_t rows_ = 0;
};

/// Throws numeric_error naming the model, epoch and batch when the loss
/// is not finite.
void check_loss(double loss, const std::string& model, std::size_t epoch, std::size_t batch);

// Sub-stream identifiers so initialization, shuffling, dropout and
// sampling draw from independent generators derived from one seed.
inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kShuffleStream = 2;
inline constexpr std::uint64_t kNoiseStream = 3;

} // namespace tabdl
