#include "tabdl/training.hpp"

#include <cmath>

#include "tabdl/errors.hpp"

namespace tabdl {

void EpochMeter::add(const EpochLoss& b, std::size_t rows) {
  const double w = static_cast<double>(rows);
  sum_.total += w * b.total;
  sum_.reconstruction += w * b.reconstruction;
  sum_.kl += w * b.kl;
  sum_.sparsity += w * b.sparsity;
  sum_.classification += w * b.classification;
  rows_ += rows;
}

EpochLoss EpochMeter::mean() const {
  if (rows_ == 0) return {};
  const double n = static_cast<double>(rows_);
  return {sum_.total / n, sum_.reconstruction / n, sum_.kl / n, sum_.sparsity / n, sum_.classification / n};
}

void check_loss(double loss, const std::string& model, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(loss))
    throw numeric_error(model + ": non-finite loss " + std::to_string(loss) + " at epoch " + std::to_string(epoch + 1) +
                        ", batch " + std::to_string(batch + 1));
}

} // namespace tabdl
