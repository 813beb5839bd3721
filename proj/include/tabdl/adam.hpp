#pragma once

#include <cstdint>
#include <vector>

#include "tabdl/tensor.hpp"

namespace tabdl {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment buffers, one pair per parameter, plus the step count.
struct AdamState {
  AdamOptions options;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;

  AdamState() = default;
  AdamState(const std::vector<Tensor>& params, AdamOptions opts);
};

/// One bias-corrected Adam update using each parameter's grad() slot.
/// Parameters without a gradient are treated as having a zero gradient.
void adam_step(std::vector<Tensor>& params, AdamState& state);

/// Adam bound to a fixed parameter list.
class Adam {
public:
  Adam(std::vector<Tensor> params, AdamOptions options = {})
      : params_(std::move(params)), state_(params_, options) {}

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }
  void step() { adam_step(params_, state_); }

  const AdamState& state() const { return state_; }
  const std::vector<Tensor>& params() const { return params_; }

private:
  std::vector<Tensor> params_;
  AdamState state_;
};

} // namespace tabdl
