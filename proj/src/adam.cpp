#include "tabdl/adam.hpp"

#include <cmath>
#include <string>

#include "tabdl/errors.hpp"

namespace tabdl {

namespace {

// Moments of parameters that stop receiving gradient decay geometrically
// and would otherwise crawl through the subnormal range, which costs
// orders of magnitude per operation.  Anything this small cannot move a
// weight by more than ~1e-190.
constexpr double kMomentFloor = 1e-200;

inline double flush_tiny(double x) { return std::abs(x) < kMomentFloor ? 0.0 : x; }

} // namespace

AdamState::AdamState(const std::vector<Tensor>& params, AdamOptions opts) : options(opts) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const auto& p : params) {
    m.emplace_back(p.size(), 0.0);
    v.emplace_back(p.size(), 0.0);
  }
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw dimension_error("adam_step: state tracks " + std::to_string(state.m.size()) + " parameters, got " +
                          std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i)
    if (state.m[i].size() != params[i].size() || state.v[i].size() != params[i].size())
      throw dimension_error("adam_step: moment buffers for parameter " + std::to_string(i) +
                            " do not match shape " + shape_to_string(params[i].shape()));

  const auto& o = state.options;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const double* __restrict g = p.grad().data();
    double* __restrict w = p.values().data();
    double* __restrict m = state.m[i].data();
    double* __restrict v = state.v[i].data();
    const std::size_t n = p.size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = flush_tiny(o.beta1 * m[j] + (1.0 - o.beta1) * g[j]);
      v[j] = flush_tiny(o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j]);
      w[j] -= o.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + o.epsilon);
    }
  }
}

} // namespace tabdl
