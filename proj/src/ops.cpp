#include "tabdl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>

#include "tabdl/errors.hpp"
#include "tabdl/kernels.hpp"

namespace tabdl::ops {

namespace kp = kernels::parallel;

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw dimension_error(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                          shape_to_string(b.shape()));
}

std::size_t leading_rows(const Tensor& t) { return t.rank() >= 2 ? t.dim(0) : 1; }

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

} // namespace

Tensor dense(Tape* tape, Tensor x, Tensor weight, Tensor bias) {
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(0))
    throw dimension_error("dense: input " + shape_to_string(x.shape()) + " incompatible with weight " +
                          shape_to_string(weight.shape()));
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(1))
    throw dimension_error("dense: bias " + shape_to_string(bias.shape()) + " incompatible with weight " +
                          shape_to_string(weight.shape()));
  const std::size_t n = x.dim(0), in = weight.dim(0), out = weight.dim(1);
  Tensor y({n, out});
  auto yv = y.values();
  for (std::size_t r = 0; r < n; ++r) std::copy(bias.values().begin(), bias.values().end(), yv.begin() + r * out);
  kp::gemm_nn(n, out, in, x.values(), weight.values(), yv, true);

  if (tape) {
    tape->record({x, weight, bias}, y, [x, weight, bias, y, n, in, out]() mutable {
      auto gy = std::as_const(y).grad();
      if (x.requires_grad()) kp::gemm_nt(n, in, out, gy, weight.values(), x.grad(), true);
      if (weight.requires_grad()) kp::gemm_tn(in, out, n, x.values(), gy, weight.grad(), true);
      if (bias.requires_grad()) {
        auto gb = bias.grad();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t j = 0; j < out; ++j) gb[j] += gy[r * out + j];
      }
    });
  }
  return y;
}

Tensor conv2d(Tape* tape, Tensor x, Tensor filters, Tensor bias, std::size_t stride) {
  if (stride == 0) throw argument_error("conv2d: stride must be positive");
  if (x.rank() != 4 || filters.rank() != 4 || bias.rank() != 1)
    throw dimension_error("conv2d: expected NHWC input and KHWC filters, got " + shape_to_string(x.shape()) +
                          " and " + shape_to_string(filters.shape()));
  kernels::ConvGeometry g;
  g.batch = x.dim(0);
  g.height = x.dim(1);
  g.width = x.dim(2);
  g.channels = x.dim(3);
  g.filters = filters.dim(0);
  g.kernel_h = filters.dim(1);
  g.kernel_w = filters.dim(2);
  g.stride = stride;
  if (filters.dim(3) != g.channels || bias.dim(0) != g.filters)
    throw dimension_error("conv2d: filters " + shape_to_string(filters.shape()) + " / bias " +
                          shape_to_string(bias.shape()) + " do not match input " + shape_to_string(x.shape()));
  if (g.kernel_h > g.height || g.kernel_w > g.width)
    throw dimension_error("conv2d: kernel " + shape_to_string(filters.shape()) + " larger than input " +
                          shape_to_string(x.shape()));

  auto patches = std::make_shared<std::vector<double>>(g.patch_rows() * g.patch_size());
  kp::im2col(g, x.values(), *patches);
  Tensor y({g.batch, g.out_h(), g.out_w(), g.filters});
  kp::conv2d_forward_patches(g, *patches, filters.values(), bias.values(), y.values());

  if (tape) {
    tape->record({x, filters, bias}, y, [x, filters, bias, y, g, patches]() mutable {
      auto gy = std::as_const(y).grad();
      if (filters.requires_grad() || bias.requires_grad()) {
        auto gf = filters.grad();
        auto gb = bias.grad();
        kp::conv2d_backward_params_patches(g, *patches, gy, gf, gb);
      }
      if (x.requires_grad()) kp::conv2d_backward_input(g, filters.values(), gy, x.grad());
    });
  }
  return y;
}

Tensor maxpool2d(Tape* tape, Tensor x, std::size_t pool_h, std::size_t pool_w) {
  if (pool_h == 0 || pool_w == 0) throw argument_error("maxpool2d: pool dimensions must be positive");
  if (x.rank() != 4) throw dimension_error("maxpool2d: expected NHWC input, got " + shape_to_string(x.shape()));
  kernels::PoolGeometry g;
  g.batch = x.dim(0);
  g.height = x.dim(1);
  g.width = x.dim(2);
  g.channels = x.dim(3);
  g.pool_h = pool_h;
  g.pool_w = pool_w;
  if (pool_h > g.height || pool_w > g.width)
    throw dimension_error("maxpool2d: pool (" + std::to_string(pool_h) + "," + std::to_string(pool_w) +
                          ") larger than input " + shape_to_string(x.shape()));

  Tensor y({g.batch, g.out_h(), g.out_w(), g.channels});
  auto argmax = std::make_shared<std::vector<std::size_t>>(y.size());
  kp::maxpool_forward(g, x.values(), y.values(), *argmax);

  if (tape) {
    tape->record({x}, y, [x, y, g, argmax]() mutable {
      if (x.requires_grad()) kp::maxpool_backward(g, *argmax, std::as_const(y).grad(), x.grad());
    });
  }
  return y;
}

Tensor conv2d_relu_maxpool(Tape* tape, Tensor x, Tensor filters, Tensor bias, std::size_t stride,
                           std::size_t pool_h, std::size_t pool_w) {
  if (stride == 0) throw argument_error("conv2d: stride must be positive");
  if (pool_h == 0 || pool_w == 0) throw argument_error("maxpool2d: pool dimensions must be positive");
  if (x.rank() != 4 || filters.rank() != 4 || bias.rank() != 1)
    throw dimension_error("conv2d: expected NHWC input and KHWC filters, got " + shape_to_string(x.shape()) +
                          " and " + shape_to_string(filters.shape()));
  const kernels::ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), filters.dim(0), filters.dim(1), filters.dim(2),
                                stride};
  if (filters.dim(3) != g.channels || bias.dim(0) != g.filters)
    throw dimension_error("conv2d: filters " + shape_to_string(filters.shape()) + " / bias " +
                          shape_to_string(bias.shape()) + " do not match input " + shape_to_string(x.shape()));
  if (g.kernel_h > g.height || g.kernel_w > g.width)
    throw dimension_error("conv2d: kernel " + shape_to_string(filters.shape()) + " larger than input " +
                          shape_to_string(x.shape()));
  if (pool_h > g.out_h() || pool_w > g.out_w())
    throw dimension_error("maxpool2d: pool (" + std::to_string(pool_h) + "," + std::to_string(pool_w) +
                          ") larger than conv output");

  Tensor y({g.batch, g.out_h() / pool_h, g.out_w() / pool_w, g.filters});
  auto argmax = std::make_shared<std::vector<std::size_t>>(y.size());
  kp::conv_relu_pool_forward(g, pool_h, pool_w, x.values(), filters.values(), bias.values(), y.values(), *argmax);

  if (tape) {
    tape->record({x, filters, bias}, y, [x, filters, bias, y, g, pool_h, pool_w, argmax]() mutable {
      auto gy = std::as_const(y).grad();
      if (filters.requires_grad() || bias.requires_grad()) {
        auto gf = filters.grad();
        auto gb = bias.grad();
        kp::conv_relu_pool_backward_params(g, pool_h, pool_w, x.values(), *argmax, gy, gf, gb);
      }
      if (x.requires_grad())
        kp::conv_relu_pool_backward_input(g, pool_h, pool_w, filters.values(), *argmax, gy, x.grad());
    });
  }
  return y;
}

Tensor dropout(Tape* tape, Tensor x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw argument_error("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(x.size());
  for (auto& m : *mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  Tensor y(x.shape());
  auto xv = x.values();
  auto yv = y.values();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = xv[i] * (*mask)[i];

  if (tape) {
    tape->record({x}, y, [x, y, mask]() mutable {
      if (!x.requires_grad()) return;
      auto gx = x.grad();
      auto gy = std::as_const(y).grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * (*mask)[i];
    });
  }
  return y;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(Tape* tape, Tensor x) {
  Tensor y(x.shape());
  auto xv = x.values();
  auto yv = y.values();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = stable_sigmoid(xv[i]);
  if (tape) {
    tape->record({x}, y, [x, y]() mutable {
      if (!x.requires_grad()) return;
      auto gx = x.grad();
      auto gy = std::as_const(y).grad();
      auto yv = y.values();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * yv[i] * (1.0 - yv[i]);
    });
  }
  return y;
}

Tensor relu(Tape* tape, Tensor x) {
  Tensor y(x.shape());
  auto xv = x.values();
  auto yv = y.values();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  if (tape) {
    tape->record({x}, y, [x, y]() mutable {
      if (!x.requires_grad()) return;
      auto gx = x.grad();
      auto gy = std::as_const(y).grad();
      auto xv = x.values();
      for (std::size_t i = 0; i < gx.size(); ++i)
        if (xv[i] > 0.0) gx[i] += gy[i];
    });
  }
  return y;
}

Tensor activation(Tape* tape, Tensor x, Activation kind) {
  switch (kind) {
  case Activation::relu: return relu(tape, x);
  case Activation::sigmoid: return sigmoid(tape, x);
  case Activation::identity: return x;
  }
  return x;
}

Tensor mse(Tape* tape, Tensor prediction, Tensor target) {
  require_same_shape(prediction, target, "mse");
  auto pv = prediction.values();
  auto tv = target.values();
  const double n = static_cast<double>(pv.size());
  double s = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double d = pv[i] - tv[i];
    s += d * d;
  }
  Tensor loss = Tensor::scalar(s / n);
  if (tape) {
    tape->record({prediction, target}, loss, [prediction, target, loss, n]() mutable {
      const double g = std::as_const(loss).grad()[0] * 2.0 / n;
      auto pv = prediction.values();
      auto tv = target.values();
      if (prediction.requires_grad()) {
        auto gp = prediction.grad();
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g * (pv[i] - tv[i]);
      }
      if (target.requires_grad()) {
        auto gt = target.grad();
        for (std::size_t i = 0; i < gt.size(); ++i) gt[i] -= g * (pv[i] - tv[i]);
      }
    });
  }
  return loss;
}

Tensor bce(Tape* tape, Tensor probability, Tensor target) {
  require_same_shape(probability, target, "bce");
  auto pv = probability.values();
  auto tv = target.values();
  for (std::size_t i = 0; i < tv.size(); ++i)
    if (tv[i] != 0.0 && tv[i] != 1.0)
      throw argument_error("bce: target at index " + std::to_string(i) + " is " + std::to_string(tv[i]) +
                           ", expected 0 or 1");
  const double n = static_cast<double>(pv.size());
  double s = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double p = std::clamp(pv[i], kBceEpsilon, 1.0 - kBceEpsilon);
    s += tv[i] * std::log(p) + (1.0 - tv[i]) * std::log(1.0 - p);
  }
  Tensor loss = Tensor::scalar(-s / n);
  if (tape) {
    tape->record({probability, target}, loss, [probability, target, loss, n]() mutable {
      if (!probability.requires_grad()) return;
      const double g = std::as_const(loss).grad()[0] / n;
      auto pv = probability.values();
      auto tv = target.values();
      auto gp = probability.grad();
      for (std::size_t i = 0; i < gp.size(); ++i) {
        const double p = pv[i];
        if (p < kBceEpsilon || p > 1.0 - kBceEpsilon) continue;  // clamped: flat
        gp[i] += g * (-tv[i] / p + (1.0 - tv[i]) / (1.0 - p));
      }
    });
  }
  return loss;
}

Tensor kl_standard_normal(Tape* tape, Tensor mu, Tensor sigma) {
  require_same_shape(mu, sigma, "kl_standard_normal");
  auto mv = mu.values();
  auto sv = sigma.values();
  const double rows = static_cast<double>(leading_rows(mu));
  double s = 0.0;
  for (std::size_t i = 0; i < mv.size(); ++i) {
    if (!(sv[i] > 0.0))
      throw domain_error("kl_standard_normal: sigma must be positive, got " + std::to_string(sv[i]) + " at index " +
                         std::to_string(i));
    s += 0.5 * (mv[i] * mv[i] + sv[i] * sv[i] - 1.0 - 2.0 * std::log(sv[i]));
  }
  Tensor loss = Tensor::scalar(s / rows);
  if (tape) {
    tape->record({mu, sigma}, loss, [mu, sigma, loss, rows]() mutable {
      const double g = std::as_const(loss).grad()[0] / rows;
      auto mv = mu.values();
      auto sv = sigma.values();
      if (mu.requires_grad()) {
        auto gm = mu.grad();
        for (std::size_t i = 0; i < gm.size(); ++i) gm[i] += g * mv[i];
      }
      if (sigma.requires_grad()) {
        auto gs = sigma.grad();
        for (std::size_t i = 0; i < gs.size(); ++i) gs[i] += g * (sv[i] - 1.0 / sv[i]);
      }
    });
  }
  return loss;
}

Tensor kl_standard_normal_logvar(Tape* tape, Tensor mu, Tensor log_var) {
  require_same_shape(mu, log_var, "kl_standard_normal_logvar");
  auto mv = mu.values();
  auto lv = log_var.values();
  const double rows = static_cast<double>(leading_rows(mu));
  double s = 0.0;
  for (std::size_t i = 0; i < mv.size(); ++i) s += 0.5 * (mv[i] * mv[i] + std::exp(lv[i]) - 1.0 - lv[i]);
  Tensor loss = Tensor::scalar(s / rows);
  if (tape) {
    tape->record({mu, log_var}, loss, [mu, log_var, loss, rows]() mutable {
      const double g = std::as_const(loss).grad()[0] / rows;
      auto mv = mu.values();
      auto lv = log_var.values();
      if (mu.requires_grad()) {
        auto gm = mu.grad();
        for (std::size_t i = 0; i < gm.size(); ++i) gm[i] += g * mv[i];
      }
      if (log_var.requires_grad()) {
        auto gl = log_var.grad();
        for (std::size_t i = 0; i < gl.size(); ++i) gl[i] += g * 0.5 * (std::exp(lv[i]) - 1.0);
      }
    });
  }
  return loss;
}

Tensor l1_penalty(Tape* tape, std::vector<Tensor> params) {
  double s = 0.0;
  for (const auto& p : params)
    for (double w : p.values()) s += std::abs(w);
  Tensor loss = Tensor::scalar(s);
  if (tape) {
    tape->record(params, loss, [params, loss]() mutable {
      const double g = std::as_const(loss).grad()[0];
      for (auto& p : params) {
        if (!p.requires_grad()) continue;
        auto gp = p.grad();
        auto pv = p.values();
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g * sign(pv[i]);
      }
    });
  }
  return loss;
}

Tensor mean_row_l1(Tape* tape, Tensor x) {
  return scale(tape, l1_penalty(tape, {x}), 1.0 / static_cast<double>(leading_rows(x)));
}

Tensor add(Tape* tape, Tensor a, Tensor b) {
  require_same_shape(a, b, "add");
  Tensor y(a.shape());
  auto av = a.values();
  auto bv = b.values();
  auto yv = y.values();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = av[i] + bv[i];
  if (tape) {
    tape->record({a, b}, y, [a, b, y]() mutable {
      auto gy = std::as_const(y).grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[i];
      }
    });
  }
  return y;
}

Tensor scale(Tape* tape, Tensor x, double factor) {
  Tensor y(x.shape());
  auto xv = x.values();
  auto yv = y.values();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = factor * xv[i];
  if (tape) {
    tape->record({x}, y, [x, y, factor]() mutable {
      if (!x.requires_grad()) return;
      auto gx = x.grad();
      auto gy = std::as_const(y).grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += factor * gy[i];
    });
  }
  return y;
}

Tensor reshape(Tape* tape, Tensor x, Shape shape) {
  Tensor y = x.reshaped(std::move(shape));
  if (tape) {
    tape->record({x}, y, [x, y]() mutable {
      if (!x.requires_grad()) return;
      auto gx = x.grad();
      auto gy = std::as_const(y).grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
    });
  }
  return y;
}

} // namespace tabdl::ops
