#pragma once

#include <cstddef>
#include <vector>

#include "tabdl/rng.hpp"
#include "tabdl/tensor.hpp"

// Differentiable primitives.  Each takes the tape to record on first; pass
// nullptr for inference.  Scalar results have shape [1].

namespace tabdl::ops {

enum class Activation { identity, relu, sigmoid };

/// x[N x in] * W[in x out] + b[out].
Tensor dense(Tape* tape, Tensor x, Tensor weight, Tensor bias);

/// Valid cross-correlation. x[N x H x W x C], filters[K x kh x kw x C], bias[K].
Tensor conv2d(Tape* tape, Tensor x, Tensor filters, Tensor bias, std::size_t stride);

/// Non-overlapping max pooling over x[N x H x W x C]; ties route the
/// gradient to the first maximum in row-major order.
Tensor maxpool2d(Tape* tape, Tensor x, std::size_t pool_h, std::size_t pool_w);

/// maxpool2d(relu(conv2d(x))) in one pass.  Values and gradients equal the
/// composed ops; the full-resolution conv output is never stored.
Tensor conv2d_relu_maxpool(Tape* tape, Tensor x, Tensor filters, Tensor bias, std::size_t stride,
                           std::size_t pool_h, std::size_t pool_w);

/// Inverted dropout.  Returns `x` itself when not training or when rate is 0.
Tensor dropout(Tape* tape, Tensor x, double rate, bool training, Rng& rng);

Tensor activation(Tape* tape, Tensor x, Activation kind);
Tensor sigmoid(Tape* tape, Tensor x);
Tensor relu(Tape* tape, Tensor x);

/// Logistic function evaluated without overflow for large |x|.
double stable_sigmoid(double x);

/// Mean of squared differences over every element.
Tensor mse(Tape* tape, Tensor prediction, Tensor target);

inline constexpr double kBceEpsilon = 1e-7;
/// Binary cross-entropy with probabilities clamped to [eps, 1 - eps].
/// Targets must be exactly 0 or 1.
Tensor bce(Tape* tape, Tensor probability, Tensor target);

/// KL(N(mu, sigma^2) || N(0, 1)) summed over latent units.  Rank-2 inputs
/// are [rows x units] and the result is averaged over rows.
Tensor kl_standard_normal(Tape* tape, Tensor mu, Tensor sigma);
/// Same divergence with sigma = exp(log_var / 2).
Tensor kl_standard_normal_logvar(Tape* tape, Tensor mu, Tensor log_var);

/// Sum of |w| over every listed tensor; subgradient 0 at w == 0.
Tensor l1_penalty(Tape* tape, std::vector<Tensor> params);
/// Sum of |x| divided by the number of rows (dim 0).
Tensor mean_row_l1(Tape* tape, Tensor x);

Tensor add(Tape* tape, Tensor a, Tensor b);
Tensor scale(Tape* tape, Tensor x, double factor);
Tensor reshape(Tape* tape, Tensor x, Shape shape);

} // namespace tabdl::ops
