#include "tabdl/kernels.hpp"

#include <algorithm>
#include <vector>

namespace tabdl::kernels::reference {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> filters,
                    std::span<const double> bias, std::span<double> out) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t f = 0; f < g.filters; ++f) {
          double s = bias[f];
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx)
              for (std::size_t c = 0; c < g.channels; ++c) {
                const std::size_t iy = oy * g.stride + ky, ix = ox * g.stride + kx;
                s += x[((n * g.height + iy) * g.width + ix) * g.channels + c] *
                     filters[((f * g.kernel_h + ky) * g.kernel_w + kx) * g.channels + c];
              }
          out[((n * oh + oy) * ow + ox) * g.filters + f] = s;
        }
}

void conv2d_backward_params(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> d_out, std::span<double> d_filters,
                            std::span<double> d_bias) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t f = 0; f < g.filters; ++f) {
          const double go = d_out[((n * oh + oy) * ow + ox) * g.filters + f];
          d_bias[f] += go;
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx)
              for (std::size_t c = 0; c < g.channels; ++c) {
                const std::size_t iy = oy * g.stride + ky, ix = ox * g.stride + kx;
                d_filters[((f * g.kernel_h + ky) * g.kernel_w + kx) * g.channels + c] +=
                    go * x[((n * g.height + iy) * g.width + ix) * g.channels + c];
              }
        }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> filters,
                           std::span<const double> d_out, std::span<double> d_x) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t f = 0; f < g.filters; ++f) {
          const double go = d_out[((n * oh + oy) * ow + ox) * g.filters + f];
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx)
              for (std::size_t c = 0; c < g.channels; ++c) {
                const std::size_t iy = oy * g.stride + ky, ix = ox * g.stride + kx;
                d_x[((n * g.height + iy) * g.width + ix) * g.channels + c] +=
                    go * filters[((f * g.kernel_h + ky) * g.kernel_w + kx) * g.channels + c];
              }
        }
}

void maxpool_forward(const PoolGeometry& g, std::span<const double> x, std::span<double> out,
                     std::span<std::size_t> argmax) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        for (std::size_t c = 0; c < g.channels; ++c) {
          std::size_t best = ((n * g.height + oy * g.pool_h) * g.width + ox * g.pool_w) * g.channels + c;
          for (std::size_t py = 0; py < g.pool_h; ++py)
            for (std::size_t px = 0; px < g.pool_w; ++px) {
              const std::size_t idx =
                  ((n * g.height + oy * g.pool_h + py) * g.width + ox * g.pool_w + px) * g.channels + c;
              if (x[idx] > x[best]) best = idx;
            }
          const std::size_t o = ((n * oh + oy) * ow + ox) * g.channels + c;
          out[o] = x[best];
          argmax[o] = best;
        }
}

void maxpool_backward(const PoolGeometry& g, std::span<const std::size_t> argmax,
                      std::span<const double> d_out, std::span<double> d_x) {
  const std::size_t total = g.output_size();
  for (std::size_t o = 0; o < total; ++o) d_x[argmax[o]] += d_out[o];
}

namespace {

PoolGeometry pool_over(const ConvGeometry& g, std::size_t pool_h, std::size_t pool_w) {
  return {g.batch, g.out_h(), g.out_w(), g.filters, pool_h, pool_w};
}

} // namespace

void conv_relu_pool_forward(const ConvGeometry& g, std::size_t pool_h, std::size_t pool_w,
                            std::span<const double> x, std::span<const double> filters,
                            std::span<const double> bias, std::span<double> out, std::span<std::size_t> argmax) {
  std::vector<double> conv(g.output_size());
  conv2d_forward(g, x, filters, bias, conv);
  std::vector<double> act(conv.size());
  for (std::size_t i = 0; i < conv.size(); ++i) act[i] = conv[i] > 0.0 ? conv[i] : 0.0;
  maxpool_forward(pool_over(g, pool_h, pool_w), act, out, argmax);
  for (std::size_t o = 0; o < out.size(); ++o)
    if (!(conv[argmax[o]] > 0.0)) argmax[o] = kNoRoute;
}

void conv_relu_pool_backward_params(const ConvGeometry& g, std::size_t pool_h, std::size_t pool_w,
                                    std::span<const double> x, std::span<const std::size_t> argmax,
                                    std::span<const double> d_out, std::span<double> d_filters,
                                    std::span<double> d_bias) {
  std::vector<double> d_conv(g.output_size(), 0.0);
  const std::size_t total = pool_over(g, pool_h, pool_w).output_size();
  for (std::size_t o = 0; o < total; ++o)
    if (argmax[o] != kNoRoute) d_conv[argmax[o]] += d_out[o];
  conv2d_backward_params(g, x, d_conv, d_filters, d_bias);
}

void conv_relu_pool_backward_input(const ConvGeometry& g, std::size_t pool_h, std::size_t pool_w,
                                   std::span<const double> filters, std::span<const std::size_t> argmax,
                                   std::span<const double> d_out, std::span<double> d_x) {
  std::vector<double> d_conv(g.output_size(), 0.0);
  const std::size_t total = pool_over(g, pool_h, pool_w).output_size();
  for (std::size_t o = 0; o < total; ++o)
    if (argmax[o] != kNoRoute) d_conv[argmax[o]] += d_out[o];
  conv2d_backward_input(g, filters, d_conv, d_x);
}

} // namespace tabdl::kernels::reference
