#pragma once

#include <cstddef>
#include <limits>
#include <span>

// Numeric kernels behind the autodiff ops.
//
// Every kernel exists twice with the same signature: `reference` is the
// plain serial loop nest kept as a test oracle, `parallel` is the OpenMP
// version the ops call.  Parallel kernels split work over independent
// output rows only, so results do not depend on the thread count.

namespace tabdl::kernels {

inline constexpr std::size_t kNoRoute = std::numeric_limits<std::size_t>::max();

/// NHWC input, KHWC filters, valid padding.
struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t channels = 1;
  std::size_t filters = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;

  std::size_t out_h() const { return (height - kernel_h) / stride + 1; }
  std::size_t out_w() const { return (width - kernel_w) / stride + 1; }
  std::size_t patch_size() const { return kernel_h * kernel_w * channels; }
  std::size_t patch_rows() const { return batch * out_h() * out_w(); }
  std::size_t input_size() const { return batch * height * width * channels; }
  std::size_t output_size() const { return patch_rows() * filters; }
};

/// NHWC input, non-overlapping windows, trailing remainder dropped.
struct PoolGeometry {
  std::size_t batch = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t channels = 1;
  std::size_t pool_h = 1;
  std::size_t pool_w = 1;

  std::size_t out_h() const { return height / pool_h; }
  std::size_t out_w() const { return width / pool_w; }
  std::size_t input_size() const { return batch * height * width * channels; }
  std::size_t output_size() const { return batch * out_h() * out_w() * channels; }
};

namespace reference {

// C[MxN] (+)= A[MxK] * B[KxN]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
// C[MxN] (+)= A[KxM]^T * B[KxN]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
// C[MxN] (+)= A[MxK] * B[NxK]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);

// out[n,y,x,f] = bias[f] + sum over the window of x * filters[f]
void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> filters,
                    std::span<const double> bias, std::span<double> out);
// d_filters += dL/dfilters, d_bias += dL/dbias
void conv2d_backward_params(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> d_out, std::span<double> d_filters,
                            std::span<double> d_bias);
// d_x += dL/dx
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> filters,
                           std::span<const double> d_out, std::span<double> d_x);

// argmax[o] is the flat input index of the first maximal element of window o.
void maxpool_forward(const PoolGeometry& g, std::span<const double> x, std::span<double> out,
                     std::span<std::size_t> argmax);
void maxpool_backward(const PoolGeometry& g, std::span<const std::size_t> argmax,
                      std::span<const double> d_out, std::span<double> d_x);

// Fused conv2d -> relu -> maxpool (pool windows over the conv output).
// out is N x (oh / pool_h) x (ow / pool_w) x K.  argmax[o] is the flat
// conv-output index of the window's first maximum, or kNoRoute when relu
// clipped the pooled value to zero and no gradient flows.
void conv_relu_pool_forward(const ConvGeometry& g, std::size_t pool_h, std::size_t pool_w,
                            std::span<const double> x, std::span<const double> filters,
                            std::span<const double> bias, std::span<double> out, std::span<std::size_t> argmax);
void conv_relu_pool_backward_params(const ConvGeometry& g, std::size_t pool_h, std::size_t pool_w,
                                    std::span<const double> x, std::span<const std::size_t> argmax,
                                    std::span<const double> d_out, std::span<double> d_filters,
                                    std::span<double> d_bias);
void conv_relu_pool_backward_input(const ConvGeometry& g, std::size_t pool_h, std::size_t pool_w,
                                   std::span<const double> filters, std::span<const std::size_t> argmax,
                                   std::span<const double> d_out, std::span<double> d_x);

} // namespace reference

namespace parallel {

// C[MxN] (+)= A[MxK] * B[KxN]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
// C[MxN] (+)= A[KxM]^T * B[KxN]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
// C[MxN] (+)= A[MxK] * B[NxK]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);

// out[n,y,x,f] = bias[f] + sum over the window of x * filters[f]
void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> filters,
                    std::span<const double> bias, std::span<double> out);
// d_filters += dL/dfilters, d_bias += dL/dbias
void conv2d_backward_params(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> d_out, std::span<double> d_filters,
                            std::span<double> d_bias);
// d_x += dL/dx
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> filters,
                           std::span<const double> d_out, std::span<double> d_x);

// argmax[o] is the flat input index of the first maximal element of window o.
void maxpool_forward(const PoolGeometry& g, std::span<const double> x, std::span<double> out,
                     std::span<std::size_t> argmax);
void maxpool_backward(const PoolGeometry& g, std::span<const std::size_t> argmax,
                      std::span<const double> d_out, std::span<double> d_x);

// Fused conv2d -> relu -> maxpool (pool windows over the conv output).
// out is N x (oh / pool_h) x (ow / pool_w) x K.  argmax[o] is the flat
// conv-output index of the window's first maximum, or kNoRoute when relu
// clipped the pooled value to zero and no gradient flows.
void conv_relu_pool_forward(const ConvGeometry& g, std::size_t pool_h, std::size_t pool_w,
                            std::span<const double> x, std::span<const double> filters,
                            std::span<const double> bias, std::span<double> out, std::span<std::size_t> argmax);
void conv_relu_pool_backward_params(const ConvGeometry& g, std::size_t pool_h, std::size_t pool_w,
                                    std::span<const double> x, std::span<const std::size_t> argmax,
                                    std::span<const double> d_out, std::span<double> d_filters,
                                    std::span<double> d_bias);
void conv_relu_pool_backward_input(const ConvGeometry& g, std::size_t pool_h, std::size_t pool_w,
                                   std::span<const double> filters, std::span<const std::size_t> argmax,
                                   std::span<const double> d_out, std::span<double> d_x);

// Unfolds valid-padding windows into rows: patches[(n,oy,ox), (ky,kx,c)].
void im2col(const ConvGeometry& g, std::span<const double> x, std::span<double> patches);
// Adds patch rows back onto the input layout (adjoint of im2col).
void col2im(const ConvGeometry& g, std::span<const double> patches, std::span<double> x);

// Variants that reuse patches from im2col; the ops layer keeps them for backward.
void conv2d_forward_patches(const ConvGeometry& g, std::span<const double> patches,
                            std::span<const double> filters, std::span<const double> bias,
                            std::span<double> out);
void conv2d_backward_params_patches(const ConvGeometry& g, std::span<const double> patches,
                                    std::span<const double> d_out, std::span<double> d_filters,
                                    std::span<double> d_bias);

} // namespace parallel

} // namespace tabdl::kernels
