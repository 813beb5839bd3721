#include "tabdl/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <vector>

namespace tabdl::kernels::parallel {

namespace {

// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 15;

constexpr std::size_t kRowBlock = 4;

// Contiguous [begin, end) slice of `count` items owned by the calling thread.
std::pair<std::size_t, std::size_t> thread_range(std::size_t count) {
  const auto threads = static_cast<std::size_t>(omp_get_num_threads());
  const auto tid = static_cast<std::size_t>(omp_get_thread_num());
  const std::size_t chunk = count / threads, extra = count % threads;
  const std::size_t begin = tid * chunk + std::min(tid, extra);
  return {begin, begin + chunk + (tid < extra ? 1 : 0)};
}

constexpr std::size_t kTileCols = 16;

// Eight doubles; the compiler lowers it to whatever vector width the
// target offers.
typedef double vec8 __attribute__((vector_size(64)));

inline vec8 load8(const double* p) {
  vec8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store8(double* p, vec8 v) { std::memcpy(p, &v, sizeof v); }

// C[4 x 16] (+)= A[4 x k] * B[k x 16] with the C tile held in registers.
// A(r, p) = a[r * a_rs + p * a_cs], so one routine serves A and A^T.
inline void tile(std::size_t k, const double* a, std::size_t a_rs, std::size_t a_cs, const double* b,
                 std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  static_assert(kRowBlock == 4 && kTileCols == 16);
  vec8 acc[4][2];
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t h = 0; h < 2; ++h) acc[r][h] = accumulate ? load8(c + r * ldc + 8 * h) : vec8{};
  for (std::size_t p = 0; p < k; ++p) {
    const vec8 b0 = load8(b + p * ldb), b1 = load8(b + p * ldb + 8);
    const double* ap = a + p * a_cs;
    for (std::size_t r = 0; r < 4; ++r) {
      const double ar = ap[r * a_rs];
      acc[r][0] += ar * b0;
      acc[r][1] += ar * b1;
    }
  }
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t h = 0; h < 2; ++h) store8(c + r * ldc + 8 * h, acc[r][h]);
}

// Edge tiles of any size up to kRowBlock x kTileCols.
inline void edge_tile(std::size_t rows, std::size_t cols, std::size_t k, const double* a, std::size_t a_rs,
                      std::size_t a_cs, const double* b, std::size_t ldb, double* c, std::size_t ldc,
                      bool accumulate) {
  if (cols == kTileCols) {  // short on rows only: still vector-wide
    vec8 acc[kRowBlock][2];
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t h = 0; h < 2; ++h) acc[r][h] = accumulate ? load8(c + r * ldc + 8 * h) : vec8{};
    for (std::size_t p = 0; p < k; ++p) {
      const vec8 b0 = load8(b + p * ldb), b1 = load8(b + p * ldb + 8);
      for (std::size_t r = 0; r < rows; ++r) {
        const double ar = a[r * a_rs + p * a_cs];
        acc[r][0] += ar * b0;
        acc[r][1] += ar * b1;
      }
    }
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t h = 0; h < 2; ++h) store8(c + r * ldc + 8 * h, acc[r][h]);
    return;
  }
  double acc[kRowBlock][kTileCols];
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) acc[r][j] = accumulate ? c[r * ldc + j] : 0.0;
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t r = 0; r < rows; ++r) {
      const double ar = a[r * a_rs + p * a_cs];
      for (std::size_t j = 0; j < cols; ++j) acc[r][j] += ar * b[p * ldb + j];
    }
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) c[r * ldc + j] = acc[r][j];
}

// Rows [i0, i1) of C[m x n] (+)= A * B[k x n], serial.
void gemm_rows(std::size_t i0, std::size_t i1, std::size_t n, std::size_t k, const double* a, std::size_t a_rs,
               std::size_t a_cs, const double* b, double* c, bool accumulate) {
  for (std::size_t j0 = 0; j0 < n; j0 += kTileCols) {
    const std::size_t cols = std::min(kTileCols, n - j0);
    for (std::size_t i = i0; i < i1; i += kRowBlock) {
      const std::size_t rows = std::min(kRowBlock, i1 - i);
      const double* ai = a + i * a_rs;
      double* ci = c + i * n + j0;
      if (rows == kRowBlock && cols == kTileCols)
        tile(k, ai, a_rs, a_cs, b + j0, n, ci, n, accumulate);
      else
        edge_tile(rows, cols, k, ai, a_rs, a_cs, b + j0, n, ci, n, accumulate);
    }
  }
}

void transpose(std::size_t rows, std::size_t cols, const double* src, double* dst) {
#pragma omp parallel for schedule(static) if (rows * cols > kParallelWork)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows); ++i)
    for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
}

} // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  const std::size_t blocks = (m + kRowBlock - 1) / kRowBlock;
#pragma omp parallel if (m * n * k > kParallelWork)
  {
    const auto [first, last] = thread_range(blocks);
    if (first < last)
      gemm_rows(first * kRowBlock, std::min(m, last * kRowBlock), n, k, a.data(), k, 1, b.data(), c.data(), accumulate);
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  const std::size_t blocks = (m + kRowBlock - 1) / kRowBlock;
#pragma omp parallel if (m * n * k > kParallelWork)
  {
    const auto [first, last] = thread_range(blocks);
    if (first < last)
      gemm_rows(first * kRowBlock, std::min(m, last * kRowBlock), n, k, a.data(), 1, m, b.data(), c.data(), accumulate);
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  std::vector<double> bt(n * k);
  transpose(n, k, b.data(), bt.data());
  gemm_nn(m, n, k, a, bt, c, accumulate);
}

void im2col(const ConvGeometry& g, std::span<const double> x, std::span<double> patches) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), ps = g.patch_size();
  const std::size_t row_len = g.kernel_w * g.channels;
  const auto rows = static_cast<std::ptrdiff_t>(g.patch_rows());
#pragma omp parallel for schedule(static) if (g.patch_rows() * ps > kParallelWork)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t n = r / (oh * ow), oy = (r / ow) % oh, ox = r % ow;
    double* dst = patches.data() + r * ps;
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      const double* src = x.data() + ((n * g.height + oy * g.stride + ky) * g.width + ox * g.stride) * g.channels;
      std::copy(src, src + row_len, dst + ky * row_len);
    }
  }
}

void col2im(const ConvGeometry& g, std::span<const double> patches, std::span<double> x) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), ps = g.patch_size();
  const std::size_t row_len = g.kernel_w * g.channels;
  // Windows of one sample overlap, so samples are the unit of parallel work.
#pragma omp parallel for schedule(static) if (g.patch_rows() * ps > kParallelWork)
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(g.batch); ++n)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const double* src = patches.data() + ((n * oh + oy) * ow + ox) * ps;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
          double* dst = x.data() + ((n * g.height + oy * g.stride + ky) * g.width + ox * g.stride) * g.channels;
          for (std::size_t j = 0; j < row_len; ++j) dst[j] += src[ky * row_len + j];
        }
      }
}

void conv2d_forward_patches(const ConvGeometry& g, std::span<const double> patches,
                            std::span<const double> filters, std::span<const double> bias,
                            std::span<double> out) {
  const std::size_t rows = g.patch_rows(), f = g.filters;
  double* o = out.data();
  for (std::size_t r = 0; r < rows; ++r) std::copy(bias.begin(), bias.end(), o + r * f);
  gemm_nt(rows, f, g.patch_size(), patches, filters, out, true);
}

void conv2d_backward_params_patches(const ConvGeometry& g, std::span<const double> patches,
                                    std::span<const double> d_out, std::span<double> d_filters,
                                    std::span<double> d_bias) {
  const std::size_t rows = g.patch_rows(), f = g.filters, ps = g.patch_size();
  // d_filters^T = patches^T * d_out keeps the long filter axis innermost.
  std::vector<double> dft(ps * f);
  gemm_tn(ps, f, rows, patches, d_out, dft, false);
  for (std::size_t i = 0; i < f; ++i)
    for (std::size_t p = 0; p < ps; ++p) d_filters[i * ps + p] += dft[p * f + i];
  double* __restrict db = d_bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* __restrict d = d_out.data() + r * f;
    for (std::size_t i = 0; i < f; ++i) db[i] += d[i];
  }
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> filters,
                    std::span<const double> bias, std::span<double> out) {
  std::vector<double> patches(g.patch_rows() * g.patch_size());
  im2col(g, x, patches);
  conv2d_forward_patches(g, patches, filters, bias, out);
}

void conv2d_backward_params(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> d_out, std::span<double> d_filters,
                            std::span<double> d_bias) {
  std::vector<double> patches(g.patch_rows() * g.patch_size());
  im2col(g, x, patches);
  conv2d_backward_params_patches(g, patches, d_out, d_filters, d_bias);
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> filters,
                           std::span<const double> d_out, std::span<double> d_x) {
  std::vector<double> d_patches(g.patch_rows() * g.patch_size());
  gemm_nn(g.patch_rows(), g.patch_size(), g.filters, d_out, filters, d_patches, false);
  col2im(g, d_patches, d_x);
}

void maxpool_forward(const PoolGeometry& g, std::span<const double> x, std::span<double> out,
                     std::span<std::size_t> argmax) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), ch = g.channels;
#pragma omp parallel for schedule(static) if (g.input_size() > kParallelWork)
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(g.batch); ++n)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t o = ((n * oh + oy) * ow + ox) * ch;
        const std::size_t origin = ((n * g.height + oy * g.pool_h) * g.width + ox * g.pool_w) * ch;
        for (std::size_t c = 0; c < ch; ++c) {
          out[o + c] = x[origin + c];
          argmax[o + c] = origin + c;
        }
        // Row-major window scan with strict '>' keeps the first maximum.
        for (std::size_t py = 0; py < g.pool_h; ++py)
          for (std::size_t px = 0; px < g.pool_w; ++px) {
            const std::size_t base = ((n * g.height + oy * g.pool_h + py) * g.width + ox * g.pool_w + px) * ch;
            for (std::size_t c = 0; c < ch; ++c)
              if (x[base + c] > out[o + c]) {
                out[o + c] = x[base + c];
                argmax[o + c] = base + c;
              }
          }
      }
}

void maxpool_backward(const PoolGeometry& g, std::span<const std::size_t> argmax,
                      std::span<const double> d_out, std::span<double> d_x) {
  const std::size_t per_sample = g.out_h() * g.out_w() * g.channels;
  // Windows do not overlap, so each sample's scatter touches only its own input slice.
#pragma omp parallel for schedule(static) if (g.output_size() > kParallelWork)
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(g.batch); ++n)
    for (std::size_t o = n * per_sample; o < (n + 1) * per_sample; ++o) d_x[argmax[o]] += d_out[o];
}

void conv_relu_pool_forward(const ConvGeometry& g, std::size_t pool_h, std::size_t pool_w,
                            std::span<const double> x, std::span<const double> filters,
                            std::span<const double> bias, std::span<double> out, std::span<std::size_t> argmax) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), kf = g.filters, ps = g.patch_size();
  const std::size_t ph = oh / pool_h, pw = ow / pool_w, row_len = g.kernel_w * g.channels;
  const std::size_t sample_in = g.height * g.width * g.channels;
  // Filters transposed to [patch x K] with K padded to whole vector tiles.
  const std::size_t kp = (kf + kTileCols - 1) / kTileCols * kTileCols;
  std::vector<double> ft(ps * kp, 0.0);
  for (std::size_t f = 0; f < kf; ++f)
    for (std::size_t q = 0; q < ps; ++q) ft[q * kp + f] = filters[f * ps + q];

  // Only conv positions some pool window reads are computed.  One sample's
  // patches and conv output fit in cache, so neither is built for the batch.
  const std::size_t cov_h = ph * pool_h, cov_w = pw * pool_w, positions = cov_h * cov_w;
#pragma omp parallel if (g.output_size() * ps > kParallelWork)
  {
    std::vector<double> patches(positions * ps), conv(positions * kp, 0.0);
    const auto [first, last] = thread_range(g.batch);
    for (std::size_t n = first; n < last; ++n) {
      const double* xs = x.data() + n * sample_in;
      for (std::size_t oy = 0; oy < cov_h; ++oy)
        for (std::size_t ox = 0; ox < cov_w; ++ox) {
          double* dst = patches.data() + (oy * cov_w + ox) * ps;
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            const double* src = xs + ((oy * g.stride + ky) * g.width + ox * g.stride) * g.channels;
            std::copy(src, src + row_len, dst + ky * row_len);
          }
          std::copy(bias.begin(), bias.end(), conv.data() + (oy * cov_w + ox) * kp);
        }
      gemm_rows(0, positions, kp, ps, patches.data(), ps, 1, ft.data(), conv.data(), true);

      for (std::size_t py = 0; py < ph; ++py)
        for (std::size_t px = 0; px < pw; ++px) {
          const std::size_t o = ((n * ph + py) * pw + px) * kf;
          double* best = out.data() + o;
          std::size_t* where = argmax.data() + o;
          std::copy_n(conv.data() + (py * pool_h * cov_w + px * pool_w) * kp, kf, best);
          std::fill_n(where, kf, 0);
          // Row-major window scan with strict '>' keeps the first maximum.
          for (std::size_t wy = 0; wy < pool_h; ++wy)
            for (std::size_t wx = 0; wx < pool_w; ++wx) {
              const double* cv = conv.data() + ((py * pool_h + wy) * cov_w + px * pool_w + wx) * kp;
              const std::size_t slot = wy * pool_w + wx;
              for (std::size_t k = 0; k < kf; ++k)
                if (cv[k] > best[k]) {
                  best[k] = cv[k];
                  where[k] = slot;
                }
            }
          for (std::size_t k = 0; k < kf; ++k) {
            if (best[k] > 0.0) {
              const std::size_t oy = py * pool_h + where[k] / pool_w, ox = px * pool_w + where[k] % pool_w;
              where[k] = ((n * oh + oy) * ow + ox) * kf + k;
            } else {
              best[k] = 0.0;
              where[k] = kNoRoute;
            }
          }
        }
    }
  }
}

void conv_relu_pool_backward_params(const ConvGeometry& g, std::size_t pool_h, std::size_t pool_w,
                                    std::span<const double> x, std::span<const std::size_t> argmax,
                                    std::span<const double> d_out, std::span<double> d_filters,
                                    std::span<double> d_bias) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), kf = g.filters, ps = g.patch_size();
  const std::size_t per_sample = (oh / pool_h) * (ow / pool_w) * kf, row_len = g.kernel_w * g.channels;
  const std::size_t total = g.batch * per_sample;
  // Each thread owns a slice of filters and visits every routed output in order.
#pragma omp parallel if (total * ps > kParallelWork)
  {
    const auto [f0, f1] = thread_range(kf);
    for (std::size_t o = 0; o < total; ++o) {
      const std::size_t a = argmax[o];
      if (a == kNoRoute) continue;
      const std::size_t k = a % kf;
      if (k < f0 || k >= f1) continue;
      const std::size_t cell = a / kf, ox = cell % ow, oy = (cell / ow) % oh, n = cell / (oh * ow);
      const double gval = d_out[o];
      d_bias[k] += gval;
      double* __restrict df = d_filters.data() + k * ps;
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        const double* src = x.data() + ((n * g.height + oy * g.stride + ky) * g.width + ox * g.stride) * g.channels;
        for (std::size_t j = 0; j < row_len; ++j) df[ky * row_len + j] += gval * src[j];
      }
    }
  }
}

void conv_relu_pool_backward_input(const ConvGeometry& g, std::size_t pool_h, std::size_t pool_w,
                                   std::span<const double> filters, std::span<const std::size_t> argmax,
                                   std::span<const double> d_out, std::span<double> d_x) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), kf = g.filters, ps = g.patch_size();
  const std::size_t per_sample = (oh / pool_h) * (ow / pool_w) * kf, row_len = g.kernel_w * g.channels;
#pragma omp parallel for schedule(static) if (g.batch * per_sample * ps > kParallelWork)
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(g.batch); ++n)
    for (std::size_t o = n * per_sample; o < (n + 1) * per_sample; ++o) {
      const std::size_t a = argmax[o];
      if (a == kNoRoute) continue;
      const std::size_t k = a % kf, cell = a / kf, ox = cell % ow, oy = (cell / ow) % oh;
      const double gval = d_out[o];
      const double* f = filters.data() + k * ps;
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
        double* dst = d_x.data() + ((n * g.height + oy * g.stride + ky) * g.width + ox * g.stride) * g.channels;
        for (std::size_t j = 0; j < row_len; ++j) dst[j] += gval * f[ky * row_len + j];
      }
    }
}

} // namespace tabdl::kernels::parallel
