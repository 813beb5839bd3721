// Reference versus parallel kernels at the shapes training actually uses.

#include <benchmark/benchmark.h>

#include <vector>

#include "tabdl/kernels.hpp"
#include "tabdl/rng.hpp"

namespace k = tabdl::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  tabdl::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// One training batch through the CNN front end: 50 x 20 x 20 x 1 input,
// 100 filters of 2 x 6, 2 x 6 pooling.
k::ConvGeometry batch_geometry() {
  k::ConvGeometry g;
  g.batch = 50;
  g.height = g.width = 20;
  g.channels = 1;
  g.filters = 100;
  g.kernel_h = 2;
  g.kernel_w = 6;
  return g;
}

constexpr std::size_t kPoolH = 2, kPoolW = 6;

template <auto Gemm>
void gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0)), n = static_cast<std::size_t>(state.range(1)),
             kk = static_cast<std::size_t>(state.range(2));
  const auto a = random_values(m * kk, 1), b = random_values(kk * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    Gemm(m, n, kk, a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * static_cast<double>(m * n * kk), benchmark::Counter::kIsIterationInvariantRate,
                         benchmark::Counter::kIs1000);
}

// Dense 1800 -> 64 layer over a batch of 50, plus the 64 -> 400 encoder.
#define GEMM_SHAPES ->Args({50, 64, 1800})->Args({1800, 64, 50})->Args({50, 400, 64})->Unit(benchmark::kMicrosecond)

BENCHMARK(gemm<k::reference::gemm_nn>)->Name("gemm_nn/reference") GEMM_SHAPES;
BENCHMARK(gemm<k::parallel::gemm_nn>)->Name("gemm_nn/parallel") GEMM_SHAPES;
BENCHMARK(gemm<k::reference::gemm_tn>)->Name("gemm_tn/reference") GEMM_SHAPES;
BENCHMARK(gemm<k::parallel::gemm_tn>)->Name("gemm_tn/parallel") GEMM_SHAPES;
BENCHMARK(gemm<k::reference::gemm_nt>)->Name("gemm_nt/reference") GEMM_SHAPES;
BENCHMARK(gemm<k::parallel::gemm_nt>)->Name("gemm_nt/parallel") GEMM_SHAPES;

struct ConvData {
  k::ConvGeometry g = batch_geometry();
  k::PoolGeometry pool;
  std::vector<double> x, filters, bias, conv, pooled, d_pooled, d_conv, d_filters, d_bias, d_x;
  std::vector<std::size_t> argmax;

  ConvData() {
    x = random_values(g.input_size(), 3);
    filters = random_values(g.filters * g.patch_size(), 4);
    bias = random_values(g.filters, 5);
    conv.resize(g.output_size());
    pool = {g.batch, g.out_h(), g.out_w(), g.filters, kPoolH, kPoolW};
    pooled.resize(pool.output_size());
    argmax.resize(pool.output_size());
    d_pooled = random_values(pool.output_size(), 6);
    d_conv.resize(g.output_size());
    d_filters.resize(filters.size());
    d_bias.resize(bias.size());
    d_x.resize(x.size());
  }
};

template <bool Fused>
void conv_forward(benchmark::State& state) {
  ConvData d;
  for (auto _ : state) {
    if constexpr (Fused) {
      k::parallel::conv_relu_pool_forward(d.g, kPoolH, kPoolW, d.x, d.filters, d.bias, d.pooled, d.argmax);
    } else {
      k::parallel::conv2d_forward(d.g, d.x, d.filters, d.bias, d.conv);
      for (auto& v : d.conv) v = v > 0.0 ? v : 0.0;
      k::parallel::maxpool_forward(d.pool, d.conv, d.pooled, d.argmax);
    }
    benchmark::DoNotOptimize(d.pooled.data());
  }
}
BENCHMARK(conv_forward<false>)->Name("conv_relu_pool_forward/separate")->Unit(benchmark::kMicrosecond);
BENCHMARK(conv_forward<true>)->Name("conv_relu_pool_forward/fused")->Unit(benchmark::kMicrosecond);

void conv_forward_reference(benchmark::State& state) {
  ConvData d;
  for (auto _ : state) {
    k::reference::conv_relu_pool_forward(d.g, kPoolH, kPoolW, d.x, d.filters, d.bias, d.pooled, d.argmax);
    benchmark::DoNotOptimize(d.pooled.data());
  }
}
BENCHMARK(conv_forward_reference)->Name("conv_relu_pool_forward/reference")->Unit(benchmark::kMicrosecond);

template <bool Parallel>
void conv_backward(benchmark::State& state) {
  ConvData d;
  k::parallel::conv_relu_pool_forward(d.g, kPoolH, kPoolW, d.x, d.filters, d.bias, d.pooled, d.argmax);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::conv_relu_pool_backward_params(d.g, kPoolH, kPoolW, d.x, d.argmax, d.d_pooled, d.d_filters,
                                                  d.d_bias);
      k::parallel::conv_relu_pool_backward_input(d.g, kPoolH, kPoolW, d.filters, d.argmax, d.d_pooled, d.d_x);
    } else {
      k::reference::conv_relu_pool_backward_params(d.g, kPoolH, kPoolW, d.x, d.argmax, d.d_pooled, d.d_filters,
                                                   d.d_bias);
      k::reference::conv_relu_pool_backward_input(d.g, kPoolH, kPoolW, d.filters, d.argmax, d.d_pooled, d.d_x);
    }
    benchmark::DoNotOptimize(d.d_x.data());
  }
}
BENCHMARK(conv_backward<false>)->Name("conv_relu_pool_backward/reference")->Unit(benchmark::kMicrosecond);
BENCHMARK(conv_backward<true>)->Name("conv_relu_pool_backward/parallel")->Unit(benchmark::kMicrosecond);

} // namespace

BENCHMARK_MAIN();
