#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <vector>

#include "tabdl/kernels.hpp"
#include "tabdl/rng.hpp"

using namespace tabdl;
namespace kr = tabdl::kernels::reference;
namespace kp = tabdl::kernels::parallel;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

} // namespace

TEST_CASE("gemm variants agree with the reference loops") {
  Rng rng(11);
  // Odd sizes exercise the partial row blocks and the depth blocking.
  for (auto [m, n, k] : {std::array<std::size_t, 3>{1, 1, 1}, {3, 5, 8}, {7, 13, 300}, {50, 64, 1800}, {12, 100, 700}}) {
    const auto a = random_vec(m * k, rng), b = random_vec(k * n, rng), at = random_vec(k * m, rng),
               bt = random_vec(n * k, rng);
    const auto init = random_vec(m * n, rng);
    for (bool acc : {false, true}) {
      auto c_ref = init, c_par = init;
      kr::gemm_nn(m, n, k, a, b, c_ref, acc);
      kp::gemm_nn(m, n, k, a, b, c_par, acc);
      CHECK(max_abs_diff(c_ref, c_par) < 1e-12);

      c_ref = init, c_par = init;
      kr::gemm_tn(m, n, k, at, b, c_ref, acc);
      kp::gemm_tn(m, n, k, at, b, c_par, acc);
      CHECK(max_abs_diff(c_ref, c_par) < 1e-12);

      c_ref = init, c_par = init;
      kr::gemm_nt(m, n, k, a, bt, c_ref, acc);
      kp::gemm_nt(m, n, k, a, bt, c_par, acc);
      CHECK(max_abs_diff(c_ref, c_par) < 1e-12);
    }
  }
}

TEST_CASE("conv2d kernels agree with the reference loops") {
  Rng rng(12);
  std::vector<kernels::ConvGeometry> cases;
  cases.push_back({2, 20, 20, 1, 100, 2, 6, 1});
  cases.push_back({3, 4, 6, 1, 2, 2, 3, 1});
  cases.push_back({2, 7, 9, 3, 4, 3, 2, 2});
  for (const auto& g : cases) {
    const auto x = random_vec(g.input_size(), rng);
    const auto f = random_vec(g.filters * g.patch_size(), rng);
    const auto bias = random_vec(g.filters, rng);
    const auto d_out = random_vec(g.output_size(), rng);

    std::vector<double> out_ref(g.output_size()), out_par(g.output_size());
    kr::conv2d_forward(g, x, f, bias, out_ref);
    kp::conv2d_forward(g, x, f, bias, out_par);
    CHECK(max_abs_diff(out_ref, out_par) < 1e-12);

    std::vector<double> df_ref(f.size(), 0.5), df_par(f.size(), 0.5), db_ref(g.filters, 0.25), db_par(g.filters, 0.25);
    kr::conv2d_backward_params(g, x, d_out, df_ref, db_ref);
    kp::conv2d_backward_params(g, x, d_out, df_par, db_par);
    CHECK(max_abs_diff(df_ref, df_par) < 1e-10);
    CHECK(max_abs_diff(db_ref, db_par) < 1e-10);

    std::vector<double> dx_ref(x.size(), 0.0), dx_par(x.size(), 0.0);
    kr::conv2d_backward_input(g, f, d_out, dx_ref);
    kp::conv2d_backward_input(g, f, d_out, dx_par);
    CHECK(max_abs_diff(dx_ref, dx_par) < 1e-12);
  }
}

TEST_CASE("col2im is the adjoint of im2col") {
  Rng rng(13);
  const kernels::ConvGeometry g{2, 5, 7, 2, 1, 2, 3, 1};
  const auto x = random_vec(g.input_size(), rng);
  const auto p = random_vec(g.patch_rows() * g.patch_size(), rng);
  std::vector<double> ix(p.size()), cp(x.size(), 0.0);
  kp::im2col(g, x, ix);
  kp::col2im(g, p, cp);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) lhs += ix[i] * p[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * cp[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("maxpool kernels agree, including first-maximum ties") {
  Rng rng(14);
  const kernels::PoolGeometry g{3, 19, 15, 5, 2, 6};
  auto x = random_vec(g.input_size(), rng);
  // Quantize so ties are common.
  for (auto& v : x) v = std::round(v * 2.0) / 2.0;
  std::vector<double> out_ref(g.output_size()), out_par(g.output_size());
  std::vector<std::size_t> am_ref(g.output_size()), am_par(g.output_size());
  kr::maxpool_forward(g, x, out_ref, am_ref);
  kp::maxpool_forward(g, x, out_par, am_par);
  CHECK(out_ref == out_par);
  CHECK(am_ref == am_par);

  const auto d_out = random_vec(g.output_size(), rng);
  std::vector<double> dx_ref(x.size(), 0.0), dx_par(x.size(), 0.0);
  kr::maxpool_backward(g, am_ref, d_out, dx_ref);
  kp::maxpool_backward(g, am_par, d_out, dx_par);
  CHECK(dx_ref == dx_par);
}

TEST_CASE("parallel kernels are bit-identical across repeated calls") {
  Rng rng(15);
  const std::size_t m = 50, n = 64, k = 1800;
  const auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
  std::vector<double> c1(m * n), c2(m * n);
  kp::gemm_nn(m, n, k, a, b, c1, false);
  kp::gemm_nn(m, n, k, a, b, c2, false);
  CHECK(c1 == c2);
}

TEST_CASE("fused conv-relu-pool kernels agree with the reference composition") {
  Rng rng(16);
  for (const auto& [g, ph, pw] : {std::tuple{kernels::ConvGeometry{3, 20, 20, 1, 100, 2, 6, 1}, 2ul, 6ul},
                                  std::tuple{kernels::ConvGeometry{2, 4, 6, 1, 2, 2, 3, 1}, 1ul, 2ul},
                                  std::tuple{kernels::ConvGeometry{2, 9, 7, 2, 3, 2, 2, 1}, 3ul, 2ul}}) {
    const std::size_t n_out = g.batch * (g.out_h() / ph) * (g.out_w() / pw) * g.filters;
    const auto x = random_vec(g.input_size(), rng);
    const auto f = random_vec(g.filters * g.patch_size(), rng);
    const auto bias = random_vec(g.filters, rng);
    std::vector<double> out_ref(n_out), out_par(n_out);
    std::vector<std::size_t> am_ref(n_out), am_par(n_out);
    kr::conv_relu_pool_forward(g, ph, pw, x, f, bias, out_ref, am_ref);
    kp::conv_relu_pool_forward(g, ph, pw, x, f, bias, out_par, am_par);
    CHECK(max_abs_diff(out_ref, out_par) < 1e-12);
    CHECK(am_ref == am_par);
    CHECK(std::count(am_ref.begin(), am_ref.end(), kernels::kNoRoute) > 0);

    const auto d_out = random_vec(n_out, rng);
    std::vector<double> df_ref(f.size(), 0.0), df_par(f.size(), 0.0), db_ref(g.filters, 0.0), db_par(g.filters, 0.0);
    kr::conv_relu_pool_backward_params(g, ph, pw, x, am_ref, d_out, df_ref, db_ref);
    kp::conv_relu_pool_backward_params(g, ph, pw, x, am_par, d_out, df_par, db_par);
    CHECK(max_abs_diff(df_ref, df_par) < 1e-10);
    CHECK(max_abs_diff(db_ref, db_par) < 1e-10);

    std::vector<double> dx_ref(x.size(), 0.0), dx_par(x.size(), 0.0);
    kr::conv_relu_pool_backward_input(g, ph, pw, f, am_ref, d_out, dx_ref);
    kp::conv_relu_pool_backward_input(g, ph, pw, f, am_par, d_out, dx_par);
    CHECK(max_abs_diff(dx_ref, dx_par) < 1e-12);
  }
}
