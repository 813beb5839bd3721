#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <tuple>

#include "oracles.hpp"
#include "tabdl/errors.hpp"
#include "tabdl/rng.hpp"
#include "tabdl/stats.hpp"

using namespace tabdl;
using namespace tabdl::stats;

namespace {

std::vector<RunGroup> labelled(const std::vector<std::vector<double>>& values) {
  std::vector<RunGroup> out;
  for (std::size_t i = 0; i < values.size(); ++i) out.push_back({"g" + std::to_string(i), values[i]});
  return out;
}

} // namespace

TEST_CASE("confusion counts") {
  const std::vector<int> pred{1, 1, 0, 0, 1}, truth{1, 0, 0, 1, 1};
  const auto m = accuracy_and_confusion(pred, truth);
  CHECK(m.tp == 2);
  CHECK(m.fp == 1);
  CHECK(m.tn == 1);
  CHECK(m.fn == 1);
  CHECK(m.accuracy == doctest::Approx(0.6));
  CHECK_THROWS_AS(accuracy_and_confusion(std::vector<int>{1}, truth), dimension_error);
  CHECK_THROWS_AS(accuracy_and_confusion(std::vector<int>{}, std::vector<int>{}), argument_error);
}

TEST_CASE("moments") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(mean(v) == 5.0);
  CHECK(sample_sd(v) == doctest::Approx(std::sqrt(32.0 / 7.0)));
}

TEST_CASE("F against a direct sums-of-squares recomputation") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng.below(5);
    std::vector<std::vector<double>> values(k);
    for (auto& g : values) {
      const std::size_t n = 2 + rng.below(12);
      const double shift = rng.uniform(-2.0, 2.0);
      for (std::size_t i = 0; i < n; ++i) g.push_back(shift + rng.normal());
    }
    const auto a = one_way_anova(labelled(values));
    const auto [ssb, ssw] = testing::sums_of_squares(values);
    std::size_t n = 0;
    for (const auto& g : values) n += g.size();
    const double F = (ssb / static_cast<double>(k - 1)) / (ssw / static_cast<double>(n - k));
    INFO("trial " << trial);
    CHECK(a.df_between == k - 1);
    CHECK(a.df_within == n - k);
    CHECK(std::abs(a.F - F) <= 1e-10 * std::max(1.0, F));
  }
}

TEST_CASE("p-value against quadrature of the F density") {
  for (auto [f, d1, d2] : {std::tuple{0.5, 1.0, 5.0}, {1.0, 4.0, 51.0}, {2.5, 3.0, 20.0}, {4.0, 2.0, 9.0},
                           {10.0, 4.0, 51.0}, {0.2, 6.0, 6.0}, {3.3, 5.0, 100.0}}) {
    INFO("F=" << f << " d1=" << d1 << " d2=" << d2);
    CHECK(std::abs(f_survival(f, d1, d2) - testing::f_survival_by_quadrature(f, d1, d2)) < 1e-6);
  }
  CHECK(f_survival(0.0, 3.0, 10.0) == 1.0);
  CHECK_THROWS_AS(f_survival(1.0, 0.0, 10.0), tabdl::domain_error);
  CHECK(regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0);
  CHECK(regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0);
  CHECK(regularized_incomplete_beta(1.0, 1.0, 0.37) == doctest::Approx(0.37));
}

TEST_CASE("identical groups") {
  const std::vector<double> base{0.78, 0.80, 0.81, 0.79, 0.83};
  const auto groups = labelled({base, base, base, base});
  const auto a = one_way_anova(groups);
  CHECK(a.F == doctest::Approx(0.0));
  CHECK(a.p == doctest::Approx(1.0));
  for (const auto& pair : tukey_hsd(groups)) CHECK_FALSE(pair.significant);
}

TEST_CASE("five groups with one clearly higher mean") {
  const std::vector<RunGroup> groups{
      {"sae_with_cnn", testing::values_with_moments(12, 92.31, 1.04)},
      {"sae_cnn", testing::values_with_moments(11, 85.71, 0.66)},
      {"sae_with_mlp", testing::values_with_moments(11, 80.52, 0.65)},
      {"sae_mlp", testing::values_with_moments(11, 80.52, 0.65)},
      {"mlp", testing::values_with_moments(11, 79.22, 0.77)}};
  const auto a = one_way_anova(groups);
  CHECK(a.df_between == 4);
  CHECK(a.df_within == 51);
  CHECK(a.p < 1e-10);
  CHECK(a.means[0] == doctest::Approx(92.31).epsilon(1e-12));
  CHECK(a.sds[1] == doctest::Approx(0.66).epsilon(1e-12));

  for (const auto& pair : tukey_hsd(groups)) {
    INFO(pair.a << " vs " << pair.b);
    if (pair.i == 0) CHECK(pair.significant);
    if (pair.a == "sae_with_mlp" && pair.b == "sae_mlp") CHECK_FALSE(pair.significant);
  }
}

TEST_CASE("anova input checks") {
  CHECK_THROWS_AS(one_way_anova(labelled({{1, 2, 3}})), argument_error);
  CHECK_THROWS_AS(one_way_anova(labelled({{1, 2}, {3}})), argument_error);
  CHECK_THROWS_AS(one_way_anova(labelled({{1, 1}, {1, 1}})), argument_error);
  const auto spreadless = one_way_anova(labelled({{1, 1}, {2, 2}}));
  CHECK(spreadless.f_infinite);
  CHECK(spreadless.p == 0.0);
}

TEST_CASE("studentized range table") {
  CHECK(studentized_range_q(2, 10) == doctest::Approx(3.151));
  CHECK(studentized_range_q(5, 60) == doctest::Approx(3.977));
  CHECK(studentized_range_q(3, std::numeric_limits<double>::infinity()) == doctest::Approx(3.314));
  // Linear in 1/df between the 40 and 60 rows.
  const double t = (1.0 / 40 - 1.0 / 51) / (1.0 / 40 - 1.0 / 60);
  CHECK(studentized_range_q(5, 51) == doctest::Approx(4.039 + t * (3.977 - 4.039)).epsilon(1e-12));
  CHECK(studentized_range_q(5, 51) < studentized_range_q(5, 40));
  CHECK(studentized_range_q(5, 51) > studentized_range_q(5, 60));
  CHECK_THROWS_AS(studentized_range_q(7, 20), argument_error);
  CHECK_THROWS_AS(studentized_range_q(3, 1), argument_error);
  CHECK_THROWS_AS(studentized_range_q(3, 20, 0.01), argument_error);
}
