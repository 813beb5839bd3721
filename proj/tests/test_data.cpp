#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "tabdl/data.hpp"
#include "tabdl/errors.hpp"
#include "tabdl/rng.hpp"

using namespace tabdl;
using namespace tabdl::data;

namespace {

const std::filesystem::path kCsv = std::filesystem::path(TABDL_DATA_DIR) / "diabetes.csv";

Dataset toy_dataset(const std::vector<std::array<double, kFeatureCount>>& rows, const std::vector<int>& labels) {
  std::vector<RawRecord> records;
  for (std::size_t i = 0; i < rows.size(); ++i) records.push_back({rows[i], labels[i]});
  return make_dataset(records);
}

Tensor column(std::vector<double> v) {
  const auto n = v.size();
  return Tensor({n, 1}, std::move(v));
}

} // namespace

TEST_CASE("load_pima_csv") {
  const auto records = load_pima_csv(kCsv);
  CHECK(records.size() == 768);
  const auto ones = std::count_if(records.begin(), records.end(), [](const RawRecord& r) { return r.label == 1; });
  CHECK(records.size() - ones == 500);
  CHECK(ones == 268);

  SUBCASE("text cell names its row") {
    std::istringstream in("1,2,3,4,5,6,7,8,0\n1,2,3,4,5,6,7,8,1\n1,2,3,4,5,6,7,8,0\n1,2,3,4,5,6,7,8,1\n1,2,abc,4,5,6,7,8,0\n");
    try {
      parse_pima_csv(in, "bad.csv");
      FAIL("expected data_error");
    } catch (const data_error& e) {
      CHECK(std::string(e.what()).find("row 5") != std::string::npos);
    }
  }
  SUBCASE("missing file names the path") {
    try {
      load_pima_csv("/nonexistent/pima.csv");
      FAIL("expected data_error");
    } catch (const data_error& e) {
      CHECK(std::string(e.what()).find("/nonexistent/pima.csv") != std::string::npos);
    }
  }
  SUBCASE("labels other than 0/1 rejected") {
    std::istringstream in("1,2,3,4,5,6,7,8,2\n");
    CHECK_THROWS_AS(parse_pima_csv(in, "x"), data_error);
  }
}

TEST_CASE("binarize_pregnancies") {
  std::vector<RawRecord> r(2);
  r[0].features[0] = 3;
  r[1].features[0] = 0;
  r[0].features[1] = 7;
  const auto once = binarize_pregnancies(r);
  CHECK(once[0].features[0] == 1.0);
  CHECK(once[1].features[0] == 0.0);
  CHECK(once[0].features[1] == 7.0);
  const auto twice = binarize_pregnancies(once);
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(twice[i].features == once[i].features);
}

TEST_CASE("impute_missing") {
  std::array<double, kFeatureCount> a{1, 0, 70, 20, 80, 30, 0.5, 0};
  std::array<double, kFeatureCount> b{0, 100, 70, 20, 80, 30, 0.5, 40};
  std::array<double, kFeatureCount> c{2, 140, 70, 20, 80, 30, 0.5, 50};
  const auto train = toy_dataset({a, b, c}, {0, 1, 0});
  std::array<double, kFeatureCount> t{0, 0, 60, 10, 90, 25, 0.2, 0};
  const auto test = toy_dataset({t, c}, {1, 0});
  const auto out = impute_missing(train, test);

  const auto D = kFeatureCount;
  CHECK(out.train.X[0 * D + 1] == doctest::Approx(120.0));  // mean of 100 and 140
  CHECK(out.test.X[0 * D + 1] == doctest::Approx(120.0));   // train mean, not test
  CHECK(out.means.applied[1]);
  // Columns without zeros stay put, exempt columns are never touched.
  for (std::size_t col : {2ul, 3ul, 4ul, 5ul}) CHECK(out.train.X[col] == train.X[col]);
  CHECK(out.train.X[0 * D + 0] == 1.0);
  CHECK(out.train.X[1 * D + 0] == 0.0);  // pregnancies exempt
  CHECK(out.train.X[0 * D + 7] == 0.0);  // age exempt
  CHECK(out.test.X[0 * D + 7] == 0.0);
  // Inputs unchanged.
  CHECK(train.X[1] == 0.0);
}

TEST_CASE("normalizers") {
  SUBCASE("minmax by hand") {
    const auto X = column({2, 4, 6});
    const auto Y = apply_normalizer(fit_normalizer(X, NormalizerKind::minmax), X);
    CHECK(Y[0] == 0.0);
    CHECK(Y[1] == doctest::Approx(0.5));
    CHECK(Y[2] == 1.0);
  }
  SUBCASE("standard with population sigma") {
    const auto X = column({1, 2, 3});
    const auto Y = apply_normalizer(fit_normalizer(X, NormalizerKind::standard), X);
    const double s = std::sqrt(2.0 / 3.0);
    CHECK(Y[0] == doctest::Approx(-1.0 / s).epsilon(1e-12));
    CHECK(Y[1] == doctest::Approx(0.0));
    CHECK(Y[2] == doctest::Approx(1.0 / s).epsilon(1e-12));
    CHECK(Y[0] == doctest::Approx(-1.2247).epsilon(1e-4));
  }
  SUBCASE("log at unit points") {
    const auto X = column({1, std::numbers::e});
    const auto Y = apply_normalizer(fit_normalizer(X, NormalizerKind::log), X);
    CHECK(Y[0] == 0.0);
    CHECK(Y[1] == doctest::Approx(1.0));
    CHECK_THROWS_AS(fit_normalizer(column({1, 0}), NormalizerKind::log), tabdl::domain_error);
  }
  SUBCASE("constant column maps to zero") {
    const auto X = column({5, 5, 5});
    const auto Y = apply_normalizer(fit_normalizer(X, NormalizerKind::minmax), X);
    for (double v : Y.values()) CHECK(v == 0.0);
  }
  SUBCASE("round trip and training range") {
    Rng rng(3);
    Tensor X({30, 4});
    for (auto& v : X.values()) v = rng.uniform(-50.0, 200.0);
    for (auto kind : {NormalizerKind::minmax, NormalizerKind::standard}) {
      const auto p = fit_normalizer(X, kind);
      const auto Y = apply_normalizer(p, X);
      if (kind == NormalizerKind::minmax)
        for (double v : Y.values()) CHECK((v >= 0.0 && v <= 1.0));
      const auto back = invert_normalizer(p, Y);
      for (std::size_t i = 0; i < X.size(); ++i) CHECK(std::abs(back[i] - X[i]) < 1e-12 * std::max(1.0, std::abs(X[i])));
    }
  }
  SUBCASE("unknown kind") { CHECK_THROWS_AS(parse_normalizer_kind("zscore"), config_error); }
}

TEST_CASE("split_train_test") {
  const auto all = make_dataset(binarize_pregnancies(load_pima_csv(kCsv)));
  const auto split = split_train_test(all.y, 0.9, 0);
  CHECK(split.train.size() == 691);
  CHECK(split.test.size() == 77);
  const auto train = subset(all, split.train);
  CHECK(train.count_label(0) == 449);
  CHECK(train.count_label(1) == 242);
  CHECK(split_train_test(all.y, 0.9, 0).train == split.train);
  CHECK(split_train_test(all.y, 0.9, 1).train != split.train);

  SUBCASE("exhaustive toy properties") {
    // Every labeling of 10 rows with both classes present.
    for (unsigned mask = 1; mask < (1u << 10) - 1; ++mask) {
      std::vector<int> y(10);
      for (int i = 0; i < 10; ++i) y[i] = (mask >> i) & 1;
      for (double ratio : {0.3, 0.5, 0.9}) {
        const auto s = split_train_test(y, ratio, mask);
        std::set<std::size_t> seen(s.train.begin(), s.train.end());
        for (auto i : s.test) CHECK_FALSE(seen.contains(i));
        seen.insert(s.test.begin(), s.test.end());
        REQUIRE(seen.size() == 10);
        CHECK(*seen.rbegin() == 9);
        CHECK(s.train.size() == static_cast<std::size_t>(std::floor(ratio * 10)));
        for (int c : {0, 1}) {
          const auto total = std::count(y.begin(), y.end(), c);
          const auto in_train = std::count_if(s.train.begin(), s.train.end(), [&](auto i) { return y[i] == c; });
          CHECK(std::abs(static_cast<double>(in_train) - ratio * static_cast<double>(total)) < 1.0);
        }
      }
    }
  }
  SUBCASE("bad ratio") { CHECK_THROWS_AS(split_train_test(all.y, 1.0, 0), argument_error); }
}

TEST_CASE("dataset helpers") {
  const auto d = toy_dataset({{1, 2, 3, 4, 5, 6, 7, 8}, {8, 7, 6, 5, 4, 3, 2, 1}}, {0, 1});
  CHECK(d.rows() == 2);
  CHECK(d.width() == 8);
  CHECK(d.synthetic == std::vector<bool>{false, false});
  const auto both = concat(d, d);
  CHECK(both.rows() == 4);
  CHECK(both.X[8] == 8.0);
  const auto none = subset(d, std::vector<std::size_t>{});
  CHECK(none.rows() == 0);
}
