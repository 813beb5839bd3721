#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tabdl::stats {

struct RunMetrics {
  double accuracy = 0.0;
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::string config;
  std::uint64_t seed = 0;

  std::size_t total() const { return tp + tn + fp + fn; }
};

/// Confusion counts with class 1 as positive.
RunMetrics accuracy_and_confusion(std::span<const int> predicted, std::span<const int> truth);

struct RunGroup {
  std::string label;
  std::vector<double> values;
};

double mean(std::span<const double> v);
/// Sample (n - 1) standard deviation.
double sample_sd(std::span<const double> v);

struct AnovaResult {
  double F = 0.0;
  bool f_infinite = false;  // no within-group spread but distinct group means
  std::size_t df_between = 0;
  std::size_t df_within = 0;
  double p = 1.0;
  double ss_between = 0.0;
  double ss_within = 0.0;
  double ms_within = 0.0;
  std::vector<double> means;
  std::vector<double> sds;
  std::vector<std::size_t> sizes;
};

/// One-way between-groups ANOVA.  Needs two or more groups of two or more
/// values, not all identical.
AnovaResult one_way_anova(const std::vector<RunGroup>& groups);

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double regularized_incomplete_beta(double a, double b, double x);
/// P(F(d1, d2) > f).
double f_survival(double f, double d1, double d2);

/// Upper 5% point of the studentized range for k means and df error
/// degrees of freedom, interpolated linearly in 1/df between tabulated
/// rows.  Only alpha = 0.05 and k in [2, 6] are tabulated.
double studentized_range_q(std::size_t k, double df, double alpha = 0.05);

struct TukeyPair {
  std::size_t i = 0, j = 0;
  std::string a, b;
  double mean_difference = 0.0;  // mean_i - mean_j
  double critical = 0.0;
  bool significant = false;
};

/// Tukey-Kramer pairwise comparisons over every unordered pair (i < j).
std::vector<TukeyPair> tukey_hsd(const std::vector<RunGroup>& groups, double alpha = 0.05);

} // namespace tabdl::stats
