#include "tabdl/stats.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "tabdl/errors.hpp"

namespace tabdl::stats {

RunMetrics accuracy_and_confusion(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size())
    throw dimension_error("accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                          std::to_string(truth.size()) + " labels");
  if (truth.empty()) throw argument_error("accuracy: no rows");
  RunMetrics m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int p = predicted[i], t = truth[i];
    if ((p != 0 && p != 1) || (t != 0 && t != 1))
      throw argument_error("accuracy: non-binary value at row " + std::to_string(i));
    if (p == 1 && t == 1) ++m.tp;
    else if (p == 0 && t == 0) ++m.tn;
    else if (p == 1) ++m.fp;
    else ++m.fn;
  }
  m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(m.total());
  return m;
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

AnovaResult one_way_anova(const std::vector<RunGroup>& groups) {
  if (groups.size() < 2) throw argument_error("anova: need at least two groups");
  AnovaResult r;
  std::size_t n_total = 0;
  double grand = 0.0;
  for (const auto& g : groups) {
    if (g.values.size() < 2) throw argument_error("anova: group '" + g.label + "' has fewer than two values");
    r.means.push_back(mean(g.values));
    r.sds.push_back(sample_sd(g.values));
    r.sizes.push_back(g.values.size());
    n_total += g.values.size();
    for (double v : g.values) grand += v;
  }
  grand /= static_cast<double>(n_total);

  bool all_equal = true;
  const double first = groups.front().values.front();
  for (std::size_t k = 0; k < groups.size(); ++k) {
    r.ss_between += static_cast<double>(r.sizes[k]) * (r.means[k] - grand) * (r.means[k] - grand);
    for (double v : groups[k].values) {
      r.ss_within += (v - r.means[k]) * (v - r.means[k]);
      all_equal = all_equal && v == first;
    }
  }
  if (all_equal) throw argument_error("anova: every value is identical; F is undefined");

  r.df_between = groups.size() - 1;
  r.df_within = n_total - groups.size();
  r.ms_within = r.ss_within / static_cast<double>(r.df_within);
  const double ms_between = r.ss_between / static_cast<double>(r.df_between);
  if (r.ss_within == 0.0) {
    r.f_infinite = true;
    r.F = std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.F = ms_between / r.ms_within;
  r.p = f_survival(r.F, static_cast<double>(r.df_between), static_cast<double>(r.df_within));
  return r;
}

namespace {

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300, eps = 1e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < eps) return h;
  }
  throw numeric_error("incomplete beta: continued fraction did not converge");
}

} // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw domain_error("incomplete beta: a and b must be positive");
  if (x < 0.0 || x > 1.0) throw domain_error("incomplete beta: x must lie in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges fast only on one side of the mean; use symmetry on the other.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_survival(double f, double d1, double d2) {
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw domain_error("f_survival: degrees of freedom must be positive");
  if (std::isinf(f)) return 0.0;
  if (f <= 0.0) return 1.0;
  return regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

namespace {

// Upper 5% points of the studentized range, rows by error df, columns k = 2..6.
constexpr std::array<double, 15> kQDf = {2, 3, 4, 5, 6, 7, 8, 9, 10, 20, 30, 40, 60, 120,
                                         std::numeric_limits<double>::infinity()};
constexpr std::array<std::array<double, 5>, 15> kQ05 = {{
    {6.085, 8.331, 9.798, 10.881, 11.734},
    {4.501, 5.910, 6.825, 7.502, 8.037},
    {3.926, 5.040, 5.757, 6.287, 6.706},
    {3.635, 4.602, 5.218, 5.673, 6.033},
    {3.460, 4.339, 4.896, 5.305, 5.628},
    {3.344, 4.165, 4.681, 5.060, 5.359},
    {3.261, 4.041, 4.529, 4.886, 5.167},
    {3.199, 3.948, 4.415, 4.755, 5.024},
    {3.151, 3.877, 4.327, 4.654, 4.912},
    {2.950, 3.578, 3.958, 4.232, 4.445},
    {2.888, 3.486, 3.845, 4.102, 4.302},
    {2.858, 3.442, 3.791, 4.039, 4.232},
    {2.829, 3.399, 3.737, 3.977, 4.163},
    {2.800, 3.356, 3.685, 3.917, 4.096},
    {2.772, 3.314, 3.633, 3.858, 4.030},
}};

} // namespace

double studentized_range_q(std::size_t k, double df, double alpha) {
  if (alpha != 0.05) throw argument_error("studentized range: only alpha = 0.05 is tabulated");
  if (k < 2 || k > 6) throw argument_error("studentized range: k = " + std::to_string(k) + " is outside 2..6");
  if (!(df >= kQDf.front())) throw argument_error("studentized range: df must be at least 2");
  const std::size_t col = k - 2;
  if (std::isinf(df)) return kQ05.back()[col];
  for (std::size_t r = 0; r + 1 < kQDf.size(); ++r) {
    if (df == kQDf[r]) return kQ05[r][col];
    if (df < kQDf[r + 1]) {
      const double inv = 1.0 / df, lo = 1.0 / kQDf[r], hi = 1.0 / kQDf[r + 1];  // hi is 0 for the infinite row
      const double t = (lo - inv) / (lo - hi);
      return kQ05[r][col] + t * (kQ05[r + 1][col] - kQ05[r][col]);
    }
  }
  return kQ05.back()[col];
}

std::vector<TukeyPair> tukey_hsd(const std::vector<RunGroup>& groups, double alpha) {
  const AnovaResult a = one_way_anova(groups);
  const double q = studentized_range_q(groups.size(), static_cast<double>(a.df_within), alpha);
  std::vector<TukeyPair> out;
  for (std::size_t i = 0; i < groups.size(); ++i)
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      TukeyPair p;
      p.i = i;
      p.j = j;
      p.a = groups[i].label;
      p.b = groups[j].label;
      p.mean_difference = a.means[i] - a.means[j];
      const double inv_n = 1.0 / static_cast<double>(a.sizes[i]) + 1.0 / static_cast<double>(a.sizes[j]);
      p.critical = q * std::sqrt(a.ms_within / 2.0 * inv_n);
      p.significant = std::abs(p.mean_difference) > p.critical;
      out.push_back(p);
    }
  return out;
}

} // namespace tabdl::stats
