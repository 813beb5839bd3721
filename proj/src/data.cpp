#include "tabdl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "tabdl/errors.hpp"
#include "tabdl/layers.hpp"
#include "tabdl/rng.hpp"

namespace tabdl::data {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_number(std::string_view cell, double& out) {
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(out);
}

} // namespace

std::vector<RawRecord> parse_pima_csv(std::istream& in, const std::string& source) {
  std::vector<RawRecord> records;
  std::string line;
  std::size_t row = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != kFeatureCount + 1)
      throw data_error(source + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                       " columns, expected " + std::to_string(kFeatureCount + 1));
    std::array<double, kFeatureCount + 1> v{};
    std::size_t bad_col = 0;
    for (std::size_t c = 0; c < cells.size() && bad_col == 0; ++c)
      if (!parse_number(cells[c], v[c])) bad_col = c + 1;
    if (bad_col != 0) {
      if (first_content) {  // header
        first_content = false;
        continue;
      }
      throw data_error(source + ": row " + std::to_string(row) + ", column " + std::to_string(bad_col) +
                       ": cannot parse '" + std::string(cells[bad_col - 1]) + "' as a number");
    }
    first_content = false;
    const double label = v[kFeatureCount];
    if (label != 0.0 && label != 1.0)
      throw data_error(source + ": row " + std::to_string(row) + ": label must be 0 or 1, got " +
                       std::string(cells[kFeatureCount]));
    RawRecord r;
    std::copy_n(v.begin(), kFeatureCount, r.features.begin());
    r.label = static_cast<int>(label);
    records.push_back(r);
  }
  if (records.empty()) throw data_error(source + ": no data rows");
  return records;
}

std::vector<RawRecord> load_pima_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path.string());
  return parse_pima_csv(in, path.string());
}

std::vector<RawRecord> binarize_pregnancies(std::vector<RawRecord> records) {
  for (auto& r : records) r.features[0] = r.features[0] > 0.0 ? 1.0 : 0.0;
  return records;
}

std::size_t Dataset::count_label(int label) const {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), label));
}

Tensor Dataset::label_tensor() const {
  std::vector<double> v(y.begin(), y.end());
  return Tensor({y.size(), 1}, std::move(v));
}

Dataset make_dataset(const std::vector<RawRecord>& records) {
  if (records.empty()) throw data_error("make_dataset: no records");
  Dataset d;
  d.X = Tensor({records.size(), kFeatureCount});
  auto xv = d.X.values();
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::copy(records[i].features.begin(), records[i].features.end(), xv.begin() + i * kFeatureCount);
    d.y.push_back(records[i].label);
  }
  d.synthetic.assign(records.size(), false);
  return d;
}

Dataset subset(const Dataset& d, std::span<const std::size_t> rows) {
  Dataset out;
  if (rows.empty()) return out;
  out.X = take_rows(d.X, rows);
  for (auto r : rows) {
    out.y.push_back(d.y[r]);
    out.synthetic.push_back(d.synthetic[r]);
  }
  return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (b.rows() == 0) return a;
  if (a.rows() == 0) return b;
  Shape sa = a.X.shape(), sb = b.X.shape();
  if (!std::equal(sa.begin() + 1, sa.end(), sb.begin() + 1, sb.end()))
    throw dimension_error("concat: row shapes differ " + shape_to_string(sa) + " vs " + shape_to_string(sb));
  Shape s = sa;
  s[0] = sa[0] + sb[0];
  std::vector<double> v(a.X.values().begin(), a.X.values().end());
  v.insert(v.end(), b.X.values().begin(), b.X.values().end());
  Dataset out;
  out.X = Tensor(std::move(s), std::move(v));
  out.y = a.y;
  out.y.insert(out.y.end(), b.y.begin(), b.y.end());
  out.synthetic = a.synthetic;
  out.synthetic.insert(out.synthetic.end(), b.synthetic.begin(), b.synthetic.end());
  return out;
}

ImputedSplit impute_missing(const Dataset& train, const Dataset& test) {
  if (train.width() != kFeatureCount || (test.rows() > 0 && test.width() != kFeatureCount))
    throw dimension_error("impute_missing: expected " + std::to_string(kFeatureCount) + " feature columns");
  ImputedSplit out{train, test, {}};
  out.train.X = train.X.clone();
  if (test.rows() > 0) out.test.X = test.X.clone();

  auto tv = train.X.values();
  for (auto c : kImputedColumns) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < train.rows(); ++r) {
      const double v = tv[r * kFeatureCount + c];
      if (v != 0.0) {
        sum += v;
        ++n;
      }
    }
    if (n == 0)
      throw data_error("impute_missing: column '" + std::string(kFeatureNames[c]) +
                       "' has no non-zero training values");
    out.means.mean[c] = sum / static_cast<double>(n);
    out.means.applied[c] = true;
  }

  for (Dataset* d : {&out.train, &out.test}) {
    if (d->rows() == 0) continue;
    auto v = d->X.values();
    for (std::size_t r = 0; r < d->rows(); ++r)
      for (auto c : kImputedColumns)
        if (v[r * kFeatureCount + c] == 0.0) v[r * kFeatureCount + c] = out.means.mean[c];
  }
  return out;
}

std::string to_string(NormalizerKind kind) {
  switch (kind) {
  case NormalizerKind::minmax: return "minmax";
  case NormalizerKind::standard: return "standard";
  case NormalizerKind::log: return "log";
  }
  return "unknown";
}

NormalizerKind parse_normalizer_kind(std::string_view text) {
  if (text == "minmax") return NormalizerKind::minmax;
  if (text == "standard") return NormalizerKind::standard;
  if (text == "log") return NormalizerKind::log;
  throw config_error("unknown normalizer '" + std::string(text) + "' (expected minmax, standard or log)");
}

namespace {

void require_matrix(const Tensor& X, const char* op) {
  if (X.rank() != 2) throw dimension_error(std::string(op) + ": expected an N x D matrix, got " + shape_to_string(X.shape()));
}

void require_positive(const Tensor& X) {
  for (double v : X.values())
    if (!(v > 0.0)) throw domain_error("log normalizer: input " + std::to_string(v) + " is not strictly positive");
}

} // namespace

NormalizerParams fit_normalizer(const Tensor& X, NormalizerKind kind) {
  require_matrix(X, "fit_normalizer");
  const std::size_t n = X.dim(0), d = X.dim(1);
  NormalizerParams p;
  p.kind = kind;
  p.fitted_on = n;
  if (kind == NormalizerKind::log) {
    require_positive(X);
    return p;
  }
  if (n < 2) throw argument_error("fit_normalizer: need at least 2 rows, got " + std::to_string(n));
  auto v = X.values();
  p.lo.assign(d, 0.0);
  p.hi.assign(d, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    if (kind == NormalizerKind::minmax) {
      double lo = v[c], hi = v[c];
      for (std::size_t r = 1; r < n; ++r) {
        lo = std::min(lo, v[r * d + c]);
        hi = std::max(hi, v[r * d + c]);
      }
      p.lo[c] = lo;
      p.hi[c] = hi;
    } else {
      double mean = 0.0;
      for (std::size_t r = 0; r < n; ++r) mean += v[r * d + c];
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t r = 0; r < n; ++r) ss += (v[r * d + c] - mean) * (v[r * d + c] - mean);
      p.lo[c] = mean;
      p.hi[c] = std::sqrt(ss / static_cast<double>(n));
    }
  }
  return p;
}

Tensor apply_normalizer(const NormalizerParams& params, const Tensor& X) {
  require_matrix(X, "apply_normalizer");
  const std::size_t n = X.dim(0), d = X.dim(1);
  Tensor out(X.shape());
  auto in = X.values();
  auto o = out.values();
  if (params.kind == NormalizerKind::log) {
    require_positive(X);
    for (std::size_t i = 0; i < in.size(); ++i) o[i] = std::log(in[i]);
    return out;
  }
  if (params.lo.size() != d)
    throw dimension_error("apply_normalizer: fitted on " + std::to_string(params.lo.size()) + " columns, got " +
                          std::to_string(d));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      const double x = in[r * d + c];
      if (params.kind == NormalizerKind::minmax) {
        const double range = params.hi[c] - params.lo[c];
        o[r * d + c] = range > 0.0 ? (x - params.lo[c]) / range : 0.0;
      } else {
        o[r * d + c] = params.hi[c] > 0.0 ? (x - params.lo[c]) / params.hi[c] : 0.0;
      }
    }
  return out;
}

Tensor invert_normalizer(const NormalizerParams& params, const Tensor& X) {
  require_matrix(X, "invert_normalizer");
  const std::size_t n = X.dim(0), d = X.dim(1);
  Tensor out(X.shape());
  auto in = X.values();
  auto o = out.values();
  if (params.kind == NormalizerKind::log) {
    for (std::size_t i = 0; i < in.size(); ++i) o[i] = std::exp(in[i]);
    return out;
  }
  if (params.lo.size() != d) throw dimension_error("invert_normalizer: column count mismatch");
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      const double z = in[r * d + c];
      o[r * d + c] = params.kind == NormalizerKind::minmax ? params.lo[c] + z * (params.hi[c] - params.lo[c])
                                                          : params.lo[c] + z * params.hi[c];
    }
  return out;
}

SplitIndices split_train_test(std::span<const int> labels, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw argument_error("split ratio must be in (0, 1), got " + std::to_string(ratio));
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (int c : {0, 1})
    if (by_class[c].empty()) throw data_error("split_train_test: class " + std::to_string(c) + " has no rows");

  const std::size_t total = labels.size();
  const auto train_total = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(total)));

  std::vector<std::pair<int, std::size_t>> quota;
  std::size_t assigned = 0;
  for (const auto& [label, rows] : by_class) {
    const std::size_t q = train_total * rows.size() / total;
    quota.emplace_back(label, q);
    assigned += q;
  }
  // Leftover rows go to the smaller classes first.
  std::vector<std::size_t> order(quota.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return by_class[quota[a].first].size() < by_class[quota[b].first].size();
  });
  for (std::size_t k = 0; assigned < train_total; k = (k + 1) % order.size()) {
    auto& q = quota[order[k]];
    if (q.second < by_class[q.first].size()) {
      ++q.second;
      ++assigned;
    }
  }

  SplitIndices split;
  split.seed = seed;
  Rng rng(seed);
  for (const auto& [label, count] : quota) {
    Rng class_rng = rng.fork(static_cast<std::uint64_t>(label));
    const auto& rows = by_class[label];
    const auto perm = shuffled_indices(rows.size(), class_rng);
    for (std::size_t i = 0; i < rows.size(); ++i) (i < count ? split.train : split.test).push_back(rows[perm[i]]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

} // namespace tabdl::data
