#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabdl/tensor.hpp"

namespace tabdl::data {

inline constexpr std::size_t kFeatureCount = 8;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "pregnancies", "glucose", "blood_pressure", "skin_thickness", "insulin", "bmi", "diabetes_pedigree", "age"};

// Columns where a literal 0 means "not measured".
inline constexpr std::array<std::size_t, 5> kImputedColumns = {1, 2, 3, 4, 5};

struct RawRecord {
  std::array<double, kFeatureCount> features{};
  int label = 0;
};

/// Nine numeric columns (eight features, then a 0/1 outcome).  A first row
/// that does not parse as numbers is taken as a header.
std::vector<RawRecord> load_pima_csv(const std::filesystem::path& path);
std::vector<RawRecord> parse_pima_csv(std::istream& in, const std::string& source);

/// pregnancies -> 1 if positive else 0.
std::vector<RawRecord> binarize_pregnancies(std::vector<RawRecord> records);

/// Row-major feature matrix with labels and a real/synthetic flag per row.
struct Dataset {
  Tensor X;  // N x D, or N x 20 x 20 x 1 after reshaping
  std::vector<int> y;
  std::vector<bool> synthetic;

  std::size_t rows() const { return y.size(); }
  std::size_t width() const { return rows() ? X.size() / rows() : 0; }
  std::size_t count_label(int label) const;
  /// y as an N x 1 tensor of 0.0 / 1.0.
  Tensor label_tensor() const;
};

Dataset make_dataset(const std::vector<RawRecord>& records);
Dataset subset(const Dataset& d, std::span<const std::size_t> rows);
/// Rows of `a` followed by rows of `b`; trailing shapes must agree.
Dataset concat(const Dataset& a, const Dataset& b);

struct ImputationMeans {
  std::array<double, kFeatureCount> mean{};
  std::array<bool, kFeatureCount> applied{};
};

struct ImputedSplit {
  Dataset train;
  Dataset test;
  ImputationMeans means;
};

/// Replaces zeros in the imputed columns with the mean of the non-zero
/// training entries of that column, in both splits.  Inputs are unchanged.
ImputedSplit impute_missing(const Dataset& train, const Dataset& test);

enum class NormalizerKind { minmax, standard, log };

std::string to_string(NormalizerKind kind);
NormalizerKind parse_normalizer_kind(std::string_view text);

struct NormalizerParams {
  NormalizerKind kind = NormalizerKind::minmax;
  std::vector<double> lo;  // minmax: min, standard: mean
  std::vector<double> hi;  // minmax: max, standard: population stddev
  std::size_t fitted_on = 0;
};

/// Per-column statistics of an N x D matrix.
NormalizerParams fit_normalizer(const Tensor& X, NormalizerKind kind);
/// Constant columns (max == min, or sigma == 0) map to 0.
Tensor apply_normalizer(const NormalizerParams& params, const Tensor& X);
Tensor invert_normalizer(const NormalizerParams& params, const Tensor& X);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

/// Stratified split.  The training set gets floor(ratio * N) rows; each
/// class receives the floor of its proportional share and the leftover
/// rows go to the classes in increasing order of size.  Which rows of a
/// class land in training is a seeded shuffle.  Both lists come back
/// sorted.
SplitIndices split_train_test(std::span<const int> labels, double ratio, std::uint64_t seed);

} // namespace tabdl::data
