#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "forge/errors.hpp"

namespace forge {

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;  // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), data(r * c, fill) {}

    float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

/// One table flowing through the pipeline: features, binary labels, and a
/// per-row provenance flag distinguishing real rows from synthetic ones.
struct Dataset {
    std::vector<std::string> feature_names;
    Matrix features;
    std::vector<std::uint8_t> labels;          // 0/1
    std::vector<std::uint8_t> synthetic_mask;  // 1 = synthetic

    std::size_t rows() const { return features.rows; }
    std::size_t width() const { return features.cols; }
};

struct ScalerParams {
    struct Entry {
        std::size_t column;
        float min;
        float max;
    };
    std::vector<Entry> entries;
};

struct SplitIndices {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    std::uint64_t seed = 0;
};

/// Number of columns in the credit-card schema (Time, V1..V28, Amount).
constexpr std::size_t kCreditcardWidth = 30;

std::vector<std::string> creditcard_feature_names();

/// Strict loader for the credit-card schema: header must be exactly
/// Time,V1..V28,Amount,Class in that order.
Dataset load_csv(const std::string& path);

/// Generic loader: any feature columns followed by Class and an optional
/// trailing `synthetic` column.
Dataset read_dataset_csv(const std::string& path);

void write_dataset_csv(const Dataset& d, const std::string& path, bool include_synthetic = false);

/// Shortest decimal form that parses back to the identical float.
std::string format_float(float v);

/// Removes rows identical on every feature and the label, keeping the first
/// occurrence; row order otherwise preserved.
Dataset deduplicate(const Dataset& d);

/// Per-column min/max over the given columns. Fit on the training split only.
ScalerParams minmax_fit(const Dataset& d, const std::vector<std::size_t>& columns);

/// x' = (x - min) / (max - min); a degenerate column (min == max) maps to 0;
/// out-of-range values extrapolate without clipping.
Dataset minmax_transform(const Dataset& d, const ScalerParams& params);

/// Per-class shuffle, then the test side receives floor((1-f)·n_class) rows,
/// so an 80:20 split of 492 positives puts 98 in test. Index lists are sorted.
SplitIndices stratified_split(const Dataset& d, double train_fraction, std::uint64_t seed);

/// (negatives, positives)
std::pair<std::size_t, std::size_t> class_counts(const Dataset& d);

Dataset select_rows(const Dataset& d, const std::vector<std::size_t>& indices);

/// Feature rows of the positive class.
Matrix minority_rows(const Dataset& d);

/// Two spherical Gaussians: negatives at the origin, positives shifted by
/// `separation`/sqrt(d) in every coordinate so the class means are
/// `separation` standard deviations apart. Negatives come first.
Dataset generate_two_gaussian(std::size_t n_negative, std::size_t n_positive,
                              std::size_t n_features, double separation, std::uint64_t seed);

}  // namespace forge
