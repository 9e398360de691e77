#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "forge/errors.hpp"

namespace forge {

struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
};

/// Predicted positive iff score >= threshold.
ConfusionMatrix confusion_at_threshold(std::span<const float> scores,
                                       std::span<const std::uint8_t> labels, double threshold = 0.5);

// Each rate returns 0.0 (not NaN) when its denominator is zero.
double precision(const ConfusionMatrix& c);
double recall(const ConfusionMatrix& c);
double f1(const ConfusionMatrix& c);
double f1_from(double precision_value, double recall_value);
double accuracy(const ConfusionMatrix& c);

/// Rank-based (Mann-Whitney) AUC with average ranks for ties: the probability
/// a random positive outscores a random negative, ties counted one half.
/// Computed by exact integer pair counting.
double roc_auc(std::span<const float> scores, std::span<const std::uint8_t> labels);

struct MetricsReport {
    std::string method;
    std::string classifier;
    std::uint64_t seed = 0;
    double threshold = 0.5;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc = 0.0;
    ConfusionMatrix confusion;
    std::vector<std::string> degenerate;  // metrics that hit a 0/0 case
};

MetricsReport report(const std::string& method, const std::string& classifier, std::uint64_t seed,
                     std::span<const float> scores, std::span<const std::uint8_t> labels,
                     double threshold = 0.5);

}  // namespace forge
