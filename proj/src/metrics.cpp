#include "forge/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace forge {

ConfusionMatrix confusion_at_threshold(std::span<const float> scores,
                                       std::span<const std::uint8_t> labels, double threshold) {
    if (scores.size() != labels.size()) {
        throw LengthMismatch(std::to_string(scores.size()) + " scores vs " +
                             std::to_string(labels.size()) + " labels");
    }
    ConfusionMatrix c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = static_cast<double>(scores[i]) >= threshold;
        if (labels[i]) {
            (predicted ? c.tp : c.fn)++;
        } else {
            (predicted ? c.fp : c.tn)++;
        }
    }
    return c;
}

double precision(const ConfusionMatrix& c) {
    const std::uint64_t denom = c.tp + c.fp;
    return denom == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(denom);
}

double recall(const ConfusionMatrix& c) {
    const std::uint64_t denom = c.tp + c.fn;
    return denom == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(denom);
}

double f1_from(double precision_value, double recall_value) {
    const double denom = precision_value + recall_value;
    return denom == 0.0 ? 0.0 : 2.0 * precision_value * recall_value / denom;
}

double f1(const ConfusionMatrix& c) { return f1_from(precision(c), recall(c)); }

double accuracy(const ConfusionMatrix& c) {
    const std::uint64_t total = c.total();
    return total == 0 ? 0.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
}

double roc_auc(std::span<const float> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) {
        throw LengthMismatch(std::to_string(scores.size()) + " scores vs " +
                             std::to_string(labels.size()) + " labels");
    }
    std::uint64_t n_pos = 0;
    for (std::uint8_t l : labels) n_pos += l;
    const std::uint64_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw SingleClass("roc_auc needs both classes, got " + std::to_string(n_pos) +
                          " positives / " + std::to_string(n_neg) + " negatives");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // wins = positive strictly above a negative; ties counted once per pair
    std::uint64_t wins = 0, ties = 0, neg_below = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        std::uint64_t pos_here = 0, neg_here = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] ? pos_here : neg_here)++;
            ++j;
        }
        wins += pos_here * neg_below;
        ties += pos_here * neg_here;
        neg_below += neg_here;
        i = j;
    }
    const double pairs = static_cast<double>(n_pos) * static_cast<double>(n_neg);
    return (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) / pairs;
}

MetricsReport report(const std::string& method, const std::string& classifier, std::uint64_t seed,
                     std::span<const float> scores, std::span<const std::uint8_t> labels,
                     double threshold) {
    MetricsReport r;
    r.method = method;
    r.classifier = classifier;
    r.seed = seed;
    r.threshold = threshold;
    r.confusion = confusion_at_threshold(scores, labels, threshold);
    r.accuracy = accuracy(r.confusion);
    r.precision = precision(r.confusion);
    r.recall = recall(r.confusion);
    r.f1 = f1_from(r.precision, r.recall);
    r.auc = roc_auc(scores, labels);
    if (r.confusion.tp + r.confusion.fp == 0) r.degenerate.push_back("precision");
    if (r.confusion.tp + r.confusion.fn == 0) r.degenerate.push_back("recall");
    if (r.precision + r.recall == 0.0) r.degenerate.push_back("f1");
    return r;
}

}  // namespace forge
