#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "forge/metrics.hpp"
#include "forge/rng.hpp"

using namespace forge;

namespace {

// Brute force over every positive x negative pair; ties count one half.
double pair_counting_auc(std::span<const float> scores, std::span<const std::uint8_t> labels) {
    double wins = 0.0;
    std::uint64_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            ++pairs;
            if (scores[i] > scores[j]) {
                wins += 1.0;
            } else if (scores[i] == scores[j]) {
                wins += 0.5;
            }
        }
    }
    return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("confusion matrix: hand case and the >= boundary rule") {
    const std::vector<float> scores = {0.9f, 0.4f, 0.6f, 0.1f};
    const std::vector<std::uint8_t> labels = {1, 1, 0, 0};
    ConfusionMatrix c = confusion_at_threshold(scores, labels, 0.5);
    CHECK(c.tp == 1);
    CHECK(c.fn == 1);
    CHECK(c.fp == 1);
    CHECK(c.tn == 1);

    // all scores exactly at the threshold are predicted positive
    const std::vector<float> flat = {0.5f, 0.5f, 0.5f};
    const std::vector<std::uint8_t> y = {1, 0, 1};
    ConfusionMatrix b = confusion_at_threshold(flat, y, 0.5);
    CHECK(b.tp == 2);
    CHECK(b.fp == 1);
    CHECK(b.tn == 0);
    CHECK(b.fn == 0);

    const std::vector<float> perfect = {0.9f, 0.1f};
    const std::vector<std::uint8_t> py = {1, 0};
    ConfusionMatrix p = confusion_at_threshold(perfect, py, 0.5);
    CHECK(p.fp == 0);
    CHECK(p.fn == 0);

    CHECK_THROWS_AS(confusion_at_threshold(scores, py, 0.5), LengthMismatch);
}

TEST_CASE("precision, recall, f1, accuracy: hand values and degenerate zeros") {
    ConfusionMatrix c{3, 1, 0, 2};  // tp=3 fp=1 tn=0 fn=2
    CHECK(precision(c) == doctest::Approx(0.75));
    CHECK(recall(c) == doctest::Approx(0.6));
    CHECK(f1(c) == doctest::Approx(2.0 * 0.75 * 0.6 / 1.35));
    CHECK(f1_from(0.75, 0.6) == doctest::Approx(0.6667).epsilon(1e-3));

    ConfusionMatrix none{0, 0, 5, 0};  // nothing predicted positive, no positives exist
    CHECK(precision(none) == 0.0);
    CHECK(recall(none) == 0.0);
    CHECK(f1(none) == 0.0);
    CHECK(accuracy(none) == 1.0);

    ConfusionMatrix all_right{2, 0, 3, 0};
    CHECK(precision(all_right) == 1.0);
    CHECK(recall(all_right) == 1.0);
    CHECK(f1(all_right) == 1.0);
    CHECK(accuracy(all_right) == 1.0);

    // hand case above: (1+1)/4
    const std::vector<float> scores = {0.9f, 0.4f, 0.6f, 0.1f};
    const std::vector<std::uint8_t> labels = {1, 1, 0, 0};
    CHECK(accuracy(confusion_at_threshold(scores, labels, 0.5)) == 0.5);
}

TEST_CASE("accuracy is misleading under imbalance: predict-all-negative scores 0.999") {
    std::vector<float> scores(1000, 0.0f);
    std::vector<std::uint8_t> labels(1000, 0);
    labels[0] = 1;  // one fraud among 999 legitimate rows
    CHECK(accuracy(confusion_at_threshold(scores, labels, 0.5)) == doctest::Approx(0.999));
}

TEST_CASE("roc_auc: fixed example equals 0.75") {
    const std::vector<float> scores = {0.1f, 0.4f, 0.35f, 0.8f};
    const std::vector<std::uint8_t> labels = {0, 0, 1, 1};
    CHECK(roc_auc(scores, labels) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(pair_counting_auc(scores, labels) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("roc_auc: all-equal scores give 0.5; perfect separation gives 1.0") {
    const std::vector<float> flat(6, 0.7f);
    const std::vector<std::uint8_t> labels = {0, 1, 0, 1, 0, 1};
    CHECK(roc_auc(flat, labels) == doctest::Approx(0.5).epsilon(1e-12));

    const std::vector<float> sep = {0.1f, 0.2f, 0.8f, 0.9f};
    const std::vector<std::uint8_t> y = {0, 0, 1, 1};
    CHECK(roc_auc(sep, y) == 1.0);

    const std::vector<std::uint8_t> ones = {1, 1, 1, 1};
    CHECK_THROWS_AS(roc_auc(sep, ones), SingleClass);
}

TEST_CASE("roc_auc equals exhaustive pair counting on 1000 random instances") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.index(199);
        std::vector<float> scores(n);
        std::vector<std::uint8_t> labels(n);
        // quantized scores force plenty of ties
        const int levels = 1 + static_cast<int>(rng.index(12));
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = static_cast<float>(rng.index(static_cast<std::size_t>(levels))) /
                        static_cast<float>(levels);
            labels[i] = static_cast<std::uint8_t>(rng.uniform() < 0.4 ? 1 : 0);
        }
        labels[0] = 0;  // both classes always present
        labels[n - 1] = 1;
        CHECK(std::abs(roc_auc(scores, labels) - pair_counting_auc(scores, labels)) < 1e-12);
    }
}

TEST_CASE("roc_auc: label-flip symmetry for tie-free scores") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 10 + rng.index(40);
        std::vector<float> scores(n);
        std::vector<std::uint8_t> labels(n), flipped(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = static_cast<float>(rng.uniform());  // ties almost surely absent
            labels[i] = static_cast<std::uint8_t>(rng.uniform() < 0.5 ? 1 : 0);
        }
        labels[0] = 0;
        labels[1] = 1;
        for (std::size_t i = 0; i < n; ++i) flipped[i] = 1 - labels[i];
        CHECK(roc_auc(scores, labels) + roc_auc(scores, flipped) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("roc_auc: invariant under strictly increasing transforms") {
    Rng rng(13);
    const std::size_t n = 60;
    std::vector<float> scores(n);
    std::vector<std::uint8_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = static_cast<float>(rng.uniform(-3.0, 3.0));
        labels[i] = static_cast<std::uint8_t>(rng.uniform() < 0.3 ? 1 : 0);
    }
    labels[0] = 0;
    labels[1] = 1;
    const double base = roc_auc(scores, labels);

    std::vector<float> logistic(n), cubic(n);
    for (std::size_t i = 0; i < n; ++i) {
        logistic[i] = 1.0f / (1.0f + std::exp(-scores[i]));
        cubic[i] = scores[i] * scores[i] * scores[i] + 2.0f * scores[i];
    }
    CHECK(roc_auc(logistic, labels) == doctest::Approx(base).epsilon(1e-12));
    CHECK(roc_auc(cubic, labels) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("metrics stay in [0,1] on random confusion data") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        ConfusionMatrix c{rng.below(50), rng.below(50), rng.below(50), rng.below(50)};
        for (double v : {precision(c), recall(c), f1(c), accuracy(c)}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("report: composes the metrics and stays self-consistent") {
    const std::vector<float> scores = {0.9f, 0.4f, 0.6f, 0.1f};
    const std::vector<std::uint8_t> labels = {1, 1, 0, 0};
    MetricsReport r = report("smote", "lr", 42, scores, labels, 0.5);
    CHECK(r.method == "smote");
    CHECK(r.classifier == "lr");
    CHECK(r.seed == 42);
    CHECK(r.accuracy == 0.5);
    CHECK(r.precision == 0.5);
    CHECK(r.recall == 0.5);
    CHECK(r.f1 == doctest::Approx(f1_from(r.precision, r.recall)).epsilon(1e-9));
    CHECK(r.auc == doctest::Approx(pair_counting_auc(scores, labels)).epsilon(1e-12));
    CHECK(r.confusion.total() == 4);
    CHECK(r.degenerate.empty());

    MetricsReport r2 = report("smote", "lr", 42, scores, labels, 0.5);
    CHECK(r.f1 == r2.f1);
    CHECK(r.auc == r2.auc);

    // degenerate flags appear when nothing is predicted positive
    const std::vector<float> low = {0.1f, 0.2f, 0.3f, 0.4f};
    MetricsReport r3 = report("original", "svm", 1, low, labels, 0.5);
    CHECK(r3.precision == 0.0);
    CHECK(std::find(r3.degenerate.begin(), r3.degenerate.end(), "precision") !=
          r3.degenerate.end());
}

TEST_CASE("reference precision/recall pairs match their F1 values within rounding") {
    // transformer-GAN column of the reference comparison grid
    CHECK(std::abs(f1_from(0.98, 0.97) - 0.97) < 0.02);   // lr
    CHECK(std::abs(f1_from(1.00, 0.98) - 0.99) < 0.02);   // rf
    CHECK(std::abs(f1_from(1.00, 0.98) - 0.99) < 0.02);   // gbt
    CHECK(std::abs(f1_from(1.00, 0.97) - 0.99) < 0.02);   // svm
}

}  // TEST_SUITE
