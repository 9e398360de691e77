#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "forge/classifiers.hpp"
#include "forge/metrics.hpp"
#include "forge/oversample.hpp"

namespace forge {

// Orchestration of the full benchmark: preprocess -> oversample -> train/eval
// grid over {method} x {classifier} x {seed}, with artifacts on disk at every
// stage so any cell can be rerun or inspected in isolation.

struct FixtureSpec {
    std::size_t n_negative = 10000;
    std::size_t n_positive = 50;
    std::size_t n_features = 8;
    double separation = 2.0;
    std::uint64_t seed = 7;
};

struct DatasetSpec {
    std::string csv;                     // path; empty when fixture is set
    std::string schema = "creditcard";   // creditcard | generic
    std::optional<FixtureSpec> fixture;  // generated instead of loaded
};

struct LrTrainParams {
    int epochs = 400;
    float lr = 0.1f;
};

struct SvmTrainParams {
    float c = 1.0f;
    int epochs = 500;
    float lr = 1e-4f;
};

struct ExperimentConfig {
    DatasetSpec dataset;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    double train_fraction = 0.8;
    std::string normalize = "amount_time";  // amount_time | all | none
    std::vector<std::string> methods = {"original", "smote", "gan_transformer", "tvae"};
    std::vector<std::string> classifiers = {"lr", "rf", "gbt", "svm"};
    std::size_t n_synthetic = 5000;
    double threshold = 0.5;
    std::string out_dir = "out";
    std::string external_csv;  // externally generated synthetic rows (CTGAN slot)

    int smote_k = 5;
    GanConfig gan;
    TvaeConfig tvae;
    LrTrainParams lr;
    RfParams rf;
    GbtParams gbt;
    SvmTrainParams svm;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

std::string seed_dir(const ExperimentConfig& config, std::uint64_t seed);
std::string method_dir(const ExperimentConfig& config, std::uint64_t seed,
                       const std::string& method);

/// Loads (or generates) the dataset, deduplicates, splits stratified per the
/// run seed, fits min-max on the training rows only, and writes train.csv,
/// test.csv, scaler.json and counts.json under <out>/s<seed>/.
void cmd_preprocess(const ExperimentConfig& config, std::uint64_t seed);

/// Trains/derives the requested synthesizer on the training minority and
/// writes synthetic.csv (plus trace.csv and a checkpoint for the neural
/// methods) under <out>/s<seed>/<method>/.
void cmd_oversample(const ExperimentConfig& config, const std::string& method,
                    std::uint64_t seed);

/// Trains one classifier on the (optionally augmented) training split, scores
/// the untouched real test split, and writes <classifier>.report.json.
MetricsReport cmd_train_eval(const ExperimentConfig& config, const std::string& method,
                             const std::string& classifier, std::uint64_t seed);

struct GridFailure {
    std::string cell;  // "seed/method/classifier" or "seed/method"
    std::string error;
};

struct GridResult {
    std::vector<MetricsReport> reports;
    std::vector<GridFailure> failures;
};

/// Runs the whole grid with up to n_threads workers (jobs are independent and
/// seeded per cell, so scheduling cannot change any result), then writes the
/// per-metric matrix tables, plot data, summary.md and grid.json.
GridResult cmd_compare(const ExperimentConfig& config, std::size_t n_threads = 1);

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

/// Worker count from FORGE_THREADS, defaulting to min(hardware, 4).
std::size_t threads_from_env();

}  // namespace forge
