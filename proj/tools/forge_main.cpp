#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "forge/data.hpp"
#include "forge/experiment.hpp"

namespace {

// exit codes: 0 ok, 1 partial grid failure, 2 usage or IO error

forge::ExperimentConfig configure(const std::string& config_path, long long seed_override,
                                  const std::string& out_override) {
    forge::ExperimentConfig config = forge::load_config(config_path);
    if (seed_override >= 0) config.seeds = {static_cast<std::uint64_t>(seed_override)};
    if (!out_override.empty()) config.out_dir = out_override;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"forge: imbalanced fraud-detection oversampling benchmark"};
    app.require_subcommand(1);

    std::string config_path;
    long long seed_override = -1;
    std::string out_override;

    auto add_common = [&](CLI::App* cmd, bool with_seed = true) {
        cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
        if (with_seed) cmd->add_option("--seed", seed_override, "run a single seed");
        cmd->add_option("--out", out_override, "output directory override");
    };

    CLI::App* preprocess = app.add_subcommand("preprocess", "clean, normalize and split");
    add_common(preprocess);

    CLI::App* oversample = app.add_subcommand("oversample", "generate synthetic minority rows");
    add_common(oversample);
    std::string method;
    oversample->add_option("--method", method, "smote | gan_transformer | tvae | external")
        ->required();

    CLI::App* train_eval = app.add_subcommand("train-eval", "train one classifier and score it");
    add_common(train_eval);
    std::string te_method = "original";
    std::string te_classifier;
    train_eval->add_option("--method", te_method, "oversampling method (default original)");
    train_eval->add_option("--classifier", te_classifier, "lr | rf | gbt | svm")->required();

    CLI::App* compare = app.add_subcommand("compare", "run the full method x classifier grid");
    add_common(compare, /*with_seed=*/false);

    CLI::App* fixture = app.add_subcommand("fixture", "write a generated two-Gaussian dataset");
    std::string fixture_out = "fixture.csv";
    std::size_t fx_neg = 10000, fx_pos = 50, fx_features = 8;
    double fx_separation = 2.0;
    std::uint64_t fx_seed = 7;
    fixture->add_option("--out", fixture_out, "output CSV path");
    fixture->add_option("--negatives", fx_neg, "negative rows");
    fixture->add_option("--positives", fx_pos, "positive rows");
    fixture->add_option("--features", fx_features, "feature count");
    fixture->add_option("--separation", fx_separation, "class mean distance in sigmas");
    fixture->add_option("--seed", fx_seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (fixture->parsed()) {
            forge::Dataset d =
                forge::generate_two_gaussian(fx_neg, fx_pos, fx_features, fx_separation, fx_seed);
            forge::write_dataset_csv(d, fixture_out);
            std::printf("wrote %zu rows (%zu positive) to %s\n", d.rows(),
                        forge::class_counts(d).second, fixture_out.c_str());
            return 0;
        }

        forge::ExperimentConfig config = configure(config_path, seed_override, out_override);

        if (preprocess->parsed()) {
            for (std::uint64_t seed : config.seeds) {
                forge::cmd_preprocess(config, seed);
                std::printf("preprocess seed %llu -> %s\n",
                            static_cast<unsigned long long>(seed),
                            forge::seed_dir(config, seed).c_str());
            }
            return 0;
        }
        if (oversample->parsed()) {
            for (std::uint64_t seed : config.seeds) {
                forge::cmd_oversample(config, method, seed);
                std::printf("oversample %s seed %llu -> %s\n", method.c_str(),
                            static_cast<unsigned long long>(seed),
                            forge::method_dir(config, seed, method).c_str());
            }
            return 0;
        }
        if (train_eval->parsed()) {
            for (std::uint64_t seed : config.seeds) {
                const forge::MetricsReport r =
                    forge::cmd_train_eval(config, te_method, te_classifier, seed);
                std::printf(
                    "%s + %s seed %llu: precision %.4f recall %.4f f1 %.4f auc %.4f\n",
                    te_method.c_str(), te_classifier.c_str(),
                    static_cast<unsigned long long>(seed), r.precision, r.recall, r.f1, r.auc);
            }
            return 0;
        }
        if (compare->parsed()) {
            const forge::GridResult grid =
                forge::cmd_compare(config, forge::threads_from_env());
            std::printf("grid: %zu reports, %zu failures -> %s\n", grid.reports.size(),
                        grid.failures.size(), config.out_dir.c_str());
            for (const forge::GridFailure& f : grid.failures) {
                std::fprintf(stderr, "failed cell %s: %s\n", f.cell.c_str(), f.error.c_str());
            }
            return grid.failures.empty() ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
