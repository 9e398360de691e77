#include "forge/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "forge/checkpoint.hpp"
#include "forge/data.hpp"

namespace forge {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

// ---- config ----------------------------------------------------------------------

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    if (j.contains("dataset")) {
        const json& d = j["dataset"];
        c.dataset.csv = d.value("csv", std::string());
        c.dataset.schema = d.value("schema", std::string("creditcard"));
        if (d.contains("fixture")) {
            const json& f = d["fixture"];
            FixtureSpec fx;
            fx.n_negative = f.value("n_negative", fx.n_negative);
            fx.n_positive = f.value("n_positive", fx.n_positive);
            fx.n_features = f.value("n_features", fx.n_features);
            fx.separation = f.value("separation", fx.separation);
            fx.seed = f.value("seed", fx.seed);
            c.dataset.fixture = fx;
            c.dataset.schema = "generic";
        }
    }
    c.seeds = j.value("seeds", c.seeds);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.normalize = j.value("normalize", c.normalize);
    c.methods = j.value("methods", c.methods);
    c.classifiers = j.value("classifiers", c.classifiers);
    c.n_synthetic = j.value("n_synthetic", c.n_synthetic);
    c.threshold = j.value("threshold", c.threshold);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.external_csv = j.value("external_csv", c.external_csv);

    if (j.contains("smote")) c.smote_k = j["smote"].value("k_neighbors", c.smote_k);
    if (j.contains("gan")) {
        const json& g = j["gan"];
        c.gan.latent_dim = g.value("latent_dim", c.gan.latent_dim);
        c.gan.model_dim = g.value("model_dim", c.gan.model_dim);
        c.gan.num_heads = g.value("num_heads", c.gan.num_heads);
        c.gan.num_blocks = g.value("num_blocks", c.gan.num_blocks);
        c.gan.ffn_hidden = g.value("ffn_hidden", c.gan.ffn_hidden);
        c.gan.se_reduction = g.value("se_reduction", c.gan.se_reduction);
        c.gan.disc_hidden1 = g.value("disc_hidden1", c.gan.disc_hidden1);
        c.gan.disc_hidden2 = g.value("disc_hidden2", c.gan.disc_hidden2);
        c.gan.recon_hidden = g.value("recon_hidden", c.gan.recon_hidden);
        c.gan.epochs = g.value("epochs", c.gan.epochs);
        c.gan.batch_size = g.value("batch_size", c.gan.batch_size);
        c.gan.lr = g.value("lr", c.gan.lr);
        c.gan.lambda_rec = g.value("lambda_rec", c.gan.lambda_rec);
        c.gan.sigmoid_output = g.value("sigmoid_output", c.gan.sigmoid_output);
    }
    if (j.contains("tvae")) {
        const json& t = j["tvae"];
        c.tvae.latent_dim = t.value("latent_dim", c.tvae.latent_dim);
        c.tvae.hidden = t.value("hidden", c.tvae.hidden);
        c.tvae.epochs = t.value("epochs", c.tvae.epochs);
        c.tvae.batch_size = t.value("batch_size", c.tvae.batch_size);
        c.tvae.lr = t.value("lr", c.tvae.lr);
        c.tvae.beta = t.value("beta", c.tvae.beta);
    }
    if (j.contains("lr")) {
        c.lr.epochs = j["lr"].value("epochs", c.lr.epochs);
        c.lr.lr = j["lr"].value("lr", c.lr.lr);
    }
    if (j.contains("rf")) {
        const json& r = j["rf"];
        c.rf.n_trees = r.value("n_trees", c.rf.n_trees);
        c.rf.max_depth = r.value("max_depth", c.rf.max_depth);
        c.rf.min_samples_leaf = r.value("min_samples_leaf", c.rf.min_samples_leaf);
        c.rf.features_per_split = r.value("features_per_split", c.rf.features_per_split);
        c.rf.bootstrap = r.value("bootstrap", c.rf.bootstrap);
    }
    if (j.contains("gbt")) {
        const json& g = j["gbt"];
        c.gbt.n_rounds = g.value("n_rounds", c.gbt.n_rounds);
        c.gbt.eta = g.value("eta", c.gbt.eta);
        c.gbt.max_depth = g.value("max_depth", c.gbt.max_depth);
        c.gbt.lambda_l2 = g.value("lambda_l2", c.gbt.lambda_l2);
    }
    if (j.contains("svm")) {
        const json& s = j["svm"];
        c.svm.c = s.value("c", c.svm.c);
        c.svm.epochs = s.value("epochs", c.svm.epochs);
        c.svm.lr = s.value("lr", c.svm.lr);
    }

    if (c.seeds.empty()) throw SchemaMismatch("config: seeds must be non-empty");
    if (c.methods.empty() || c.classifiers.empty()) {
        throw SchemaMismatch("config: methods and classifiers must be non-empty");
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw SchemaMismatch(path + ": " + e.what());
    }
    return config_from_json(j);
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["dataset"]["csv"] = c.dataset.csv;
    j["dataset"]["schema"] = c.dataset.schema;
    if (c.dataset.fixture) {
        const FixtureSpec& f = *c.dataset.fixture;
        j["dataset"]["fixture"] = {{"n_negative", f.n_negative},
                                   {"n_positive", f.n_positive},
                                   {"n_features", f.n_features},
                                   {"separation", f.separation},
                                   {"seed", f.seed}};
    }
    j["seeds"] = c.seeds;
    j["train_fraction"] = c.train_fraction;
    j["normalize"] = c.normalize;
    j["methods"] = c.methods;
    j["classifiers"] = c.classifiers;
    j["n_synthetic"] = c.n_synthetic;
    j["threshold"] = c.threshold;
    j["out_dir"] = c.out_dir;
    j["external_csv"] = c.external_csv;
    j["smote"] = {{"k_neighbors", c.smote_k}};
    j["gan"] = {{"latent_dim", c.gan.latent_dim},   {"model_dim", c.gan.model_dim},
                {"num_heads", c.gan.num_heads},     {"num_blocks", c.gan.num_blocks},
                {"ffn_hidden", c.gan.ffn_hidden},   {"se_reduction", c.gan.se_reduction},
                {"disc_hidden1", c.gan.disc_hidden1}, {"disc_hidden2", c.gan.disc_hidden2},
                {"recon_hidden", c.gan.recon_hidden}, {"epochs", c.gan.epochs},
                {"batch_size", c.gan.batch_size},   {"lr", c.gan.lr},
                {"lambda_rec", c.gan.lambda_rec},   {"sigmoid_output", c.gan.sigmoid_output}};
    j["tvae"] = {{"latent_dim", c.tvae.latent_dim}, {"hidden", c.tvae.hidden},
                 {"epochs", c.tvae.epochs},         {"batch_size", c.tvae.batch_size},
                 {"lr", c.tvae.lr},                 {"beta", c.tvae.beta}};
    j["lr"] = {{"epochs", c.lr.epochs}, {"lr", c.lr.lr}};
    j["rf"] = {{"n_trees", c.rf.n_trees},
               {"max_depth", c.rf.max_depth},
               {"min_samples_leaf", c.rf.min_samples_leaf},
               {"features_per_split", c.rf.features_per_split},
               {"bootstrap", c.rf.bootstrap}};
    j["gbt"] = {{"n_rounds", c.gbt.n_rounds},
                {"eta", c.gbt.eta},
                {"max_depth", c.gbt.max_depth},
                {"lambda_l2", c.gbt.lambda_l2}};
    j["svm"] = {{"c", c.svm.c}, {"epochs", c.svm.epochs}, {"lr", c.svm.lr}};
    return j;
}

std::string seed_dir(const ExperimentConfig& config, std::uint64_t seed) {
    return config.out_dir + "/s" + std::to_string(seed);
}

std::string method_dir(const ExperimentConfig& config, std::uint64_t seed,
                       const std::string& method) {
    return seed_dir(config, seed) + "/" + method;
}

// ---- preprocess -------------------------------------------------------------------

namespace {

Dataset load_input_dataset(const ExperimentConfig& config) {
    if (config.dataset.fixture) {
        const FixtureSpec& f = *config.dataset.fixture;
        return generate_two_gaussian(f.n_negative, f.n_positive, f.n_features, f.separation,
                                     f.seed);
    }
    if (config.dataset.csv.empty()) {
        throw SchemaMismatch("config: dataset needs either a csv path or a fixture");
    }
    if (config.dataset.schema == "creditcard") return load_csv(config.dataset.csv);
    if (config.dataset.schema == "generic") return read_dataset_csv(config.dataset.csv);
    throw SchemaMismatch("config: unknown dataset schema '" + config.dataset.schema + "'");
}

std::vector<std::size_t> normalize_columns(const ExperimentConfig& config, const Dataset& d) {
    std::vector<std::size_t> columns;
    if (config.normalize == "none") return columns;
    if (config.normalize == "all") {
        for (std::size_t c = 0; c < d.width(); ++c) columns.push_back(c);
        return columns;
    }
    if (config.normalize == "amount_time") {
        for (std::size_t c = 0; c < d.width(); ++c) {
            if (d.feature_names[c] == "Time" || d.feature_names[c] == "Amount") {
                columns.push_back(c);
            }
        }
        return columns;
    }
    throw SchemaMismatch("config: unknown normalize mode '" + config.normalize + "'");
}

json scaler_to_json(const ScalerParams& scaler, const Dataset& d) {
    json entries = json::array();
    for (const auto& e : scaler.entries) {
        entries.push_back({{"column", e.column},
                           {"name", d.feature_names[e.column]},
                           {"min", e.min},
                           {"max", e.max}});
    }
    return json{{"columns", entries}};
}

ScalerParams scaler_from_json(const json& j) {
    ScalerParams scaler;
    for (const json& e : j.at("columns")) {
        scaler.entries.push_back(
            {e.at("column").get<std::size_t>(), e.at("min").get<float>(), e.at("max").get<float>()});
    }
    return scaler;
}

std::uint64_t row_hash(std::span<const float> row) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (float v : row) {
        if (v == 0.0f) v = 0.0f;
        std::uint32_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        h ^= bits;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

void cmd_preprocess(const ExperimentConfig& config, std::uint64_t seed) {
    const Dataset raw = load_input_dataset(config);
    const auto [raw_neg, raw_pos] = class_counts(raw);

    const Dataset clean = deduplicate(raw);
    const auto [clean_neg, clean_pos] = class_counts(clean);

    const std::uint64_t split_seed = mix_seed(seed, "split");
    const SplitIndices split = stratified_split(clean, config.train_fraction, split_seed);
    Dataset train = select_rows(clean, split.train_idx);
    Dataset test = select_rows(clean, split.test_idx);

    const ScalerParams scaler = minmax_fit(train, normalize_columns(config, train));
    train = minmax_transform(train, scaler);
    test = minmax_transform(test, scaler);

    const std::string dir = seed_dir(config, seed);
    fs::create_directories(dir);
    write_dataset_csv(train, dir + "/train.csv");
    write_dataset_csv(test, dir + "/test.csv");
    write_text(dir + "/scaler.json", scaler_to_json(scaler, train).dump(2) + "\n");

    const auto [train_neg, train_pos] = class_counts(train);
    const auto [test_neg, test_pos] = class_counts(test);
    json counts = {{"raw_rows", raw.rows()},
                   {"raw_negative", raw_neg},
                   {"raw_positive", raw_pos},
                   {"duplicates_removed", raw.rows() - clean.rows()},
                   {"clean_negative", clean_neg},
                   {"clean_positive", clean_pos},
                   {"train_negative", train_neg},
                   {"train_positive", train_pos},
                   {"test_negative", test_neg},
                   {"test_positive", test_pos},
                   {"seed", seed},
                   {"split_seed", split_seed}};
    write_text(dir + "/counts.json", counts.dump(2) + "\n");
}

// ---- oversample ---------------------------------------------------------------------

namespace {

void write_trace_csv(const TrainTrace& trace, const std::string& path) {
    std::string out = "epoch";
    for (const std::string& c : trace.columns) out += "," + c;
    out += '\n';
    for (std::size_t e = 0; e < trace.epochs.size(); ++e) {
        out += std::to_string(e + 1);
        for (double v : trace.epochs[e]) {
            char buf[48];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out += ',';
            out += buf;
        }
        out += '\n';
    }
    write_text(path, out);
}

void write_synthetic_csv(const ExperimentConfig& config, std::uint64_t seed,
                         const std::string& method, const Dataset& train, const Matrix& rows) {
    Dataset synth;
    synth.feature_names = train.feature_names;
    synth.features = rows;
    synth.labels.assign(rows.rows, 1);
    synth.synthetic_mask.assign(rows.rows, 1);
    const std::string dir = method_dir(config, seed, method);
    fs::create_directories(dir);
    write_dataset_csv(synth, dir + "/synthetic.csv", /*include_synthetic=*/true);
}

}  // namespace

void cmd_oversample(const ExperimentConfig& config, const std::string& method,
                    std::uint64_t seed) {
    const std::string dir = seed_dir(config, seed);
    const Dataset train = read_dataset_csv(dir + "/train.csv");
    const Matrix minority = minority_rows(train);
    const std::uint64_t method_seed = mix_seed(seed, method);

    if (method == "smote") {
        SmoteConfig cfg;
        cfg.k_neighbors = config.smote_k;
        cfg.n_synthetic = config.n_synthetic;
        cfg.seed = method_seed;
        write_synthetic_csv(config, seed, method, train, smote_generate(minority, cfg));
    } else if (method == "gan_transformer") {
        Rng rng(method_seed);
        auto [model, trace] = gan_train(minority, config.gan, rng);
        const Matrix rows = gan_sample(model, config.n_synthetic, rng);
        write_synthetic_csv(config, seed, method, train, rows);
        const std::string mdir = method_dir(config, seed, method);
        write_trace_csv(trace, mdir + "/trace.csv");
        save_checkpoint(gan_to_checkpoint(model), mdir + "/checkpoint");
    } else if (method == "tvae") {
        Rng rng(method_seed);
        auto [model, trace] = tvae_train(minority, config.tvae, rng);
        const Matrix rows = tvae_sample(model, config.n_synthetic, rng);
        write_synthetic_csv(config, seed, method, train, rows);
        const std::string mdir = method_dir(config, seed, method);
        write_trace_csv(trace, mdir + "/trace.csv");
        save_checkpoint(tvae_to_checkpoint(model), mdir + "/checkpoint");
    } else if (method == "external") {
        if (config.external_csv.empty()) {
            throw SchemaMismatch("method 'external' needs external_csv in the config");
        }
        const Dataset ext = read_dataset_csv(config.external_csv);
        if (ext.width() != train.width()) {
            throw SchemaMismatch("external synthetic width " + std::to_string(ext.width()) +
                                 " vs dataset width " + std::to_string(train.width()));
        }
        write_synthetic_csv(config, seed, method, train, ext.features);
    } else {
        throw SchemaMismatch("unknown oversample method '" + method + "'");
    }
}

// ---- train/eval ----------------------------------------------------------------------

namespace {

void assert_no_synthetic_in_test(const Dataset& test, const Dataset* synthetic) {
    for (std::uint8_t flag : test.synthetic_mask) {
        if (flag) throw std::runtime_error("synthetic row present in the test split");
    }
    if (!synthetic) return;
    std::unordered_set<std::uint64_t> hashes;
    hashes.reserve(synthetic->rows());
    for (std::size_t r = 0; r < synthetic->rows(); ++r) {
        hashes.insert(row_hash(synthetic->features.row(r)));
    }
    for (std::size_t r = 0; r < test.rows(); ++r) {
        if (!hashes.count(row_hash(test.features.row(r)))) continue;
        for (std::size_t s = 0; s < synthetic->rows(); ++s) {
            if (std::equal(test.features.row(r).begin(), test.features.row(r).end(),
                           synthetic->features.row(s).begin())) {
                throw std::runtime_error("synthetic row leaked into the test split (row " +
                                         std::to_string(r) + ")");
            }
        }
    }
}

}  // namespace

MetricsReport cmd_train_eval(const ExperimentConfig& config, const std::string& method,
                             const std::string& classifier, std::uint64_t seed) {
    const std::string dir = seed_dir(config, seed);
    Dataset train = read_dataset_csv(dir + "/train.csv");
    const Dataset test = read_dataset_csv(dir + "/test.csv");

    std::optional<Dataset> synthetic;
    if (method != "original") {
        synthetic = read_dataset_csv(method_dir(config, seed, method) + "/synthetic.csv");
        train = augment_dataset(train, synthetic->features);
    }
    assert_no_synthetic_in_test(test, synthetic ? &*synthetic : nullptr);

    const std::uint64_t cell_seed = mix_seed(seed, method + "/" + classifier);
    std::vector<float> scores;
    if (classifier == "lr") {
        const LogisticModel model = lr_train(train, config.lr.epochs, config.lr.lr, cell_seed);
        scores = lr_predict(model, test.features);
    } else if (classifier == "svm") {
        const LinearSvmModel model =
            svm_train(train, config.svm.c, config.svm.epochs, config.svm.lr, cell_seed);
        scores = svm_score(model, test.features);
    } else if (classifier == "rf") {
        const RandomForestModel model = rf_train(train, config.rf, cell_seed);
        scores = rf_predict(model, test.features);
    } else if (classifier == "gbt") {
        const GbtModel model = gbt_train(train, config.gbt, cell_seed);
        scores = gbt_predict(model, test.features);
    } else {
        throw SchemaMismatch("unknown classifier '" + classifier + "'");
    }

    const MetricsReport r = report(method, classifier, seed, scores, test.labels, config.threshold);
    const std::string mdir = method_dir(config, seed, method);
    fs::create_directories(mdir);
    write_text(mdir + "/" + classifier + ".report.json", report_to_json(r).dump(2) + "\n");
    return r;
}

json report_to_json(const MetricsReport& r) {
    return json{{"method", r.method},
                {"classifier", r.classifier},
                {"seed", r.seed},
                {"threshold", r.threshold},
                {"accuracy", r.accuracy},
                {"precision", r.precision},
                {"recall", r.recall},
                {"f1", r.f1},
                {"auc", r.auc},
                {"confusion",
                 {{"tp", r.confusion.tp},
                  {"fp", r.confusion.fp},
                  {"tn", r.confusion.tn},
                  {"fn", r.confusion.fn}}},
                {"degenerate", r.degenerate}};
}

MetricsReport report_from_json(const json& j) {
    MetricsReport r;
    r.method = j.at("method").get<std::string>();
    r.classifier = j.at("classifier").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.threshold = j.at("threshold").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.auc = j.at("auc").get<double>();
    r.confusion.tp = j.at("confusion").at("tp").get<std::uint64_t>();
    r.confusion.fp = j.at("confusion").at("fp").get<std::uint64_t>();
    r.confusion.tn = j.at("confusion").at("tn").get<std::uint64_t>();
    r.confusion.fn = j.at("confusion").at("fn").get<std::uint64_t>();
    r.degenerate = j.at("degenerate").get<std::vector<std::string>>();
    return r;
}

// ---- compare --------------------------------------------------------------------------

namespace {

void run_pool(std::vector<std::function<void()>>& jobs, std::size_t n_threads) {
    if (n_threads <= 1) {
        for (auto& job : jobs) job();
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            jobs[i]();
        }
    };
    std::vector<std::thread> threads;
    const std::size_t spawn = std::min(n_threads, jobs.size());
    threads.reserve(spawn);
    for (std::size_t t = 0; t < spawn; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
}

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n == 0) return 0.0;
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string format_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

std::size_t threads_from_env() {
    if (const char* env = std::getenv("FORGE_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return std::min<std::size_t>(hw == 0 ? 1 : hw, 4);
}

GridResult cmd_compare(const ExperimentConfig& config, std::size_t n_threads) {
    const auto t_start = std::chrono::steady_clock::now();
    fs::create_directories(config.out_dir);
    write_text(config.out_dir + "/config_echo.json", config_to_json(config).dump(2) + "\n");

    GridResult grid;

    for (std::uint64_t seed : config.seeds) cmd_preprocess(config, seed);

    // stage B: one oversample job per (seed, method != original)
    struct MethodCell {
        std::uint64_t seed;
        std::string method;
    };
    std::vector<MethodCell> method_cells;
    for (std::uint64_t seed : config.seeds) {
        for (const std::string& method : config.methods) {
            if (method != "original") method_cells.push_back({seed, method});
        }
    }
    std::vector<std::string> method_errors(method_cells.size());
    std::vector<std::function<void()>> jobs;
    for (std::size_t i = 0; i < method_cells.size(); ++i) {
        jobs.push_back([&, i]() {
            try {
                cmd_oversample(config, method_cells[i].method, method_cells[i].seed);
            } catch (const std::exception& e) {
                method_errors[i] = e.what();
            }
        });
    }
    run_pool(jobs, n_threads);
    std::unordered_set<std::string> failed_methods;
    for (std::size_t i = 0; i < method_cells.size(); ++i) {
        if (method_errors[i].empty()) continue;
        const std::string key =
            std::to_string(method_cells[i].seed) + "/" + method_cells[i].method;
        grid.failures.push_back({key, method_errors[i]});
        failed_methods.insert(key);
    }

    // stage C: one train/eval job per grid cell
    struct Cell {
        std::uint64_t seed;
        std::string method;
        std::string classifier;
    };
    std::vector<Cell> cells;
    for (std::uint64_t seed : config.seeds) {
        for (const std::string& method : config.methods) {
            for (const std::string& classifier : config.classifiers) {
                cells.push_back({seed, method, classifier});
            }
        }
    }
    std::vector<std::optional<MetricsReport>> results(cells.size());
    std::vector<std::string> cell_errors(cells.size());
    jobs.clear();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        jobs.push_back([&, i]() {
            const Cell& cell = cells[i];
            const std::string method_key = std::to_string(cell.seed) + "/" + cell.method;
            if (failed_methods.count(method_key)) {
                cell_errors[i] = "oversample stage failed";
                return;
            }
            try {
                results[i] = cmd_train_eval(config, cell.method, cell.classifier, cell.seed);
            } catch (const std::exception& e) {
                cell_errors[i] = e.what();
            }
        });
    }
    run_pool(jobs, n_threads);

    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (results[i]) {
            grid.reports.push_back(*results[i]);
        } else {
            grid.failures.push_back({std::to_string(cells[i].seed) + "/" + cells[i].method + "/" +
                                         cells[i].classifier,
                                     cell_errors[i]});
        }
    }

    // aggregate: per-metric matrices (rows = classifiers, columns = methods),
    // one value per cell = median over seeds
    const std::vector<std::pair<std::string, double MetricsReport::*>> metrics = {
        {"auc", &MetricsReport::auc},
        {"precision", &MetricsReport::precision},
        {"recall", &MetricsReport::recall},
        {"f1", &MetricsReport::f1},
        {"accuracy", &MetricsReport::accuracy}};

    fs::create_directories(config.out_dir + "/tables");
    fs::create_directories(config.out_dir + "/plots");
    std::string summary = "# Oversampling benchmark\n\n";
    summary += "Median over " + std::to_string(config.seeds.size()) + " seed(s); threshold " +
               format_metric(config.threshold) + ".\n";

    for (const auto& [name, member] : metrics) {
        std::string table = "classifier";
        for (const std::string& m : config.methods) table += "," + m;
        table += '\n';
        std::string plot = "method,classifier,value\n";
        std::string md = "\n## " + name + "\n\n| classifier |";
        for (const std::string& m : config.methods) md += " " + m + " |";
        md += "\n|---|";
        for (std::size_t i = 0; i < config.methods.size(); ++i) md += "---|";
        md += "\n";

        for (const std::string& clf : config.classifiers) {
            table += clf;
            md += "| " + clf + " |";
            for (const std::string& m : config.methods) {
                std::vector<double> values;
                for (const MetricsReport& r : grid.reports) {
                    if (r.classifier == clf && r.method == m) values.push_back(r.*member);
                }
                const std::string cell =
                    values.empty() ? std::string("NA") : format_metric(median(values));
                table += "," + cell;
                md += " " + cell + " |";
                plot += m + "," + clf + "," + cell + "\n";
            }
            table += '\n';
            md += "\n";
        }
        write_text(config.out_dir + "/tables/" + name + ".csv", table);
        write_text(config.out_dir + "/plots/" + name + ".csv", plot);
        summary += md;
    }

    if (!grid.failures.empty()) {
        summary += "\n## failures\n\n";
        for (const GridFailure& f : grid.failures) {
            summary += "- `" + f.cell + "`: " + f.error + "\n";
        }
    }
    write_text(config.out_dir + "/summary.md", summary);

    json grid_json;
    grid_json["reports"] = json::array();
    for (const MetricsReport& r : grid.reports) grid_json["reports"].push_back(report_to_json(r));
    grid_json["failures"] = json::array();
    for (const GridFailure& f : grid.failures) {
        grid_json["failures"].push_back({{"cell", f.cell}, {"error", f.error}});
    }
    write_text(config.out_dir + "/grid.json", grid_json.dump(2) + "\n");

    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - t_start)
                             .count();
    json meta = {{"wall_time_ms", elapsed},
                 {"threads", n_threads},
                 {"cells_requested", cells.size()},
                 {"cells_completed", grid.reports.size()},
                 {"format_version", 1}};
    write_text(config.out_dir + "/run_meta.json", meta.dump(2) + "\n");
    return grid;
}

}  // namespace forge
