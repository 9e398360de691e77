#include "forge/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "forge/tensor.hpp"

namespace forge {

namespace {

void require_both_classes(const Dataset& d, const char* who) {
    const auto [neg, pos] = class_counts(d);
    if (neg == 0 || pos == 0) {
        throw SingleClass(std::string(who) + " needs both classes, got " + std::to_string(neg) +
                          " negatives / " + std::to_string(pos) + " positives");
    }
}

Tensor features_tensor(const Dataset& d) {
    return Tensor({d.rows(), d.width()},
                  std::vector<float>(d.features.data.begin(), d.features.data.end()));
}

float sigmoid_value(float x) {
    if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
    const float e = std::exp(x);
    return e / (1.0f + e);
}

}  // namespace

// ---- logistic regression -----------------------------------------------------

LogisticModel lr_train(const Dataset& d, int epochs, float lr, std::uint64_t seed) {
    (void)seed;  // zero init + full batch: already deterministic
    require_both_classes(d, "lr_train");

    Tensor x = features_tensor(d);
    std::vector<float> yv(d.rows());
    for (std::size_t i = 0; i < d.rows(); ++i) yv[i] = static_cast<float>(d.labels[i]);
    Tensor y({d.rows(), 1}, std::move(yv));

    Tensor w = Tensor::zeros({d.width(), 1}, true);
    Tensor b = Tensor::zeros({1}, true);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        Tape tape;
        Tensor logits = add(matmul(x, w), b);
        Tensor l = bce_with_logits(logits, y);
        tape.backward(l);
        auto wg = w.grad();
        auto wv = w.values();
        for (std::size_t j = 0; j < wv.size(); ++j) wv[j] -= lr * wg[j];
        b.values()[0] -= lr * b.grad()[0];
        w.clear_grad();
        b.clear_grad();
    }

    LogisticModel model;
    model.weights.assign(w.values().begin(), w.values().end());
    model.bias = b.values()[0];
    return model;
}

std::vector<float> lr_predict(const LogisticModel& model, const Matrix& rows) {
    if (rows.cols != model.weights.size()) {
        throw WidthMismatch("model expects " + std::to_string(model.weights.size()) +
                            " features, rows have " + std::to_string(rows.cols));
    }
    std::vector<float> scores(rows.rows);
    for (std::size_t r = 0; r < rows.rows; ++r) {
        double z = model.bias;
        const float* row = rows.data.data() + r * rows.cols;
        for (std::size_t c = 0; c < rows.cols; ++c) z += static_cast<double>(model.weights[c]) * row[c];
        scores[r] = sigmoid_value(static_cast<float>(z));
    }
    return scores;
}

// ---- linear SVM -----------------------------------------------------------------

LinearSvmModel svm_train(const Dataset& d, float c, int epochs, float lr, std::uint64_t seed) {
    (void)seed;
    require_both_classes(d, "svm_train");

    Tensor x = features_tensor(d);
    std::vector<float> yv(d.rows());
    for (std::size_t i = 0; i < d.rows(); ++i) yv[i] = d.labels[i] ? 1.0f : -1.0f;
    Tensor y({d.rows(), 1}, std::move(yv));
    Tensor ones({d.rows(), 1}, 1.0f);

    Tensor w = Tensor::zeros({d.width(), 1}, true);
    Tensor b = Tensor::zeros({1}, true);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        Tape tape;
        Tensor margins = mul(y, add(matmul(x, w), b));
        Tensor hinge = relu(sub(ones, margins));
        Tensor objective = add(scale(sum(mul(w, w)), 0.5f), scale(sum(hinge), c));
        tape.backward(objective);
        auto wg = w.grad();
        auto wv = w.values();
        for (std::size_t j = 0; j < wv.size(); ++j) wv[j] -= lr * wg[j];
        b.values()[0] -= lr * b.grad()[0];
        w.clear_grad();
        b.clear_grad();
    }

    LinearSvmModel model;
    model.weights.assign(w.values().begin(), w.values().end());
    model.bias = b.values()[0];
    model.c = c;
    return model;
}

std::vector<float> svm_margins(const LinearSvmModel& model, const Matrix& rows) {
    if (rows.cols != model.weights.size()) {
        throw WidthMismatch("model expects " + std::to_string(model.weights.size()) +
                            " features, rows have " + std::to_string(rows.cols));
    }
    std::vector<float> margins(rows.rows);
    for (std::size_t r = 0; r < rows.rows; ++r) {
        double z = model.bias;
        const float* row = rows.data.data() + r * rows.cols;
        for (std::size_t c = 0; c < rows.cols; ++c) z += static_cast<double>(model.weights[c]) * row[c];
        margins[r] = static_cast<float>(z);
    }
    return margins;
}

std::vector<float> svm_score(const LinearSvmModel& model, const Matrix& rows) {
    std::vector<float> scores = svm_margins(model, rows);
    for (float& s : scores) s = sigmoid_value(s);
    return scores;
}

// ---- CART -----------------------------------------------------------------------

double gini_impurity(std::size_t n_pos, std::size_t n_neg) {
    const double n = static_cast<double>(n_pos + n_neg);
    if (n == 0.0) return 0.0;
    const double p = static_cast<double>(n_pos) / n;
    const double q = static_cast<double>(n_neg) / n;
    return 1.0 - p * p - q * q;
}

namespace {

// Midpoint between adjacent distinct values; callers must verify the float
// result still partitions as (x < t) == "first i samples".
float split_midpoint(float lo, float hi) { return lo + (hi - lo) * 0.5f; }

struct CartBuilder {
    const Matrix& x;
    const std::vector<std::uint8_t>& y;
    int max_depth;
    int min_samples_leaf;
    std::size_t subset;
    Rng& rng;
    std::vector<TreeNode> nodes;
    std::vector<std::size_t> columns;  // scratch for feature sampling

    int build(std::vector<std::size_t>& idx, int depth) {
        const std::size_t n = idx.size();
        std::size_t n_pos = 0;
        for (std::size_t i : idx) n_pos += y[i];

        const bool pure = n_pos == 0 || n_pos == n;
        if (depth >= max_depth || pure || n < 2 * static_cast<std::size_t>(min_samples_leaf)) {
            return make_leaf(n_pos, n);
        }

        // per-split feature subsample, reported in ascending order so ties
        // resolve toward the lowest feature index
        columns.resize(x.cols);
        std::iota(columns.begin(), columns.end(), 0);
        std::size_t m = subset == 0 ? x.cols : std::min(subset, x.cols);
        for (std::size_t i = 0; i < m; ++i) {
            std::swap(columns[i], columns[i + rng.index(x.cols - i)]);
        }
        std::vector<std::size_t> chosen(columns.begin(), columns.begin() + m);
        std::sort(chosen.begin(), chosen.end());

        double best_score = std::numeric_limits<double>::infinity();
        int best_feature = -1;
        float best_threshold = 0.0f;

        std::vector<std::size_t> order(idx);
        for (std::size_t f : chosen) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return x.at(a, f) < x.at(b, f);
            });
            std::size_t pos_left = 0;
            for (std::size_t i = 1; i < n; ++i) {
                pos_left += y[order[i - 1]];
                const float lo = x.at(order[i - 1], f);
                const float hi = x.at(order[i], f);
                if (lo == hi) continue;
                if (i < static_cast<std::size_t>(min_samples_leaf) ||
                    n - i < static_cast<std::size_t>(min_samples_leaf)) {
                    continue;
                }
                const float t = split_midpoint(lo, hi);
                if (!(lo < t) || !(t <= hi)) continue;
                const double gl = gini_impurity(pos_left, i - pos_left);
                const double gr = gini_impurity(n_pos - pos_left, (n - i) - (n_pos - pos_left));
                const double weighted =
                    (static_cast<double>(i) * gl + static_cast<double>(n - i) * gr) /
                    static_cast<double>(n);
                if (weighted < best_score) {
                    best_score = weighted;
                    best_feature = static_cast<int>(f);
                    best_threshold = t;
                }
            }
        }

        if (best_feature < 0) return make_leaf(n_pos, n);

        std::vector<std::size_t> left, right;
        for (std::size_t i : idx) {
            (x.at(i, static_cast<std::size_t>(best_feature)) < best_threshold ? left : right)
                .push_back(i);
        }
        if (left.empty() || right.empty()) return make_leaf(n_pos, n);

        const int node_id = static_cast<int>(nodes.size());
        nodes.push_back(TreeNode{best_feature, best_threshold, -1, -1, 0.0f});
        const int l = build(left, depth + 1);
        const int r = build(right, depth + 1);
        nodes[node_id].left = l;
        nodes[node_id].right = r;
        return node_id;
    }

    int make_leaf(std::size_t n_pos, std::size_t n) {
        const int node_id = static_cast<int>(nodes.size());
        TreeNode leaf;
        leaf.value = n == 0 ? 0.0f : static_cast<float>(n_pos) / static_cast<float>(n);
        nodes.push_back(leaf);
        return node_id;
    }
};

}  // namespace

DecisionTree tree_train(const Matrix& x, const std::vector<std::uint8_t>& y, int max_depth,
                        int min_samples_leaf, std::size_t feature_subset_size, Rng& rng) {
    if (x.rows == 0) throw EmptyData("tree_train");
    if (x.rows != y.size()) {
        throw LengthMismatch(std::to_string(x.rows) + " rows vs " + std::to_string(y.size()) +
                             " labels");
    }
    CartBuilder builder{x, y, max_depth, std::max(1, min_samples_leaf), feature_subset_size, rng,
                        {}, {}};
    std::vector<std::size_t> idx(x.rows);
    std::iota(idx.begin(), idx.end(), 0);
    builder.build(idx, 0);

    DecisionTree tree;
    tree.nodes = std::move(builder.nodes);
    tree.max_depth = max_depth;
    tree.min_samples_leaf = min_samples_leaf;
    return tree;
}

float tree_predict(const DecisionTree& tree, std::span<const float> row) {
    if (tree.nodes.empty()) throw EmptyData("tree has no nodes");
    int node = 0;
    while (!tree.nodes[node].is_leaf()) {
        const TreeNode& nd = tree.nodes[node];
        node = row[static_cast<std::size_t>(nd.feature)] < nd.threshold ? nd.left : nd.right;
    }
    return tree.nodes[node].value;
}

// ---- random forest -----------------------------------------------------------------

RandomForestModel rf_train(const Dataset& d, const RfParams& params, std::uint64_t seed) {
    require_both_classes(d, "rf_train");
    if (params.n_trees == 0) throw EmptyData("rf_train with zero trees");

    const std::size_t m = params.features_per_split == 0
                              ? std::max<std::size_t>(
                                    1, static_cast<std::size_t>(std::sqrt(
                                           static_cast<double>(d.width()))))
                              : params.features_per_split;

    RandomForestModel model;
    model.params = params;
    model.seed = seed;
    model.trees.reserve(params.n_trees);

    const std::size_t n = d.rows();
    for (std::size_t t = 0; t < params.n_trees; ++t) {
        Rng tree_rng(mix_seed(seed, t));
        Matrix sample;
        std::vector<std::uint8_t> labels;
        if (params.bootstrap) {
            sample = Matrix(n, d.width());
            labels.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t r = tree_rng.index(n);
                std::memcpy(sample.data.data() + i * d.width(),
                            d.features.data.data() + r * d.width(), d.width() * sizeof(float));
                labels[i] = d.labels[r];
            }
        } else {
            sample = d.features;
            labels = d.labels;
        }
        model.trees.push_back(tree_train(sample, labels, params.max_depth,
                                         params.min_samples_leaf, m, tree_rng));
    }
    return model;
}

std::vector<float> rf_predict(const RandomForestModel& model, const Matrix& rows) {
    if (model.trees.empty()) throw EmptyData("random forest has no trees");
    std::vector<float> scores(rows.rows, 0.0f);
    for (std::size_t r = 0; r < rows.rows; ++r) {
        double acc = 0.0;
        for (const DecisionTree& tree : model.trees) acc += tree_predict(tree, rows.row(r));
        scores[r] = static_cast<float>(acc / static_cast<double>(model.trees.size()));
    }
    return scores;
}

// ---- gradient boosting ----------------------------------------------------------------

namespace {

std::vector<std::vector<std::uint32_t>> feature_value_orders(const Matrix& x) {
    std::vector<std::vector<std::uint32_t>> sorted(x.cols);
    for (std::size_t f = 0; f < x.cols; ++f) {
        sorted[f].resize(x.rows);
        std::iota(sorted[f].begin(), sorted[f].end(), 0);
        std::sort(sorted[f].begin(), sorted[f].end(), [&](std::uint32_t a, std::uint32_t b) {
            return x.at(a, f) < x.at(b, f);
        });
    }
    return sorted;
}

// Level-order builder over precomputed per-feature value orders; the orders
// never change across boosting rounds, so the caller sorts once per fit.
DecisionTree boost_tree_presorted(const Matrix& x, const std::vector<double>& grad,
                                  const std::vector<double>& hess,
                                  const std::vector<std::vector<std::uint32_t>>& sorted,
                                  int max_depth, double lambda) {
    const std::size_t n = x.rows;
    DecisionTree tree;
    tree.max_depth = max_depth;
    std::vector<std::int32_t> node_of(n, 0);

    struct LevelNode {
        int id;
        double g;
        double h;
        std::size_t count;
    };

    double g_root = 0.0, h_root = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        g_root += grad[i];
        h_root += hess[i];
    }
    tree.nodes.push_back(TreeNode{});
    std::vector<LevelNode> frontier{{0, g_root, h_root, n}};

    struct ScanState {
        double gl = 0.0;
        double hl = 0.0;
        std::size_t nl = 0;
        float prev = 0.0f;
        bool has_prev = false;
        double best_gain = 0.0;
        int best_feature = -1;
        float best_threshold = 0.0f;
    };

    for (int depth = 0; depth < max_depth && !frontier.empty(); ++depth) {
        const int base_id = frontier.front().id;
        std::vector<ScanState> state(frontier.size());

        for (std::size_t f = 0; f < x.cols; ++f) {
            for (ScanState& s : state) {
                s.gl = s.hl = 0.0;
                s.nl = 0;
                s.has_prev = false;
            }
            for (std::uint32_t idx : sorted[f]) {
                const std::int32_t nid = node_of[idx];
                const std::size_t slot = static_cast<std::size_t>(nid - base_id);
                if (nid < base_id || slot >= frontier.size()) continue;
                ScanState& s = state[slot];
                const LevelNode& ln = frontier[slot];
                const float v = x.at(idx, f);
                if (s.has_prev && v > s.prev && s.nl > 0 && s.nl < ln.count) {
                    const float t = split_midpoint(s.prev, v);
                    if (s.prev < t && t <= v) {
                        const double gr = ln.g - s.gl;
                        const double hr = ln.h - s.hl;
                        const double gain = 0.5 * (s.gl * s.gl / (s.hl + lambda) +
                                                   gr * gr / (hr + lambda) -
                                                   ln.g * ln.g / (ln.h + lambda));
                        if (gain > s.best_gain) {
                            s.best_gain = gain;
                            s.best_feature = static_cast<int>(f);
                            s.best_threshold = t;
                        }
                    }
                }
                s.gl += grad[idx];
                s.hl += hess[idx];
                s.nl += 1;
                s.prev = v;
                s.has_prev = true;
            }
        }

        // realize splits; children are appended contiguously per level
        std::vector<LevelNode> next;
        for (std::size_t slot = 0; slot < frontier.size(); ++slot) {
            const LevelNode& ln = frontier[slot];
            const ScanState& s = state[slot];
            if (s.best_feature < 0 || s.best_gain <= 0.0) {
                tree.nodes[ln.id].feature = -1;
                tree.nodes[ln.id].value =
                    static_cast<float>(-ln.g / (ln.h + lambda));
                continue;
            }
            const int left_id = static_cast<int>(tree.nodes.size());
            tree.nodes.push_back(TreeNode{});
            tree.nodes.push_back(TreeNode{});
            tree.nodes[ln.id].feature = s.best_feature;
            tree.nodes[ln.id].threshold = s.best_threshold;
            tree.nodes[ln.id].left = left_id;
            tree.nodes[ln.id].right = left_id + 1;
            next.push_back(LevelNode{left_id, 0.0, 0.0, 0});
            next.push_back(LevelNode{left_id + 1, 0.0, 0.0, 0});
        }

        if (next.empty()) {
            frontier.clear();
            break;
        }

        const int next_base = next.front().id;
        for (std::size_t i = 0; i < n; ++i) {
            const std::int32_t nid = node_of[i];
            const std::size_t slot = static_cast<std::size_t>(nid - base_id);
            if (nid < base_id || slot >= frontier.size()) continue;
            const TreeNode& nd = tree.nodes[nid];
            if (nd.is_leaf()) continue;
            const int child = x.at(i, static_cast<std::size_t>(nd.feature)) < nd.threshold
                                  ? nd.left
                                  : nd.right;
            node_of[i] = child;
            LevelNode& cn = next[static_cast<std::size_t>(child - next_base)];
            cn.g += grad[i];
            cn.h += hess[i];
            cn.count += 1;
        }
        frontier = std::move(next);
    }

    // anything still on the frontier hit the depth cap
    for (const LevelNode& ln : frontier) {
        tree.nodes[ln.id].feature = -1;
        tree.nodes[ln.id].value = static_cast<float>(-ln.g / (ln.h + lambda));
    }
    return tree;
}

}  // namespace

DecisionTree boost_tree_train(const Matrix& x, const std::vector<double>& grad,
                              const std::vector<double>& hess, int max_depth, double lambda) {
    if (x.rows == 0) throw EmptyData("boost_tree_train");
    return boost_tree_presorted(x, grad, hess, feature_value_orders(x), max_depth, lambda);
}

GbtModel gbt_train(const Dataset& d, const GbtParams& params, std::uint64_t seed,
                   std::vector<double>* round_logloss) {
    (void)seed;  // boosting is deterministic; kept for interface symmetry
    require_both_classes(d, "gbt_train");

    const std::size_t n = d.rows();
    const auto [n_neg, n_pos] = class_counts(d);
    double p0 = static_cast<double>(n_pos) / static_cast<double>(n);
    p0 = std::min(std::max(p0, 1e-6), 1.0 - 1e-6);

    GbtModel model;
    model.params = params;
    model.base_score = static_cast<float>(std::log(p0 / (1.0 - p0)));

    const std::vector<std::vector<std::uint32_t>> sorted = feature_value_orders(d.features);
    std::vector<double> score(n, model.base_score);
    std::vector<double> grad(n), hess(n);
    if (round_logloss) round_logloss->clear();

    for (std::size_t round = 0; round < params.n_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = 1.0 / (1.0 + std::exp(-score[i]));
            grad[i] = p - static_cast<double>(d.labels[i]);
            hess[i] = p * (1.0 - p);
        }
        DecisionTree tree = boost_tree_presorted(d.features, grad, hess, sorted,
                                                 params.max_depth,
                                                 static_cast<double>(params.lambda_l2));
        for (std::size_t i = 0; i < n; ++i) {
            score[i] += static_cast<double>(params.eta) *
                        static_cast<double>(tree_predict(tree, d.features.row(i)));
        }
        model.trees.push_back(std::move(tree));

        if (round_logloss) {
            double ll = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double z = score[i];
                ll += std::max(z, 0.0) - z * static_cast<double>(d.labels[i]) +
                      std::log1p(std::exp(-std::abs(z)));
            }
            round_logloss->push_back(ll / static_cast<double>(n));
        }
    }
    return model;
}

std::vector<float> gbt_predict(const GbtModel& model, const Matrix& rows) {
    if (model.trees.empty()) throw EmptyData("gbt model has no trees");
    std::vector<float> scores(rows.rows);
    for (std::size_t r = 0; r < rows.rows; ++r) {
        double z = model.base_score;
        for (const DecisionTree& tree : model.trees) {
            z += static_cast<double>(model.params.eta) *
                 static_cast<double>(tree_predict(tree, rows.row(r)));
        }
        scores[r] = sigmoid_value(static_cast<float>(z));
    }
    return scores;
}

}  // namespace forge
