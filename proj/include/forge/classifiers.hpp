#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "forge/data.hpp"
#include "forge/rng.hpp"

namespace forge {

// The four downstream classifiers. Each one exposes a score per row in [0,1],
// so the metrics layer treats them interchangeably.

// ---- logistic regression -------------------------------------------------------

struct LogisticModel {
    std::vector<float> weights;
    float bias = 0.0f;
};

/// Full-batch gradient descent on mean BCE, zero-initialized.
LogisticModel lr_train(const Dataset& d, int epochs, float lr, std::uint64_t seed);

/// sigmoid(w·x + b) per row.
std::vector<float> lr_predict(const LogisticModel& model, const Matrix& rows);

// ---- linear SVM ------------------------------------------------------------------

struct LinearSvmModel {
    std::vector<float> weights;
    float bias = 0.0f;
    float c = 1.0f;
};

/// Subgradient descent on ½‖w‖² + C·Σ hinge(1 - y(w·x + b)), y ∈ {-1,+1}.
LinearSvmModel svm_train(const Dataset& d, float c, int epochs, float lr, std::uint64_t seed);

std::vector<float> svm_margins(const LinearSvmModel& model, const Matrix& rows);

/// Margins mapped through sigmoid so 0 lands on the 0.5 threshold.
std::vector<float> svm_score(const LinearSvmModel& model, const Matrix& rows);

// ---- decision trees ---------------------------------------------------------------

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    float threshold = 0.0f;
    int left = -1;
    int right = -1;
    float value = 0.0f;  // leaf: positive fraction (CART) or weight (boosting)

    bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root; x < threshold goes left
    int max_depth = 0;
    int min_samples_leaf = 1;
};

double gini_impurity(std::size_t n_pos, std::size_t n_neg);

/// Greedy CART on Gini impurity. Candidate thresholds are midpoints between
/// adjacent distinct sorted values; ties break toward the lowest feature
/// index, then the lowest threshold. feature_subset_size = 0 uses all columns.
DecisionTree tree_train(const Matrix& x, const std::vector<std::uint8_t>& y, int max_depth,
                        int min_samples_leaf, std::size_t feature_subset_size, Rng& rng);

float tree_predict(const DecisionTree& tree, std::span<const float> row);

// ---- random forest ----------------------------------------------------------------

struct RfParams {
    std::size_t n_trees = 100;
    int max_depth = 12;
    int min_samples_leaf = 1;
    std::size_t features_per_split = 0;  // 0 = floor(sqrt(width))
    bool bootstrap = true;
};

struct RandomForestModel {
    RfParams params;
    std::uint64_t seed = 0;
    std::vector<DecisionTree> trees;
};

/// Per tree: bootstrap rows with replacement plus per-split feature
/// subsampling, seeded by mix_seed(seed, tree_index).
RandomForestModel rf_train(const Dataset& d, const RfParams& params, std::uint64_t seed);

/// Mean of per-tree leaf fractions.
std::vector<float> rf_predict(const RandomForestModel& model, const Matrix& rows);

// ---- gradient-boosted trees --------------------------------------------------------

struct GbtParams {
    std::size_t n_rounds = 200;
    float eta = 0.1f;
    int max_depth = 4;
    float lambda_l2 = 1.0f;
};

struct GbtModel {
    GbtParams params;
    float base_score = 0.0f;  // initial log-odds
    std::vector<DecisionTree> trees;
};

/// Second-order log-loss boosting: g = p - y, h = p(1-p); leaves take
/// -Σg/(Σh+λ) and splits maximize ½[G_L²/(H_L+λ) + G_R²/(H_R+λ) - G²/(H+λ)].
/// When `round_logloss` is given it receives the training log-loss after each
/// round.
GbtModel gbt_train(const Dataset& d, const GbtParams& params, std::uint64_t seed,
                   std::vector<double>* round_logloss = nullptr);

/// sigmoid(base + η·Σ tree outputs).
std::vector<float> gbt_predict(const GbtModel& model, const Matrix& rows);

/// Regression tree on gradient/hessian targets over presorted feature orders;
/// exposed for the boosting oracle tests.
DecisionTree boost_tree_train(const Matrix& x, const std::vector<double>& grad,
                              const std::vector<double>& hess, int max_depth, double lambda);

}  // namespace forge
