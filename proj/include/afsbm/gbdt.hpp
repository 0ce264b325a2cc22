#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "afsbm/learners.hpp"

namespace afsbm {

// Leaf when feature < 0. Rows with x[feature] <= threshold go left.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf output, learning rate already applied
    double gain = 0.0;
    std::size_t count = 0;

    bool is_leaf() const { return feature < 0; }
};

class RegressionTree {
public:
    RegressionTree() = default;
    explicit RegressionTree(std::vector<TreeNode> nodes);

    // Single-leaf tree.
    static RegressionTree constant(double value);

    double predict(std::span<const double> row) const;
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::size_t leaf_count() const;

    nlohmann::json to_json() const;
    static RegressionTree from_json(const nlohmann::json& j);

private:
    std::vector<TreeNode> nodes_;
};

// Gradient-boosted trees grown leaf-wise on histogram-binned features. Squared error with
// least-squares leaves for regression, logistic loss with Newton leaves for classification.
class GbdtModel {
public:
    GbdtModel(Task task, std::size_t n_features, double init_score,
              std::vector<RegressionTree> trees);

    static GbdtModel train(const GbdtParams& params, Task task, std::uint64_t seed,
                           const Matrix& x, std::span<const double> y);

    Task task() const { return task_; }
    std::size_t n_features() const { return n_features_; }
    double init_score() const { return init_score_; }
    const std::vector<RegressionTree>& trees() const { return trees_; }

    // Training-set loss after each boosting stage (index 0 = initial constant model).
    const std::vector<double>& train_loss_history() const { return train_loss_history_; }

    std::vector<double> raw_scores(const Matrix& x) const;
    std::vector<double> predict(const Matrix& x) const;
    std::vector<double> feature_importance() const;

    nlohmann::json to_json() const;
    static GbdtModel from_json(const nlohmann::json& j);

private:
    Task task_;
    std::size_t n_features_;
    double init_score_;
    std::vector<RegressionTree> trees_;
    std::vector<double> train_loss_history_;
};

// Per-feature cut points; bin(x) = number of thresholds strictly below x.
std::vector<double> compute_bin_thresholds(std::span<const double> values, int max_bins);

}  // namespace afsbm
