#include "afsbm/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace afsbm {

RegressionTree::RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.empty()) throw std::invalid_argument("RegressionTree: no nodes");
    for (const auto& n : nodes_) {
        if (n.is_leaf()) continue;
        const auto size = static_cast<int>(nodes_.size());
        if (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size)
            throw std::invalid_argument("RegressionTree: child index out of range");
    }
}

RegressionTree RegressionTree::constant(double value) {
    TreeNode leaf;
    leaf.value = value;
    return RegressionTree({leaf});
}

double RegressionTree::predict(std::span<const double> row) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
        const auto& n = nodes_[i];
        i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                           : n.right);
    }
    return nodes_[i].value;
}

std::size_t RegressionTree::leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

namespace {

nlohmann::json node_to_json(const std::vector<TreeNode>& nodes, std::size_t i) {
    const auto& n = nodes[i];
    if (n.is_leaf()) return {{"leaf", n.value}, {"count", n.count}};
    return {{"feature", n.feature},
            {"threshold", n.threshold},
            {"gain", n.gain},
            {"count", n.count},
            {"left", node_to_json(nodes, static_cast<std::size_t>(n.left))},
            {"right", node_to_json(nodes, static_cast<std::size_t>(n.right))}};
}

int node_from_json(const nlohmann::json& j, std::vector<TreeNode>& nodes) {
    const int index = static_cast<int>(nodes.size());
    nodes.emplace_back();
    TreeNode n;
    n.count = j.value("count", std::size_t{0});
    if (j.contains("leaf")) {
        n.value = j.at("leaf").get<double>();
    } else {
        n.feature = j.at("feature").get<int>();
        n.threshold = j.at("threshold").get<double>();
        n.gain = j.value("gain", 0.0);
        n.left = node_from_json(j.at("left"), nodes);
        n.right = node_from_json(j.at("right"), nodes);
    }
    nodes[static_cast<std::size_t>(index)] = n;
    return index;
}

}  // namespace

nlohmann::json RegressionTree::to_json() const { return node_to_json(nodes_, 0); }

RegressionTree RegressionTree::from_json(const nlohmann::json& j) {
    std::vector<TreeNode> nodes;
    node_from_json(j, nodes);
    return RegressionTree(std::move(nodes));
}

// ---------------------------------------------------------------------------

std::vector<double> compute_bin_thresholds(std::span<const double> values, int max_bins) {
    if (max_bins < 2) throw std::invalid_argument("compute_bin_thresholds: max_bins < 2");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> distinct = sorted;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() <= 1) return {};

    const auto cut_after = [](double a, double b) {
        const double t = a + (b - a) / 2.0;
        return t >= b ? a : t;
    };
    std::vector<double> thresholds;
    if (distinct.size() <= static_cast<std::size_t>(max_bins)) {
        for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
            thresholds.push_back(cut_after(distinct[i], distinct[i + 1]));
    } else {
        const std::size_t n = sorted.size();
        for (int q = 1; q < max_bins; ++q) {
            const double a = sorted[static_cast<std::size_t>(q) * n / static_cast<std::size_t>(max_bins)];
            const auto next = std::upper_bound(distinct.begin(), distinct.end(), a);
            if (next == distinct.end()) continue;
            thresholds.push_back(cut_after(a, *next));
        }
        std::sort(thresholds.begin(), thresholds.end());
        thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    }
    return thresholds;
}

namespace {

constexpr double kMinSumHessian = 1e-3;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double clamp_probability(double p) {
    return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

struct BinnedMatrix {
    std::size_t n_rows = 0;
    std::size_t n_features = 0;
    std::vector<std::uint8_t> bins;  // column-major
    std::vector<std::vector<double>> thresholds;
    std::vector<std::size_t> offsets;  // histogram offset per feature
    std::size_t total_bins = 0;

    BinnedMatrix(const Matrix& x, int max_bins) : n_rows(x.rows()), n_features(x.cols()) {
        bins.resize(n_rows * n_features);
        thresholds.resize(n_features);
        offsets.resize(n_features);
        for (std::size_t f = 0; f < n_features; ++f) {
            const auto column = x.column(f);
            thresholds[f] = compute_bin_thresholds(column, max_bins);
            offsets[f] = total_bins;
            total_bins += thresholds[f].size() + 1;
            const auto& thr = thresholds[f];
            for (std::size_t r = 0; r < n_rows; ++r) {
                const auto b = std::lower_bound(thr.begin(), thr.end(), column[r]) - thr.begin();
                bins[f * n_rows + r] = static_cast<std::uint8_t>(b);
            }
        }
    }

    std::uint8_t bin(std::size_t r, std::size_t f) const { return bins[f * n_rows + r]; }
};

struct Histogram {
    std::vector<double> g, h;
    std::vector<std::size_t> n;

    explicit Histogram(std::size_t size = 0) : g(size, 0.0), h(size, 0.0), n(size, 0) {}

    void assign_difference(const Histogram& parent, const Histogram& sibling) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] = parent.g[i] - sibling.g[i];
            h[i] = parent.h[i] - sibling.h[i];
            n[i] = parent.n[i] - sibling.n[i];
        }
    }
};

// Histograms for wide inputs are large enough that allocating one per leaf shows up as
// page-fault time, so buffers are recycled across leaves and trees.
class HistogramPool {
public:
    explicit HistogramPool(std::size_t size) : size_(size) {}

    Histogram take() {
        if (free_.empty()) return Histogram(size_);
        Histogram h = std::move(free_.back());
        free_.pop_back();
        return h;
    }
    Histogram take_zeroed() {
        Histogram h = take();
        std::fill(h.g.begin(), h.g.end(), 0.0);
        std::fill(h.h.begin(), h.h.end(), 0.0);
        std::fill(h.n.begin(), h.n.end(), std::size_t{0});
        return h;
    }
    void give_back(Histogram&& h) {
        if (h.g.size() == size_) free_.push_back(std::move(h));
    }

private:
    std::size_t size_;
    std::vector<Histogram> free_;
};

struct SplitCandidate {
    double gain = -std::numeric_limits<double>::infinity();
    int feature = -1;
    int bin = -1;
};

struct OpenLeaf {
    int node;
    std::vector<std::size_t> rows;
    Histogram hist;
    double g_sum = 0.0;
    double h_sum = 0.0;
    SplitCandidate best;
};

class TreeGrower {
public:
    TreeGrower(const BinnedMatrix& data, std::span<const double> g, std::span<const double> h,
               const GbdtParams& params, std::vector<std::size_t> features, double min_gain,
               HistogramPool& pool)
        : data_(data), g_(g), h_(h), params_(params), features_(std::move(features)),
          min_gain_(min_gain), pool_(pool) {}

    RegressionTree grow(std::vector<std::size_t> rows) {
        nodes_.clear();
        nodes_.emplace_back();
        std::vector<OpenLeaf> leaves;
        leaves.push_back(make_leaf(0, std::move(rows), nullptr, nullptr));

        while (static_cast<int>(leaves.size()) < params_.num_leaves) {
            std::size_t pick = leaves.size();
            double best_gain = min_gain_;
            for (std::size_t i = 0; i < leaves.size(); ++i) {
                if (leaves[i].best.gain > best_gain) {
                    best_gain = leaves[i].best.gain;
                    pick = i;
                }
            }
            if (pick == leaves.size()) break;

            OpenLeaf parent = std::move(leaves[pick]);
            const auto f = static_cast<std::size_t>(parent.best.feature);
            const auto bin = static_cast<std::uint8_t>(parent.best.bin);
            std::vector<std::size_t> left_rows, right_rows;
            for (auto r : parent.rows) (data_.bin(r, f) <= bin ? left_rows : right_rows).push_back(r);

            const int left_node = static_cast<int>(nodes_.size());
            nodes_.emplace_back();
            const int right_node = static_cast<int>(nodes_.size());
            nodes_.emplace_back();
            auto& pn = nodes_[static_cast<std::size_t>(parent.node)];
            pn.feature = static_cast<int>(f);
            pn.threshold = data_.thresholds[f][bin];
            pn.gain = parent.best.gain;
            pn.left = left_node;
            pn.right = right_node;

            // Build the smaller child's histogram directly, derive the other by subtraction.
            const bool left_small = left_rows.size() <= right_rows.size();
            OpenLeaf small = make_leaf(left_small ? left_node : right_node,
                                       std::move(left_small ? left_rows : right_rows), nullptr, nullptr);
            OpenLeaf large = make_leaf(left_small ? right_node : left_node,
                                       std::move(left_small ? right_rows : left_rows), &parent.hist,
                                       &small.hist);
            pool_.give_back(std::move(parent.hist));
            leaves[pick] = std::move(left_small ? small : large);
            leaves.push_back(std::move(left_small ? large : small));
        }

        for (const auto& leaf : leaves) {
            auto& node = nodes_[static_cast<std::size_t>(leaf.node)];
            node.value = -leaf.g_sum / (leaf.h_sum + params_.lambda_l2) * params_.learning_rate;
            if (!std::isfinite(node.value)) node.value = 0.0;
        }
        for (auto& leaf : leaves) pool_.give_back(std::move(leaf.hist));
        return RegressionTree(std::move(nodes_));
    }

private:
    OpenLeaf make_leaf(int node, std::vector<std::size_t> rows, const Histogram* parent,
                       const Histogram* sibling) {
        OpenLeaf leaf;
        leaf.node = node;
        leaf.rows = std::move(rows);
        for (auto r : leaf.rows) {
            leaf.g_sum += g_[r];
            leaf.h_sum += h_[r];
        }
        nodes_[static_cast<std::size_t>(node)].count = leaf.rows.size();
        if (parent && sibling) {
            leaf.hist = pool_.take();
            leaf.hist.assign_difference(*parent, *sibling);
        } else {
            leaf.hist = pool_.take_zeroed();
            for (auto f : features_) {
                const std::size_t off = data_.offsets[f];
                const std::uint8_t* col = data_.bins.data() + f * data_.n_rows;
                for (auto r : leaf.rows) {
                    const std::size_t b = off + col[r];
                    leaf.hist.g[b] += g_[r];
                    leaf.hist.h[b] += h_[r];
                    ++leaf.hist.n[b];
                }
            }
        }
        if (static_cast<int>(leaf.rows.size()) >= 2 * params_.min_child_samples) leaf.best = find_split(leaf);
        return leaf;
    }

    SplitCandidate find_split(const OpenLeaf& leaf) const {
        SplitCandidate best;
        const double lambda = params_.lambda_l2;
        const double parent_score = leaf.g_sum * leaf.g_sum / (leaf.h_sum + lambda);
        const auto min_child = static_cast<std::size_t>(params_.min_child_samples);
        for (auto f : features_) {
            const std::size_t off = data_.offsets[f];
            const std::size_t n_bins = data_.thresholds[f].size() + 1;
            double gl = 0.0, hl = 0.0;
            std::size_t nl = 0;
            for (std::size_t b = 0; b + 1 < n_bins; ++b) {
                gl += leaf.hist.g[off + b];
                hl += leaf.hist.h[off + b];
                nl += leaf.hist.n[off + b];
                const std::size_t nr = leaf.rows.size() - nl;
                if (nl < min_child) continue;
                if (nr < min_child) break;
                const double gr = leaf.g_sum - gl;
                const double hr = leaf.h_sum - hl;
                if (hl < kMinSumHessian || hr < kMinSumHessian) continue;
                const double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_score;
                if (gain > best.gain) {
                    best.gain = gain;
                    best.feature = static_cast<int>(f);
                    best.bin = static_cast<int>(b);
                }
            }
        }
        return best;
    }

    const BinnedMatrix& data_;
    std::span<const double> g_;
    std::span<const double> h_;
    const GbdtParams& params_;
    std::vector<std::size_t> features_;
    double min_gain_;
    HistogramPool& pool_;
    std::vector<TreeNode> nodes_;
};

double training_loss(Task task, std::span<const double> y, std::span<const double> raw) {
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (task == Task::regression) {
            const double e = raw[i] - y[i];
            sum += e * e;
        } else {
            const double p = clamp_probability(sigmoid(raw[i]));
            sum -= y[i] == 1.0 ? std::log(p) : std::log(1.0 - p);
        }
    }
    return sum / static_cast<double>(y.size());
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, std::mt19937_64& rng) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(all[i], all[pick(rng)]);
    }
    all.resize(k);
    std::sort(all.begin(), all.end());
    return all;
}

}  // namespace

GbdtModel::GbdtModel(Task task, std::size_t n_features, double init_score,
                     std::vector<RegressionTree> trees)
    : task_(task), n_features_(n_features), init_score_(init_score), trees_(std::move(trees)) {}

GbdtModel GbdtModel::train(const GbdtParams& params, Task task, std::uint64_t seed,
                           const Matrix& x, std::span<const double> y) {
    if (x.rows() == 0 || x.cols() == 0) throw std::invalid_argument("gbdt: empty training data");
    if (x.rows() != y.size()) throw std::invalid_argument("gbdt: X rows != y length");
    for (double v : x.data())
        if (!std::isfinite(v)) throw std::invalid_argument("gbdt: non-finite feature value");
    const std::size_t n = x.rows();
    double y_mean = 0.0;
    for (double v : y) {
        if (!std::isfinite(v)) throw std::invalid_argument("gbdt: non-finite target");
        if (task == Task::binary_classification && v != 0.0 && v != 1.0)
            throw std::invalid_argument("gbdt: classification targets must be 0 or 1");
        y_mean += v;
    }
    y_mean /= static_cast<double>(n);

    double init = y_mean;
    if (task == Task::binary_classification) {
        if (y_mean == 0.0 || y_mean == 1.0)
            throw std::invalid_argument("gbdt: training set contains a single class");
        init = std::log(y_mean / (1.0 - y_mean));
    }

    const BinnedMatrix binned(x, params.max_bins);
    HistogramPool pool(binned.total_bins);
    std::mt19937_64 rng(seed);
    GbdtModel model(task, x.cols(), init, {});
    std::vector<double> raw(n, init);
    std::vector<double> g(n), h(n);
    model.train_loss_history_.push_back(training_loss(task, y, raw));

    const std::size_t bag_size =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(params.subsample * static_cast<double>(n))));
    const std::size_t n_cols =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(params.colsample_bytree * static_cast<double>(x.cols()))));

    for (int it = 0; it < params.n_estimators; ++it) {
        double g_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (task == Task::regression) {
                g[i] = raw[i] - y[i];
                h[i] = 1.0;
            } else {
                const double p = sigmoid(raw[i]);
                g[i] = p - y[i];
                h[i] = p * (1.0 - p);
            }
            g_sq += g[i] * g[i];
        }
        std::vector<std::size_t> rows;
        if (bag_size < n) {
            rows = sample_without_replacement(n, bag_size, rng);
        } else {
            rows.resize(n);
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        std::vector<std::size_t> features;
        if (n_cols < x.cols()) {
            features = sample_without_replacement(x.cols(), n_cols, rng);
        } else {
            features.resize(x.cols());
            std::iota(features.begin(), features.end(), std::size_t{0});
        }

        TreeGrower grower(binned, g, h, params, std::move(features), 1e-12 * (1.0 + g_sq), pool);
        RegressionTree tree = grower.grow(std::move(rows));
        for (std::size_t i = 0; i < n; ++i) raw[i] += tree.predict(x.row(i));
        model.trees_.push_back(std::move(tree));
        model.train_loss_history_.push_back(training_loss(task, y, raw));
    }
    return model;
}

std::vector<double> GbdtModel::raw_scores(const Matrix& x) const {
    if (x.cols() != n_features_) {
        throw std::invalid_argument("gbdt predict: expected " + std::to_string(n_features_) +
                                    " features, got " + std::to_string(x.cols()));
    }
    std::vector<double> out(x.rows(), init_score_);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto row = x.row(r);
        for (const auto& t : trees_) out[r] += t.predict(row);
    }
    return out;
}

std::vector<double> GbdtModel::predict(const Matrix& x) const {
    auto out = raw_scores(x);
    if (task_ == Task::binary_classification)
        for (auto& v : out) v = clamp_probability(sigmoid(v));
    return out;
}

std::vector<double> GbdtModel::feature_importance() const {
    std::vector<double> imp(n_features_, 0.0);
    for (const auto& t : trees_)
        for (const auto& node : t.nodes())
            if (!node.is_leaf()) imp[static_cast<std::size_t>(node.feature)] += std::max(0.0, node.gain);
    return imp;
}

nlohmann::json GbdtModel::to_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) trees.push_back(t.to_json());
    return {{"task", std::string(to_string(task_))},
            {"n_features", n_features_},
            {"init_score", init_score_},
            {"trees", trees}};
}

GbdtModel GbdtModel::from_json(const nlohmann::json& j) {
    std::vector<RegressionTree> trees;
    for (const auto& t : j.at("trees")) trees.push_back(RegressionTree::from_json(t));
    GbdtModel m(parse_task(j.at("task").get<std::string>()), j.at("n_features").get<std::size_t>(),
                j.at("init_score").get<double>(), std::move(trees));
    for (const auto& t : m.trees_)
        for (const auto& node : t.nodes())
            if (!node.is_leaf() && static_cast<std::size_t>(node.feature) >= m.n_features_)
                throw std::invalid_argument("gbdt from_json: split feature out of range");
    return m;
}

}  // namespace afsbm
