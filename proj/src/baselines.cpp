#include "afsbm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace afsbm {

std::string_view to_string(BaselineMethod method) {
    switch (method) {
        case BaselineMethod::cross_correlation: return "cross_correlation";
        case BaselineMethod::mutual_information: return "mutual_information";
        case BaselineMethod::rfe: return "rfe";
    }
    return "unknown";
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
    if (x.empty()) return 0.0;
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> cross_correlation_scores(const Matrix& x, std::span<const double> y) {
    if (x.rows() != y.size()) throw std::invalid_argument("cross_correlation: length mismatch");
    std::vector<double> r(x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) r[j] = pearson(x.column(j), y);
    return r;
}

BaselineSelection cross_correlation_select(const Matrix& x, std::span<const double> y, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("cross_correlation: gamma must lie in [0, 1]");
    BaselineSelection out;
    out.scores = cross_correlation_scores(x, y);
    out.mask = BinaryMask::zeros(x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j)
        if (std::abs(out.scores[j]) > gamma) out.mask.set(j, true);
    return out;
}

namespace {

std::vector<int> equal_width_bins(std::span<const double> v, int bins) {
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it, hi = *hi_it;
    std::vector<int> out(v.size(), 0);
    if (hi == lo) return out;
    const double width = (hi - lo) / bins;
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = std::min(bins - 1, static_cast<int>((v[i] - lo) / width));
    return out;
}

std::vector<int> class_bins(std::span<const double> v, int& n_classes) {
    std::map<double, int> labels;
    for (double x : v) labels.emplace(x, 0);
    int next = 0;
    for (auto& [label, code] : labels) code = next++;
    n_classes = next;
    std::vector<int> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = labels.at(v[i]);
    return out;
}

double plug_in_mi(const std::vector<int>& bx, int nx, const std::vector<int>& by, int ny) {
    const double n = static_cast<double>(bx.size());
    std::vector<double> joint(static_cast<std::size_t>(nx * ny), 0.0), px(nx, 0.0), py(ny, 0.0);
    for (std::size_t i = 0; i < bx.size(); ++i) {
        joint[static_cast<std::size_t>(bx[i] * ny + by[i])] += 1.0;
        px[bx[i]] += 1.0;
        py[by[i]] += 1.0;
    }
    double mi = 0.0;
    for (int a = 0; a < nx; ++a) {
        for (int b = 0; b < ny; ++b) {
            const double c = joint[static_cast<std::size_t>(a * ny + b)];
            if (c == 0.0) continue;
            mi += (c / n) * std::log(c * n / (px[a] * py[b]));
        }
    }
    return std::max(0.0, mi);
}

}  // namespace

double mutual_information(std::span<const double> x, std::span<const double> y, int bins, bool y_is_class) {
    if (bins < 2) throw std::invalid_argument("mutual_information: mi_bins must be >= 2");
    if (x.size() != y.size()) throw std::invalid_argument("mutual_information: length mismatch");
    if (x.empty()) return 0.0;
    const auto bx = equal_width_bins(x, bins);
    int ny = bins;
    const auto by = y_is_class ? class_bins(y, ny) : equal_width_bins(y, bins);
    return plug_in_mi(bx, bins, by, ny);
}

std::vector<double> mutual_information_scores(const Matrix& x, std::span<const double> y, int bins,
                                              bool y_is_class) {
    if (bins < 2) throw std::invalid_argument("mutual_information: mi_bins must be >= 2");
    if (x.rows() != y.size()) throw std::invalid_argument("mutual_information: length mismatch");
    int ny = bins;
    const auto by = y_is_class ? class_bins(y, ny) : equal_width_bins(y, bins);
    std::vector<double> out(x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) out[j] = plug_in_mi(equal_width_bins(x.column(j), bins), bins, by, ny);
    return out;
}

BinaryMask top_k_mask(std::span<const double> scores, std::size_t k) {
    if (k > scores.size())
        throw std::invalid_argument("top_k: k = " + std::to_string(k) + " exceeds " + std::to_string(scores.size()));
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    BinaryMask mask = BinaryMask::zeros(scores.size());
    for (std::size_t i = 0; i < k; ++i) mask.set(order[i], true);
    return mask;
}

BaselineSelection mutual_information_select(const Matrix& x, std::span<const double> y, std::size_t k,
                                            int mi_bins, bool y_is_class) {
    if (k == 0 || k > x.cols())
        throw std::invalid_argument("mutual_information_select: k must lie in [1, M]");
    BaselineSelection out;
    out.scores = mutual_information_scores(x, y, mi_bins, y_is_class);
    out.mask = top_k_mask(out.scores, k);
    return out;
}

RfePath rfe_path(const LearnerConfig& learner, const Matrix& x, std::span<const double> y, std::size_t k) {
    if (learner.kind != LearnerKind::gbdt) throw std::invalid_argument("rfe: requires a gbdt learner");
    if (k == 0 || k > x.cols()) throw std::invalid_argument("rfe: k must lie in [1, M]");
    RfePath path;
    std::vector<std::size_t> active(x.cols());
    std::iota(active.begin(), active.end(), std::size_t{0});
    while (active.size() > k) {
        const Model model = fit(learner, x.select_columns(active), y);
        ++path.fit_calls;
        RfeRound round;
        round.active = active;
        round.importance = feature_importance(model);
        const auto weakest = static_cast<std::size_t>(
            std::min_element(round.importance.begin(), round.importance.end()) - round.importance.begin());
        round.eliminated = active[weakest];
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(weakest));
        path.rounds.push_back(std::move(round));
    }
    path.survivors = active;
    return path;
}

BinaryMask rfe_mask_from_path(const RfePath& path, std::size_t n_features, std::size_t k) {
    if (k < path.survivors.size() || k > n_features)
        throw std::invalid_argument("rfe_mask_from_path: k outside the computed path");
    BinaryMask mask = BinaryMask::ones(n_features);
    const std::size_t removals = n_features - k;
    for (std::size_t i = 0; i < removals; ++i) mask.set(path.rounds.at(i).eliminated, false);
    return mask;
}

BaselineSelection rfe_select(const LearnerConfig& learner, const Matrix& x, std::span<const double> y,
                             std::size_t k) {
    const RfePath path = rfe_path(learner, x, y, k);
    BaselineSelection out;
    out.mask = rfe_mask_from_path(path, x.cols(), k);
    // Score = round in which the feature was eliminated; survivors get M.
    out.scores.assign(x.cols(), static_cast<double>(x.cols()));
    for (std::size_t r = 0; r < path.rounds.size(); ++r)
        out.scores[path.rounds[r].eliminated] = static_cast<double>(r);
    return out;
}

}  // namespace afsbm
