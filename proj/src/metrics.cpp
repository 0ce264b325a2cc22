#include "afsbm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace afsbm {

std::string_view to_string(LossKind kind) {
    return kind == LossKind::mse ? "mse" : "cross_entropy";
}

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* who) {
    if (a != b) {
        throw std::invalid_argument(std::string(who) + ": length mismatch (" + std::to_string(a) +
                                    " vs " + std::to_string(b) + ")");
    }
    if (a == 0) throw std::invalid_argument(std::string(who) + ": empty input");
}

double clip_probability(double p) {
    // Values outside [0,1] by more than rounding noise are caller errors.
    if (!(p >= -1e-9 && p <= 1.0 + 1e-9))
        throw std::invalid_argument("cross_entropy: probability " + std::to_string(p) +
                                    " outside [0, 1]");
    return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

}  // namespace

double mse(std::span<const double> y, std::span<const double> y_hat) {
    check_lengths(y.size(), y_hat.size(), "mse");
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = y[i] - y_hat[i];
        sum += e * e;
    }
    const double out = sum / static_cast<double>(y.size());
    if (!std::isfinite(out)) throw std::invalid_argument("mse: non-finite input");
    return out;
}

double cross_entropy(std::span<const double> y, std::span<const double> p_hat) {
    check_lengths(y.size(), p_hat.size(), "cross_entropy");
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] != 0.0 && y[i] != 1.0)
            throw std::invalid_argument("cross_entropy: binary labels must be 0 or 1");
        const double p = clip_probability(p_hat[i]);
        sum -= y[i] == 1.0 ? std::log(p) : std::log(1.0 - p);
    }
    return sum / static_cast<double>(y.size());
}

double cross_entropy(const Matrix& y_one_hot, const Matrix& p_hat) {
    if (y_one_hot.rows() != p_hat.rows() || y_one_hot.cols() != p_hat.cols())
        throw std::invalid_argument("cross_entropy: shape mismatch");
    if (y_one_hot.rows() == 0) throw std::invalid_argument("cross_entropy: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < p_hat.rows(); ++i) {
        double row_sum = 0.0;
        for (std::size_t c = 0; c < p_hat.cols(); ++c) row_sum += p_hat(i, c);
        if (std::abs(row_sum - 1.0) > 1e-9)
            throw std::invalid_argument("cross_entropy: probability row " + std::to_string(i) +
                                        " does not sum to 1");
        for (std::size_t c = 0; c < p_hat.cols(); ++c) {
            if (y_one_hot(i, c) != 0.0) sum -= y_one_hot(i, c) * std::log(clip_probability(p_hat(i, c)));
        }
    }
    return sum / static_cast<double>(p_hat.rows());
}

double loss(LossKind kind, std::span<const double> y, std::span<const double> prediction) {
    return kind == LossKind::mse ? mse(y, prediction) : cross_entropy(y, prediction);
}

std::vector<double> squared_errors(std::span<const double> y, std::span<const double> y_hat) {
    check_lengths(y.size(), y_hat.size(), "squared_errors");
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    return out;
}

namespace {

std::vector<double> running_mean(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    // incremental form: a constant input stays bit-exact
    double mean = 0.0;
    for (std::size_t t = 0; t < v.size(); ++t) {
        mean += (v[t] - mean) / static_cast<double>(t + 1);
        out[t] = mean;
    }
    return out;
}

std::size_t longest(const std::vector<std::vector<double>>& series) {
    if (series.empty()) throw std::invalid_argument("averaged_loss_sequences: no series");
    std::size_t t_max = 0;
    for (const auto& s : series) t_max = std::max(t_max, s.size());
    return t_max;
}

}  // namespace

AveragedLosses averaged_loss_sequences(const std::vector<std::vector<double>>& per_series_losses) {
    const std::size_t t_max = longest(per_series_losses);
    AveragedLosses out;
    out.l_ave.assign(t_max, 0.0);
    for (const auto& s : per_series_losses)
        for (std::size_t t = 0; t < s.size(); ++t) out.l_ave[t] += s[t];
    const double n = static_cast<double>(per_series_losses.size());
    for (auto& v : out.l_ave) v /= n;
    out.l_ave2 = running_mean(out.l_ave);
    return out;
}

AveragedLosses averaged_loss_sequences_unpadded(
    const std::vector<std::vector<double>>& per_series_losses) {
    const std::size_t t_max = longest(per_series_losses);
    AveragedLosses out;
    out.l_ave.assign(t_max, 0.0);
    std::vector<std::size_t> counts(t_max, 0);
    for (const auto& s : per_series_losses) {
        for (std::size_t t = 0; t < s.size(); ++t) {
            out.l_ave[t] += s[t];
            ++counts[t];
        }
    }
    for (std::size_t t = 0; t < t_max; ++t) out.l_ave[t] /= static_cast<double>(counts[t]);
    out.l_ave2 = running_mean(out.l_ave);
    return out;
}

}  // namespace afsbm
