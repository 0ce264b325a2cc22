#include "afsbm/time_features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace afsbm {

Dataset build_lag_features(std::span<const double> series, std::span<const std::size_t> lags) {
    if (lags.empty()) throw std::invalid_argument("build_lag_features: empty lag list");
    std::size_t max_lag = 0;
    for (auto lag : lags) {
        if (lag == 0) throw std::invalid_argument("build_lag_features: lags must be positive");
        max_lag = std::max(max_lag, lag);
    }
    if (max_lag >= series.size()) {
        throw std::invalid_argument("build_lag_features: lag " + std::to_string(max_lag) +
                                    " >= series length " + std::to_string(series.size()));
    }
    const std::size_t n_rows = series.size() - max_lag;
    Dataset d;
    d.features = Matrix(n_rows, lags.size());
    d.targets.resize(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
        const std::size_t t = max_lag + r;
        for (std::size_t j = 0; j < lags.size(); ++j) d.features(r, j) = series[t - lags[j]];
        d.targets[r] = series[t];
    }
    for (auto lag : lags) d.feature_names.push_back("lag_" + std::to_string(lag));
    d.validate();
    return d;
}

FeatureBlock build_rolling_features(std::span<const double> series,
                                    std::span<const std::size_t> windows) {
    if (windows.empty()) throw std::invalid_argument("build_rolling_features: empty window list");
    std::size_t max_w = 0;
    for (auto w : windows) {
        if (w == 0) throw std::invalid_argument("build_rolling_features: window of 0");
        max_w = std::max(max_w, w);
    }
    if (max_w > series.size()) {
        throw std::invalid_argument("build_rolling_features: window " + std::to_string(max_w) +
                                    " > series length " + std::to_string(series.size()));
    }
    FeatureBlock block;
    block.first_t = max_w;
    const std::size_t n_rows = series.size() - max_w;
    block.values = Matrix(n_rows, 2 * windows.size());
    for (std::size_t r = 0; r < n_rows; ++r) {
        const std::size_t t = max_w + r;
        for (std::size_t j = 0; j < windows.size(); ++j) {
            const std::size_t w = windows[j];
            const auto window = series.subspan(t - w, w);
            double sum = 0.0;
            for (double v : window) sum += v;
            const double mean = sum / static_cast<double>(w);
            double ss = 0.0;
            for (double v : window) ss += (v - mean) * (v - mean);
            block.values(r, 2 * j) = mean;
            block.values(r, 2 * j + 1) = std::sqrt(ss / static_cast<double>(w));
        }
    }
    for (auto w : windows) {
        block.names.push_back("roll_mean_" + std::to_string(w));
        block.names.push_back("roll_std_" + std::to_string(w));
    }
    return block;
}

CalendarPoint parse_timestamp(const std::string& text) {
    CalendarPoint p;
    int consumed = 0;
    if (std::sscanf(text.c_str(), "%4d-%2d-%2d%n", &p.year, &p.month, &p.day, &consumed) != 3 ||
        consumed != 10) {
        throw std::invalid_argument("parse_timestamp: cannot parse '" + text + "'");
    }
    std::string rest = text.substr(10);
    if (!rest.empty()) {
        if (rest[0] != 'T' && rest[0] != ' ')
            throw std::invalid_argument("parse_timestamp: cannot parse '" + text + "'");
        int minute = 0;
        int n = 0;
        if (std::sscanf(rest.c_str() + 1, "%2d%n", &p.hour, &n) != 1)
            throw std::invalid_argument("parse_timestamp: missing hour in '" + text + "'");
        if (rest.size() > 1 + static_cast<std::size_t>(n) && rest[1 + n] == ':') {
            if (std::sscanf(rest.c_str() + 2 + n, "%2d", &minute) != 1)
                throw std::invalid_argument("parse_timestamp: bad minute in '" + text + "'");
        }
        if (minute < 0 || minute > 59)
            throw std::invalid_argument("parse_timestamp: minute out of range in '" + text + "'");
    }
    if (p.month < 1 || p.month > 12 || p.day < 1 || p.day > 31 || p.hour < 0 || p.hour > 23)
        throw std::invalid_argument("parse_timestamp: field out of range in '" + text + "'");
    return p;
}

FeatureBlock build_time_encodings(std::span<const std::string> timestamps) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    FeatureBlock block;
    block.values = Matrix(timestamps.size(), 6);
    for (std::size_t r = 0; r < timestamps.size(); ++r) {
        const auto p = parse_timestamp(timestamps[r]);
        const double phases[3] = {two_pi * p.month / 12.0, two_pi * p.day / 31.0,
                                  two_pi * p.hour / 24.0};
        for (int k = 0; k < 3; ++k) {
            block.values(r, 2 * k) = std::sin(phases[k]);
            block.values(r, 2 * k + 1) = std::cos(phases[k]);
        }
    }
    block.names = {"sin_month", "cos_month", "sin_day", "cos_day", "sin_hour", "cos_hour"};
    return block;
}

Dataset build_time_series_dataset(std::span<const double> series,
                                  const std::vector<std::string>* timestamps,
                                  const TimeSeriesRecipe& recipe) {
    if (timestamps && timestamps->size() != series.size())
        throw std::invalid_argument("build_time_series_dataset: timestamp count mismatch");
    if (recipe.lags.empty() && recipe.windows.empty() && !(recipe.time_encodings && timestamps))
        throw std::invalid_argument("build_time_series_dataset: recipe produces no features");

    std::size_t first_t = 0;
    for (auto l : recipe.lags) first_t = std::max(first_t, l);
    for (auto w : recipe.windows) first_t = std::max(first_t, w);
    if (first_t >= series.size())
        throw std::invalid_argument("build_time_series_dataset: series too short for recipe");

    std::vector<const FeatureBlock*> blocks;
    FeatureBlock lag_block;
    if (!recipe.lags.empty()) {
        auto lagged = build_lag_features(series, recipe.lags);
        lag_block.values = std::move(lagged.features);
        lag_block.names = std::move(lagged.feature_names);
        lag_block.first_t = *std::max_element(recipe.lags.begin(), recipe.lags.end());
        blocks.push_back(&lag_block);
    }
    FeatureBlock roll_block;
    if (!recipe.windows.empty()) {
        roll_block = build_rolling_features(series, recipe.windows);
        blocks.push_back(&roll_block);
    }
    FeatureBlock time_block;
    if (recipe.time_encodings && timestamps) {
        time_block = build_time_encodings(*timestamps);
        blocks.push_back(&time_block);
    }

    const std::size_t n_rows = series.size() - first_t;
    std::size_t n_cols = 0;
    for (const auto* b : blocks) n_cols += b->values.cols();

    Dataset d;
    d.features = Matrix(n_rows, n_cols);
    d.targets.resize(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
        const std::size_t t = first_t + r;
        std::size_t c0 = 0;
        for (const auto* b : blocks) {
            const std::size_t br = t - b->first_t;
            for (std::size_t c = 0; c < b->values.cols(); ++c) d.features(r, c0 + c) = b->values(br, c);
            c0 += b->values.cols();
        }
        d.targets[r] = series[t];
    }
    for (const auto* b : blocks) d.feature_names.insert(d.feature_names.end(), b->names.begin(), b->names.end());
    if (timestamps) {
        d.timestamps = std::vector<std::string>(timestamps->begin() + static_cast<std::ptrdiff_t>(first_t),
                                                timestamps->end());
    }
    d.validate();
    return d;
}

}  // namespace afsbm
