#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "afsbm/dataset.hpp"

namespace afsbm {

// A block of engineered columns. Row r corresponds to series position first_t + r.
struct FeatureBlock {
    Matrix values;
    std::vector<std::string> names;
    std::size_t first_t = 0;
};

// Row t holds y[t - lag] for each lag; target is y[t]. Rows with an undefined lag are dropped.
Dataset build_lag_features(std::span<const double> series, std::span<const std::size_t> lags);

// Rolling mean and population std over the w values strictly before t, per window.
FeatureBlock build_rolling_features(std::span<const double> series,
                                    std::span<const std::size_t> windows);

struct CalendarPoint {
    int year = 0;
    int month = 1;
    int day = 1;
    int hour = 0;
};

// Accepts YYYY-MM-DD with an optional 'T' or ' ' followed by HH[:MM[:SS[.fff]]] and a
// trailing zone designator, which is ignored.
CalendarPoint parse_timestamp(const std::string& text);

// sin/cos of 2*pi*month/12, 2*pi*day/31, 2*pi*hour/24 (six columns, one row per stamp).
FeatureBlock build_time_encodings(std::span<const std::string> timestamps);

struct TimeSeriesRecipe {
    std::vector<std::size_t> lags{1, 2, 3, 7, 14, 28};
    std::vector<std::size_t> windows{4, 7, 28};
    bool time_encodings = true;
};

// Lags, rolling statistics and (when timestamps are given) calendar encodings aligned on
// the rows where every feature is defined. Timestamps of kept rows are carried over.
Dataset build_time_series_dataset(std::span<const double> series,
                                  const std::vector<std::string>* timestamps,
                                  const TimeSeriesRecipe& recipe);

}  // namespace afsbm
