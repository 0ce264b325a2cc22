#include <cmath>
#include <numbers>

#include "afsbm/time_features.hpp"
#include "doctest.h"

using namespace afsbm;

TEST_CASE("lags: direct shift and dropped warm-up rows") {
    const std::vector<double> s{1, 2, 3, 4};
    const std::vector<std::size_t> one{1};
    const auto d = build_lag_features(s, one);
    CHECK(d.features == Matrix::from_rows({{1}, {2}, {3}}));
    CHECK(d.targets == std::vector<double>{2, 3, 4});
    CHECK(d.feature_names == std::vector<std::string>{"lag_1"});

    const std::vector<std::size_t> two{1, 2};
    const auto d2 = build_lag_features(s, two);
    CHECK(d2.rows() == 2);
    CHECK(d2.targets == std::vector<double>{3, 4});
    CHECK(d2.features == Matrix::from_rows({{2, 1}, {3, 2}}));

    const std::vector<std::size_t> ten{10};
    CHECK_THROWS(build_lag_features(s, ten));
    CHECK_THROWS(build_lag_features(s, std::vector<std::size_t>{}));
}

TEST_CASE("rolling: mean, zero std on constants, window 1") {
    const std::vector<double> s{2, 4, 6, 8};
    const std::vector<std::size_t> w2{2};
    const auto b = build_rolling_features(s, w2);
    CHECK(b.first_t == 2);
    CHECK(b.values(0, 0) == 3.0);
    CHECK(b.values(0, 1) == 1.0);  // population std of {2, 4}
    CHECK(b.values(1, 0) == 5.0);

    const std::vector<double> flat(10, 3.5);
    const std::vector<std::size_t> w3{3};
    const auto c = build_rolling_features(flat, w3);
    for (std::size_t r = 0; r < c.values.rows(); ++r) CHECK(c.values(r, 1) == 0.0);

    const std::vector<std::size_t> w1{1};
    const auto one = build_rolling_features(s, w1);
    CHECK(one.first_t == 1);
    for (std::size_t r = 0; r < one.values.rows(); ++r) {
        CHECK(one.values(r, 0) == s[r]);
        CHECK(one.values(r, 1) == 0.0);
    }

    CHECK_THROWS(build_rolling_features(s, std::vector<std::size_t>{0}));
    CHECK_THROWS(build_rolling_features(s, std::vector<std::size_t>{5}));
}

TEST_CASE("time encodings: hour phases") {
    const std::vector<std::string> stamps{"2021-03-04T00:00:00", "2021-03-04 06:00", "2021-03-04T12"};
    const auto b = build_time_encodings(stamps);
    REQUIRE(b.values.cols() == 6);
    const auto col = [&](const std::string& name) {
        for (std::size_t j = 0; j < b.names.size(); ++j)
            if (b.names[j] == name) return j;
        FAIL("missing column " << name);
        return std::size_t{0};
    };
    const auto hs = col("sin_hour"), hc = col("cos_hour");
    CHECK(b.values(0, hs) == doctest::Approx(0.0));
    CHECK(b.values(0, hc) == doctest::Approx(1.0));
    CHECK(b.values(1, hs) == doctest::Approx(1.0));
    CHECK(std::abs(b.values(1, hc)) < 1e-12);
    CHECK(std::abs(b.values(2, hs)) < 1e-12);
    CHECK(b.values(2, hc) == doctest::Approx(-1.0));
    CHECK(b.values(0, col("sin_month")) == doctest::Approx(std::sin(2 * std::numbers::pi * 3 / 12)));
    CHECK(b.values(0, col("cos_day")) == doctest::Approx(std::cos(2 * std::numbers::pi * 4 / 31)));

    CHECK_THROWS(build_time_encodings(std::vector<std::string>{"yesterday"}));
    CHECK_THROWS(parse_timestamp("2021-13-01"));
}

TEST_CASE("no look-ahead: perturbing the future leaves earlier rows unchanged") {
    std::vector<double> s(80);
    for (std::size_t t = 0; t < s.size(); ++t) s[t] = std::sin(0.3 * static_cast<double>(t)) + 0.01 * static_cast<double>(t);
    TimeSeriesRecipe recipe;
    recipe.time_encodings = false;
    const auto base = build_time_series_dataset(s, nullptr, recipe);

    const std::size_t cut = 60;  // series position
    auto changed = s;
    for (std::size_t t = cut; t < changed.size(); ++t) changed[t] += 100.0;
    const auto after = build_time_series_dataset(changed, nullptr, recipe);
    REQUIRE(base.rows() == after.rows());
    const std::size_t first_t = s.size() - base.rows();
    for (std::size_t r = 0; r + first_t <= cut; ++r) {
        for (std::size_t c = 0; c < base.cols(); ++c) CHECK(base.features(r, c) == after.features(r, c));
    }
    // the row at t = cut sees none of the change in its features but its target moves
    CHECK(after.targets[cut - first_t] != base.targets[cut - first_t]);
}

TEST_CASE("time series dataset aligns all blocks") {
    std::vector<double> s(40);
    std::vector<std::string> stamps;
    for (std::size_t t = 0; t < s.size(); ++t) {
        s[t] = static_cast<double>(t);
        char buf[32];
        std::snprintf(buf, sizeof buf, "2020-01-%02zuT%02zu:00", 1 + t / 24, t % 24);
        stamps.push_back(buf);
    }
    TimeSeriesRecipe recipe;
    recipe.lags = {1, 3};
    recipe.windows = {4};
    const auto d = build_time_series_dataset(s, &stamps, recipe);
    CHECK(d.rows() == 36);  // first complete row is t = 4
    CHECK(d.cols() == 2 + 2 + 6);
    CHECK(d.targets.front() == 4.0);
    CHECK(d.features(0, 0) == 3.0);  // lag_1
    CHECK(d.features(0, 1) == 1.0);  // lag_3
    CHECK(d.features(0, 2) == 1.5);  // roll_mean_4 over {0,1,2,3}
    REQUIRE(d.timestamps);
    CHECK(d.timestamps->front() == stamps[4]);
}
