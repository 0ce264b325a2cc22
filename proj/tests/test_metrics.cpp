#include <cmath>
#include <numbers>

#include "afsbm/metrics.hpp"
#include "doctest.h"

using namespace afsbm;

TEST_CASE("mse: trivial cases") {
    CHECK(mse(std::vector<double>{1, 2}, std::vector<double>{1, 2}) == 0.0);
    CHECK(mse(std::vector<double>{0, 0}, std::vector<double>{1, 1}) == 1.0);
    CHECK(mse(std::vector<double>{1}, std::vector<double>{3}) == 4.0);
    CHECK(mse(std::vector<double>{1, 5}, std::vector<double>{2, 0}) == mse(std::vector<double>{2, 0}, std::vector<double>{1, 5}));
    CHECK_THROWS(mse(std::vector<double>{1}, std::vector<double>{1, 2}));
}

TEST_CASE("cross entropy: analytic values and clipping") {
    CHECK(std::abs(cross_entropy(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5}) - std::numbers::ln2) < 1e-9);
    CHECK(cross_entropy(std::vector<double>{1, 0}, std::vector<double>{1, 0}) < 1e-11);
    const double wrong = cross_entropy(std::vector<double>{1}, std::vector<double>{0.0});
    CHECK(std::isfinite(wrong));
    CHECK(wrong == doctest::Approx(-std::log(kProbabilityEpsilon)));
    CHECK_THROWS(cross_entropy(std::vector<double>{1}, std::vector<double>{1.5}));
    CHECK_THROWS(cross_entropy(std::vector<double>{2}, std::vector<double>{0.5}));
}

TEST_CASE("cross entropy: one-hot matrix form") {
    const Matrix y = Matrix::from_rows({{1, 0, 0}, {0, 1, 0}});
    const Matrix p = Matrix::from_rows({{1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.25, 0.5, 0.25}});
    CHECK(cross_entropy(y, p) == doctest::Approx((std::log(3.0) + std::log(2.0)) / 2));
    CHECK_THROWS(cross_entropy(y, Matrix::from_rows({{0.5, 0.6, 0}, {0, 1, 0}})));
}

TEST_CASE("cross entropy: minimized at the empirical rate") {
    const std::vector<double> y{1, 1, 1, 0};
    double best_p = 0.0, best = 1e300;
    for (int i = 1; i < 100; ++i) {
        const double p = i / 100.0;
        const double v = cross_entropy(y, std::vector<double>(4, p));
        if (v < best) {
            best = v;
            best_p = p;
        }
    }
    CHECK(best_p == doctest::Approx(0.75));
}

TEST_CASE("averaged loss sequences: worked examples") {
    const auto c = averaged_loss_sequences({{0.37, 0.37, 0.37}});
    CHECK(c.l_ave == std::vector<double>{0.37, 0.37, 0.37});
    CHECK(c.l_ave2 == std::vector<double>{0.37, 0.37, 0.37});

    const auto two = averaged_loss_sequences({{2}, {0, 4}});
    CHECK(two.l_ave == std::vector<double>{1, 2});
    CHECK(two.l_ave2 == std::vector<double>{1, 1.5});

    const auto zero = averaged_loss_sequences({{0, 0}, {0, 0, 0}});
    CHECK(zero.l_ave == std::vector<double>{0, 0, 0});
    CHECK(zero.l_ave2 == std::vector<double>{0, 0, 0});

    CHECK_THROWS(averaged_loss_sequences({}));
}

TEST_CASE("averaged loss sequences: permutation invariance and unpadded variant") {
    const std::vector<std::vector<double>> a{{1, 2, 3}, {4}, {0.5, 0.25}};
    const std::vector<std::vector<double>> b{{0.5, 0.25}, {1, 2, 3}, {4}};
    CHECK(averaged_loss_sequences(a).l_ave2 == averaged_loss_sequences(b).l_ave2);

    const auto u = averaged_loss_sequences_unpadded({{2}, {0, 4}});
    CHECK(u.l_ave == std::vector<double>{1, 4});
    CHECK(u.l_ave2 == std::vector<double>{1, 2.5});
}
