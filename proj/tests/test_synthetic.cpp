#include <cmath>
#include <numeric>

#include "afsbm/synthetic.hpp"
#include "doctest.h"

using namespace afsbm;

TEST_CASE("synthetic: informative term at analytic points") {
    CHECK(informative_term(1.0) == doctest::Approx(1.0 + std::sin(1.0) + std::cos(1.0)));
    CHECK(informative_term(1.0) == doctest::Approx(2.38177).epsilon(1e-5));
    CHECK(informative_term(10.0) == doctest::Approx(20.0 + std::sin(10.0) + std::cos(10.0)));
}

TEST_CASE("synthetic: noiseless single sample") {
    SyntheticSpec s;
    s.n_samples = 1;
    s.n_features = 1;
    s.n_informative = 1;
    s.noise_variance = 0.0;
    s.feature_low = s.feature_high = 1.0;
    const auto g = generate(s);
    CHECK(g.data.targets[0] == doctest::Approx(2.38177).epsilon(1e-5));
    s.feature_low = s.feature_high = 10.0;
    CHECK(generate(s).data.targets[0] == doctest::Approx(20.0 + std::sin(10.0) + std::cos(10.0)));
}

TEST_CASE("synthetic: shape, ground truth, determinism") {
    SyntheticSpec s;
    s.seed = 5;
    const auto a = generate(s);
    CHECK(a.data.rows() == 300);
    CHECK(a.data.cols() == 100);
    CHECK(a.informative.size() == 10);
    CHECK(a.informative.back() == 9);
    CHECK(a.data.feature_names[42] == "x42");
    const auto b = generate(s);
    CHECK(a.data.features == b.data.features);
    CHECK(a.data.targets == b.data.targets);
    for (double v : a.data.features.data()) {
        CHECK(v >= s.feature_low);
        CHECK(v <= s.feature_high);
    }
}

TEST_CASE("synthetic: redundant columns have no effect on y") {
    SyntheticSpec s;
    s.seed = 8;
    const auto a = generate(s);
    s.redundant_seed = 12345;
    const auto b = generate(s);
    CHECK(a.data.targets == b.data.targets);
    bool redundant_differs = false;
    for (std::size_t r = 0; r < 300; ++r) {
        for (std::size_t j = 0; j < 10; ++j) CHECK(a.data.features(r, j) == b.data.features(r, j));
        redundant_differs |= a.data.features(r, 50) != b.data.features(r, 50);
    }
    CHECK(redundant_differs);
}

TEST_CASE("synthetic: empirical noise variance within 10%") {
    SyntheticSpec s;
    s.n_samples = 20000;
    s.n_features = 2;
    s.n_informative = 2;
    s.seed = 1;
    const auto g = generate(s);
    std::vector<double> eps(s.n_samples);
    for (std::size_t i = 0; i < s.n_samples; ++i)
        eps[i] = g.data.targets[i] - informative_term(g.data.features(i, 0)) - informative_term(g.data.features(i, 1));
    const double m = std::accumulate(eps.begin(), eps.end(), 0.0) / static_cast<double>(eps.size());
    double v = 0.0;
    for (double e : eps) v += (e - m) * (e - m);
    v /= static_cast<double>(eps.size());
    CHECK(std::abs(v - s.noise_variance) <= 0.1 * s.noise_variance);
}

TEST_CASE("synthetic: invalid specs") {
    SyntheticSpec s;
    s.feature_low = 0.0;
    CHECK_THROWS(generate(s));
    s = {};
    s.n_informative = 101;
    CHECK_THROWS(generate(s));
    s = {};
    s.noise_variance = -1.0;
    CHECK_THROWS(generate(s));
}
