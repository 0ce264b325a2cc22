#include <algorithm>
#include <cmath>
#include <numeric>

#include "afsbm/gbdt.hpp"
#include "afsbm/learners.hpp"
#include "afsbm/mlp.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace afsbm;
using afsbm::test::uniform_matrix;

namespace {

double variance(const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

// Exact greedy stump boosting on one feature: every midpoint between distinct sorted
// values is a candidate, gain = GL^2/nL + GR^2/nR - G^2/n, leaves shrunk by lr.
std::vector<double> stump_boosting_oracle(const std::vector<double>& x, const std::vector<double>& y, int rounds,
                                          double lr) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    std::vector<double> f(n, mean);
    for (int it = 0; it < rounds; ++it) {
        std::vector<double> g(n);
        double g_total = 0.0, g_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            g[i] = f[i] - y[i];
            g_total += g[i];
            g_sq += g[i] * g[i];
        }
        double best_gain = 1e-12 * (1.0 + g_sq), threshold = 0.0, gl_best = 0.0;
        std::size_t nl_best = 0;
        double gl = 0.0;
        for (std::size_t k = 0; k + 1 < n; ++k) {
            gl += g[order[k]];
            const double a = x[order[k]], b = x[order[k + 1]];
            if (a == b) continue;
            const double nl = static_cast<double>(k + 1), nr = static_cast<double>(n - k - 1);
            const double gr = g_total - gl;
            const double gain = gl * gl / nl + gr * gr / nr - g_total * g_total / static_cast<double>(n);
            if (gain > best_gain) {
                best_gain = gain;
                threshold = a + (b - a) / 2.0;
                gl_best = gl;
                nl_best = k + 1;
            }
        }
        if (nl_best == 0) continue;
        const double left = -gl_best / static_cast<double>(nl_best) * lr;
        const double right = -(g_total - gl_best) / static_cast<double>(n - nl_best) * lr;
        for (std::size_t i = 0; i < n; ++i) f[i] += x[i] <= threshold ? left : right;
    }
    return f;
}

LearnerConfig gbdt_config(int leaves, int trees, int min_child = 1) {
    LearnerConfig c;
    c.gbdt.num_leaves = leaves;
    c.gbdt.n_estimators = trees;
    c.gbdt.min_child_samples = min_child;
    return c;
}

}  // namespace

TEST_CASE("gbdt: stump forced to root predicts the training mean") {
    const Matrix x = uniform_matrix(30, 3, 1);
    std::vector<double> y(30);
    for (std::size_t i = 0; i < 30; ++i) y[i] = std::sin(static_cast<double>(i));
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 30.0;
    const Model m = fit(gbdt_config(1, 1), x, y);
    for (double p : predict(m, uniform_matrix(7, 3, 2))) CHECK(p == doctest::Approx(mean).epsilon(1e-14));
    for (double v : feature_importance(m)) CHECK(v == 0.0);
}

TEST_CASE("gbdt: y = 2 x1 fits well and matches exact stump boosting") {
    const std::size_t n = 50;
    Matrix x(n, 1);
    std::vector<double> xs(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = static_cast<double>((i * 37) % n) / static_cast<double>(n);  // distinct, shuffled
        x(i, 0) = xs[i];
        y[i] = 2.0 * xs[i];
    }
    auto c = gbdt_config(2, 100);
    const Model m = fit(c, x, y);
    const auto pred = predict(m, x);
    CHECK(mse(y, pred) < 0.01 * variance(y));

    const auto oracle = stump_boosting_oracle(xs, y, 100, c.gbdt.learning_rate);
    for (std::size_t i = 0; i < n; ++i) CHECK(pred[i] == doctest::Approx(oracle[i]).epsilon(1e-9));

    // the leaf-wise learner with more leaves only does better
    const Model deep = fit(gbdt_config(8, 100), x, y);
    CHECK(mse(y, predict(deep, x)) <= mse(y, pred));
}

TEST_CASE("gbdt: deterministic given seed, and across seeds without sampling") {
    const Matrix x = uniform_matrix(80, 4, 3);
    std::vector<double> y(80);
    for (std::size_t i = 0; i < 80; ++i) y[i] = x(i, 0) * x(i, 1) + std::cos(3 * x(i, 2));
    auto c = gbdt_config(6, 30, 3);
    c.gbdt.subsample = 0.7;
    c.gbdt.colsample_bytree = 0.5;
    c.seed = 11;
    const Matrix probe = uniform_matrix(20, 4, 4);
    CHECK(predict(fit(c, x, y), probe) == predict(fit(c, x, y), probe));

    c.gbdt.subsample = 1.0;
    c.gbdt.colsample_bytree = 1.0;
    auto c2 = c;
    c2.seed = 999;
    CHECK(predict(fit(c, x, y), probe) == predict(fit(c2, x, y), probe));
}

TEST_CASE("gbdt: training loss is non-increasing per stage") {
    const Matrix x = uniform_matrix(120, 5, 5);
    std::vector<double> y(120), labels(120);
    for (std::size_t i = 0; i < 120; ++i) {
        y[i] = x(i, 0) + std::sin(6 * x(i, 1)) + 0.1 * x(i, 4);
        labels[i] = y[i] > 1.0 ? 1.0 : 0.0;
    }
    for (int leaves : {2, 7, 31}) {
        GbdtParams p;
        p.num_leaves = leaves;
        p.n_estimators = 60;
        p.min_child_samples = 5;
        p.learning_rate = 0.5;
        for (Task task : {Task::regression, Task::binary_classification}) {
            const auto m = GbdtModel::train(p, task, 0, x, task == Task::regression ? y : labels);
            const auto& h = m.train_loss_history();
            REQUIRE(h.size() == 61);
            for (std::size_t k = 1; k < h.size(); ++k) CHECK(h[k] <= h[k - 1]);
        }
    }
}

TEST_CASE("gbdt: importance favours the informative feature") {
    const Matrix x = uniform_matrix(200, 2, 8);
    std::vector<double> y(200);
    for (std::size_t i = 0; i < 200; ++i) y[i] = x(i, 0);
    const auto imp = feature_importance(fit(gbdt_config(8, 20, 5), x, y));
    CHECK(imp[0] > imp[1]);
    for (double v : imp) CHECK(v >= 0.0);
}

TEST_CASE("gbdt: classification probabilities lie in (0, 1)") {
    const Matrix x = uniform_matrix(100, 2, 9);
    std::vector<double> y(100);
    for (std::size_t i = 0; i < 100; ++i) y[i] = x(i, 0) > 0.5 ? 1.0 : 0.0;
    auto c = gbdt_config(4, 200, 2);
    c.task = Task::binary_classification;
    c.gbdt.learning_rate = 0.5;
    for (double p : predict(fit(c, x, y), x)) {
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
    CHECK_THROWS(fit(c, x, std::vector<double>(100, 1.0)));
}

TEST_CASE("learners: errors") {
    const Matrix x = uniform_matrix(10, 2, 1);
    const std::vector<double> y(10, 1.0);
    CHECK_THROWS(fit(gbdt_config(4, 5), Matrix(0, 2), {}));
    CHECK_THROWS(fit(gbdt_config(4, 5), x, std::vector<double>(9, 1.0)));
    Matrix bad = x;
    bad(3, 1) = std::nan("");
    CHECK_THROWS(fit(gbdt_config(4, 5), bad, y));
    const Model m = fit(gbdt_config(4, 5), x, y);
    CHECK_THROWS(predict(m, uniform_matrix(3, 3, 1)));

    LearnerConfig c;
    c.gbdt.subsample = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.kind = LearnerKind::mlp;
    c.mlp.hidden_layer_sizes = {};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.mlp.hidden_layer_sizes = {4};
    c.mlp.alpha = -1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("models serialize and predict identically after a JSON round trip") {
    const Matrix x = uniform_matrix(60, 3, 12);
    std::vector<double> y(60);
    for (std::size_t i = 0; i < 60; ++i) y[i] = x(i, 0) - x(i, 2);
    LearnerConfig g = gbdt_config(5, 10, 3);
    LearnerConfig n;
    n.kind = LearnerKind::mlp;
    n.mlp.hidden_layer_sizes = {5, 3};
    n.mlp.max_epochs = 20;
    for (const auto& c : {g, n}) {
        const Model m = fit(c, x, y);
        const Model back = Model::from_json(nlohmann::json::parse(m.to_json().dump()));
        CHECK(predict(back, x) == predict(m, x));
        CHECK(back.config() == c);
    }
    CHECK(learner_config_from_json(to_json(n)) == n);
}

TEST_CASE("mlp: analytic gradient matches central differences") {
    const Matrix x = uniform_matrix(5, 3, 21, -1.0, 1.0);
    const std::vector<double> y_reg{0.3, -0.2, 0.9, 0.1, -0.7};
    const std::vector<double> y_cls{1, 0, 1, 1, 0};
    for (Activation act : {Activation::logistic, Activation::relu}) {
        for (Task task : {Task::regression, Task::binary_classification}) {
            MlpParams p;
            p.hidden_layer_sizes = {4, 3};
            p.activation = act;
            p.alpha = 0.05;
            MlpModel m = MlpModel::initialize(p, task, 3, 5);
            const auto& y = task == Task::regression ? y_reg : y_cls;
            std::vector<double> grad(m.parameter_count());
            m.objective_and_gradient(x, y, grad);
            const auto theta = m.parameters();
            double worst = 0.0;
            for (std::size_t k = 0; k < theta.size(); ++k) {
                const double h = 1e-6;
                auto t = theta;
                t[k] = theta[k] + h;
                m.set_parameters(t);
                const double up = m.objective(x, y);
                t[k] = theta[k] - h;
                m.set_parameters(t);
                const double down = m.objective(x, y);
                const double numeric = (up - down) / (2 * h);
                const double denom = std::max({std::abs(numeric), std::abs(grad[k]), 1e-6});
                worst = std::max(worst, std::abs(numeric - grad[k]) / denom);
            }
            m.set_parameters(theta);
            CHECK(worst <= 1e-4);
        }
    }
}

TEST_CASE("mlp: learns a smooth function and is reproducible") {
    const Matrix x = uniform_matrix(200, 2, 30, -1.0, 1.0);
    std::vector<double> y(200);
    for (std::size_t i = 0; i < 200; ++i) y[i] = 0.5 * x(i, 0) - 0.3 * x(i, 1) * x(i, 1);
    LearnerConfig c;
    c.kind = LearnerKind::mlp;
    c.mlp.hidden_layer_sizes = {20};
    c.mlp.learning_rate_init = 0.01;
    c.seed = 4;
    const Model m = fit(c, x, y);
    CHECK(mse(y, predict(m, x)) < 0.5 * variance(y));
    CHECK(predict(fit(c, x, y), x) == predict(m, x));
    CHECK_THROWS_AS(feature_importance(m), std::invalid_argument);
}

TEST_CASE("mlp: logistic output stays in (0, 1)") {
    const Matrix x = uniform_matrix(64, 2, 31, -1.0, 1.0);
    std::vector<double> y(64);
    for (std::size_t i = 0; i < 64; ++i) y[i] = x(i, 0) + x(i, 1) > 0 ? 1.0 : 0.0;
    LearnerConfig c;
    c.kind = LearnerKind::mlp;
    c.task = Task::binary_classification;
    c.mlp.hidden_layer_sizes = {10};
    c.mlp.learning_rate_init = 0.01;
    const Model m = fit(c, x, y);
    for (double p : predict(m, x)) {
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
    CHECK(evaluate(m, x, y) < std::log(2.0));
}

TEST_CASE("bin thresholds: distinct midpoints or quantile cuts") {
    CHECK(compute_bin_thresholds(std::vector<double>{3, 1, 2, 2}, 64) == std::vector<double>{1.5, 2.5});
    CHECK(compute_bin_thresholds(std::vector<double>{4, 4}, 64).empty());
    std::vector<double> many(1000);
    for (std::size_t i = 0; i < many.size(); ++i) many[i] = static_cast<double>(i);
    const auto t = compute_bin_thresholds(many, 64);
    CHECK(t.size() <= 63);
    CHECK(std::is_sorted(t.begin(), t.end()));
}
