#include "afsbm/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace afsbm {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double activate(Activation a, double z) { return a == Activation::relu ? std::max(0.0, z) : sigmoid(z); }

// Derivative expressed through the activation output.
double activate_grad(Activation a, double z, double out) {
    if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
    return out * (1.0 - out);
}

void check_inputs(const Matrix& x, std::span<const double> y, Task task) {
    if (x.rows() == 0 || x.cols() == 0) throw std::invalid_argument("mlp: empty training data");
    if (x.rows() != y.size()) throw std::invalid_argument("mlp: X rows != y length");
    for (double v : x.data())
        if (!std::isfinite(v)) throw std::invalid_argument("mlp: non-finite feature value");
    bool has0 = false, has1 = false;
    for (double v : y) {
        if (!std::isfinite(v)) throw std::invalid_argument("mlp: non-finite target");
        if (task == Task::binary_classification) {
            if (v != 0.0 && v != 1.0) throw std::invalid_argument("mlp: classification targets must be 0 or 1");
            (v == 0.0 ? has0 : has1) = true;
        }
    }
    if (task == Task::binary_classification && !(has0 && has1))
        throw std::invalid_argument("mlp: training set contains a single class");
}

}  // namespace

MlpModel::MlpModel(MlpParams params, Task task, std::vector<DenseLayer> layers)
    : params_(std::move(params)), task_(task), layers_(std::move(layers)) {
    if (layers_.empty()) throw std::invalid_argument("MlpModel: no layers");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (layers_[l].bias.size() != layers_[l].weights.rows())
            throw std::invalid_argument("MlpModel: bias size mismatch");
        if (l > 0 && layers_[l].weights.cols() != layers_[l - 1].weights.rows())
            throw std::invalid_argument("MlpModel: layer shape mismatch");
    }
    if (layers_.back().weights.rows() != 1) throw std::invalid_argument("MlpModel: output must be one unit");
}

MlpModel MlpModel::initialize(const MlpParams& params, Task task, std::size_t n_features,
                              std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> sizes{n_features};
    for (int h : params.hidden_layer_sizes) sizes.push_back(static_cast<std::size_t>(h));
    sizes.push_back(1);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const std::size_t fan_in = sizes[l], fan_out = sizes[l + 1];
        // Glorot uniform; logistic units use the wider bound.
        const double factor = params.activation == Activation::logistic ? 2.0 : 6.0;
        const double bound = std::sqrt(factor / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        DenseLayer layer{Matrix(fan_out, fan_in), std::vector<double>(fan_out, 0.0)};
        for (std::size_t o = 0; o < fan_out; ++o)
            for (std::size_t i = 0; i < fan_in; ++i) layer.weights(o, i) = dist(rng);
        layers.push_back(std::move(layer));
    }
    return MlpModel(params, task, std::move(layers));
}

std::vector<double> MlpModel::predict(const Matrix& x) const {
    if (x.cols() != n_features()) {
        throw std::invalid_argument("mlp predict: expected " + std::to_string(n_features()) +
                                    " features, got " + std::to_string(x.cols()));
    }
    std::vector<double> out(x.rows());
    std::vector<double> a, z;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto row = x.row(r);
        a.assign(row.begin(), row.end());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const auto& layer = layers_[l];
            z.assign(layer.bias.begin(), layer.bias.end());
            for (std::size_t o = 0; o < z.size(); ++o) {
                const auto w = layer.weights.row(o);
                for (std::size_t i = 0; i < a.size(); ++i) z[o] += w[i] * a[i];
            }
            if (l + 1 < layers_.size())
                for (auto& v : z) v = activate(params_.activation, v);
            a.swap(z);
        }
        out[r] = task_ == Task::regression
                     ? a[0]
                     : std::clamp(sigmoid(a[0]), kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
    }
    return out;
}

std::size_t MlpModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.rows() * l.weights.cols() + l.bias.size();
    return n;
}

std::vector<double> MlpModel::parameters() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const auto& l : layers_) {
        flat.insert(flat.end(), l.weights.data().begin(), l.weights.data().end());
        flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    }
    return flat;
}

void MlpModel::set_parameters(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw std::invalid_argument("mlp: parameter count mismatch");
    std::size_t k = 0;
    for (auto& l : layers_) {
        for (std::size_t o = 0; o < l.weights.rows(); ++o)
            for (std::size_t i = 0; i < l.weights.cols(); ++i) l.weights(o, i) = flat[k++];
        for (auto& b : l.bias) b = flat[k++];
    }
}

double MlpModel::objective(const Matrix& x, std::span<const double> y) const {
    std::vector<double> unused(parameter_count());
    return objective_and_gradient(x, y, unused);
}

double MlpModel::objective_and_gradient(const Matrix& x, std::span<const double> y,
                                        std::span<double> gradient) const {
    if (gradient.size() != parameter_count()) throw std::invalid_argument("mlp: gradient size mismatch");
    if (x.cols() != n_features() || x.rows() != y.size() || x.rows() == 0)
        throw std::invalid_argument("mlp: objective shape mismatch");
    std::fill(gradient.begin(), gradient.end(), 0.0);

    const std::size_t n_layers = layers_.size();
    std::vector<std::size_t> offsets(n_layers);
    {
        std::size_t k = 0;
        for (std::size_t l = 0; l < n_layers; ++l) {
            offsets[l] = k;
            k += layers_[l].weights.rows() * layers_[l].weights.cols() + layers_[l].bias.size();
        }
    }

    const double n = static_cast<double>(x.rows());
    double data_loss = 0.0;
    std::vector<std::vector<double>> pre(n_layers), act(n_layers + 1);
    std::vector<double> delta, next_delta;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto row = x.row(r);
        act[0].assign(row.begin(), row.end());
        for (std::size_t l = 0; l < n_layers; ++l) {
            const auto& layer = layers_[l];
            pre[l].assign(layer.bias.begin(), layer.bias.end());
            for (std::size_t o = 0; o < pre[l].size(); ++o) {
                const auto w = layer.weights.row(o);
                for (std::size_t i = 0; i < act[l].size(); ++i) pre[l][o] += w[i] * act[l][i];
            }
            act[l + 1] = pre[l];
            if (l + 1 < n_layers)
                for (auto& v : act[l + 1]) v = activate(params_.activation, v);
        }
        const double out = act[n_layers][0];
        double d_out;
        if (task_ == Task::regression) {
            const double e = out - y[r];
            data_loss += 0.5 * e * e;
            d_out = e / n;
        } else {
            data_loss += softplus(out) - y[r] * out;
            d_out = (sigmoid(out) - y[r]) / n;
        }

        delta.assign(1, d_out);
        for (std::size_t l = n_layers; l-- > 0;) {
            const auto& layer = layers_[l];
            const std::size_t in = layer.weights.cols();
            double* gw = gradient.data() + offsets[l];
            double* gb = gw + layer.weights.rows() * in;
            for (std::size_t o = 0; o < delta.size(); ++o) {
                for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += delta[o] * act[l][i];
                gb[o] += delta[o];
            }
            if (l == 0) break;
            next_delta.assign(in, 0.0);
            for (std::size_t o = 0; o < delta.size(); ++o) {
                const auto w = layer.weights.row(o);
                for (std::size_t i = 0; i < in; ++i) next_delta[i] += w[i] * delta[o];
            }
            for (std::size_t i = 0; i < in; ++i)
                next_delta[i] *= activate_grad(params_.activation, pre[l - 1][i], act[l][i]);
            delta.swap(next_delta);
        }
    }

    double penalty = 0.0;
    const double reg = params_.alpha / n;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& w = layers_[l].weights.data();
        double* gw = gradient.data() + offsets[l];
        for (std::size_t k = 0; k < w.size(); ++k) {
            penalty += w[k] * w[k];
            gw[k] += reg * w[k];
        }
    }
    return data_loss / n + 0.5 * reg * penalty;
}

MlpModel MlpModel::train(const MlpParams& params, Task task, std::uint64_t seed, const Matrix& x,
                         std::span<const double> y, const ValidationData* validation) {
    check_inputs(x, y, task);
    MlpModel model = initialize(params, task, x.cols(), seed);
    std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);

    const auto stop_loss = [&](const MlpModel& m) {
        if (validation) return loss(loss_kind(task), validation->y, m.predict(validation->x));
        return m.objective(x, y);
    };

    std::vector<std::size_t> order(x.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> params_flat = model.parameters();
    std::vector<double> grad(params_flat.size());
    std::vector<double> best_params = params_flat;
    double best = std::numeric_limits<double>::infinity();
    int stale = 0;
    const auto batch = static_cast<std::size_t>(std::max(1, params.batch_size));

    for (int epoch = 0; epoch < params.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            const std::span<const std::size_t> idx(order.data() + start, end - start);
            const Matrix xb = x.select_rows(idx);
            std::vector<double> yb;
            yb.reserve(idx.size());
            for (auto i : idx) yb.push_back(y[i]);
            model.objective_and_gradient(xb, yb, grad);
            for (std::size_t k = 0; k < params_flat.size(); ++k)
                params_flat[k] -= params.learning_rate_init * grad[k];
            model.set_parameters(params_flat);
        }
        model.epochs_run_ = epoch + 1;
        const double current = stop_loss(model);
        if (!std::isfinite(current)) throw std::runtime_error("mlp: training diverged");
        stale = current < best - params.tolerance ? 0 : stale + 1;
        if (current < best) {
            best = current;
            best_params = params_flat;
        }
        if (stale >= params.patience) break;
    }
    if (validation) model.set_parameters(best_params);
    return model;
}

nlohmann::json MlpModel::to_json() const {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : layers_) {
        nlohmann::json w = nlohmann::json::array();
        for (std::size_t o = 0; o < l.weights.rows(); ++o) {
            const auto row = l.weights.row(o);
            w.push_back(std::vector<double>(row.begin(), row.end()));
        }
        layers.push_back({{"weights", w}, {"bias", l.bias}});
    }
    return {{"task", std::string(to_string(task_))},
            {"activation", std::string(to_string(params_.activation))},
            {"epochs_run", epochs_run_},
            {"layers", layers}};
}

MlpModel MlpModel::from_json(const nlohmann::json& j) {
    std::vector<DenseLayer> layers;
    for (const auto& l : j.at("layers")) {
        const auto rows = l.at("weights").get<std::vector<std::vector<double>>>();
        layers.push_back({Matrix::from_rows(rows), l.at("bias").get<std::vector<double>>()});
    }
    MlpParams params;
    params.activation = parse_activation(j.at("activation").get<std::string>());
    params.hidden_layer_sizes.clear();
    for (std::size_t i = 0; i + 1 < layers.size(); ++i)
        params.hidden_layer_sizes.push_back(static_cast<int>(layers[i].weights.rows()));
    MlpModel m(params, parse_task(j.at("task").get<std::string>()), std::move(layers));
    m.epochs_run_ = j.value("epochs_run", 0);
    return m;
}

}  // namespace afsbm
