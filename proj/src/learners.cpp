#include "afsbm/learners.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "afsbm/gbdt.hpp"
#include "afsbm/mlp.hpp"

namespace afsbm {

std::string_view to_string(LearnerKind kind) { return kind == LearnerKind::gbdt ? "gbdt" : "mlp"; }

std::string_view to_string(Task task) {
    return task == Task::regression ? "regression" : "binary_classification";
}

std::string_view to_string(Activation activation) {
    return activation == Activation::relu ? "relu" : "logistic";
}

LearnerKind parse_learner_kind(std::string_view text) {
    if (text == "gbdt") return LearnerKind::gbdt;
    if (text == "mlp") return LearnerKind::mlp;
    throw std::invalid_argument("unknown learner kind '" + std::string(text) + "'");
}

Task parse_task(std::string_view text) {
    if (text == "regression") return Task::regression;
    if (text == "binary_classification" || text == "classification") return Task::binary_classification;
    throw std::invalid_argument("unknown task '" + std::string(text) + "'");
}

Activation parse_activation(std::string_view text) {
    if (text == "relu") return Activation::relu;
    if (text == "logistic") return Activation::logistic;
    throw std::invalid_argument("unknown activation '" + std::string(text) + "'");
}

LossKind loss_kind(Task task) {
    return task == Task::regression ? LossKind::mse : LossKind::cross_entropy;
}

void LearnerConfig::validate() const {
    const auto fail = [](const std::string& what) { throw std::invalid_argument("LearnerConfig: " + what); };
    if (kind == LearnerKind::gbdt) {
        if (gbdt.num_leaves < 1) fail("num_leaves must be positive");
        if (!(gbdt.learning_rate > 0.0)) fail("learning_rate must be positive");
        if (gbdt.n_estimators < 1) fail("n_estimators must be positive");
        if (!(gbdt.subsample > 0.0 && gbdt.subsample <= 1.0)) fail("subsample must lie in (0, 1]");
        if (!(gbdt.colsample_bytree > 0.0 && gbdt.colsample_bytree <= 1.0))
            fail("colsample_bytree must lie in (0, 1]");
        if (gbdt.min_child_samples < 1) fail("min_child_samples must be positive");
        if (!(gbdt.lambda_l2 >= 0.0)) fail("lambda_l2 must be non-negative");
        if (gbdt.max_bins < 2 || gbdt.max_bins > 256) fail("max_bins must lie in [2, 256]");
    } else {
        if (mlp.hidden_layer_sizes.empty()) fail("hidden_layer_sizes must not be empty");
        for (int h : mlp.hidden_layer_sizes)
            if (h < 1) fail("hidden layer sizes must be positive");
        if (!(mlp.alpha >= 0.0)) fail("alpha must be non-negative");
        if (!(mlp.learning_rate_init > 0.0)) fail("learning_rate_init must be positive");
        if (mlp.batch_size < 1) fail("batch_size must be positive");
        if (mlp.max_epochs < 1) fail("max_epochs must be positive");
        if (mlp.patience < 1) fail("patience must be positive");
    }
}

nlohmann::json to_json(const LearnerConfig& c) {
    nlohmann::json j = {{"kind", std::string(to_string(c.kind))},
                        {"task", std::string(to_string(c.task))},
                        {"seed", c.seed}};
    if (c.kind == LearnerKind::gbdt) {
        j["num_leaves"] = c.gbdt.num_leaves;
        j["learning_rate"] = c.gbdt.learning_rate;
        j["n_estimators"] = c.gbdt.n_estimators;
        j["subsample"] = c.gbdt.subsample;
        j["colsample_bytree"] = c.gbdt.colsample_bytree;
        j["min_child_samples"] = c.gbdt.min_child_samples;
        j["lambda_l2"] = c.gbdt.lambda_l2;
        j["max_bins"] = c.gbdt.max_bins;
    } else {
        j["hidden_layer_sizes"] = c.mlp.hidden_layer_sizes;
        j["activation"] = std::string(to_string(c.mlp.activation));
        j["alpha"] = c.mlp.alpha;
        j["learning_rate_init"] = c.mlp.learning_rate_init;
        j["batch_size"] = c.mlp.batch_size;
        j["max_epochs"] = c.mlp.max_epochs;
        j["patience"] = c.mlp.patience;
        j["tolerance"] = c.mlp.tolerance;
    }
    return j;
}

LearnerConfig learner_config_from_json(const nlohmann::json& j) {
    LearnerConfig c;
    c.kind = parse_learner_kind(j.at("kind").get<std::string>());
    c.task = parse_task(j.value("task", std::string("regression")));
    c.seed = j.value("seed", std::uint64_t{0});
    if (c.kind == LearnerKind::gbdt) {
        c.gbdt.num_leaves = j.value("num_leaves", c.gbdt.num_leaves);
        c.gbdt.learning_rate = j.value("learning_rate", c.gbdt.learning_rate);
        c.gbdt.n_estimators = j.value("n_estimators", c.gbdt.n_estimators);
        c.gbdt.subsample = j.value("subsample", c.gbdt.subsample);
        c.gbdt.colsample_bytree = j.value("colsample_bytree", c.gbdt.colsample_bytree);
        c.gbdt.min_child_samples = j.value("min_child_samples", c.gbdt.min_child_samples);
        c.gbdt.lambda_l2 = j.value("lambda_l2", c.gbdt.lambda_l2);
        c.gbdt.max_bins = j.value("max_bins", c.gbdt.max_bins);
    } else {
        c.mlp.hidden_layer_sizes = j.value("hidden_layer_sizes", c.mlp.hidden_layer_sizes);
        c.mlp.activation = parse_activation(j.value("activation", std::string("relu")));
        c.mlp.alpha = j.value("alpha", c.mlp.alpha);
        c.mlp.learning_rate_init = j.value("learning_rate_init", c.mlp.learning_rate_init);
        c.mlp.batch_size = j.value("batch_size", c.mlp.batch_size);
        c.mlp.max_epochs = j.value("max_epochs", c.mlp.max_epochs);
        c.mlp.patience = j.value("patience", c.mlp.patience);
        c.mlp.tolerance = j.value("tolerance", c.mlp.tolerance);
    }
    return c;
}

// ---------------------------------------------------------------------------

Model::Model(GbdtModel model)
    : impl_(std::make_unique<std::variant<GbdtModel, MlpModel>>(std::move(model))) {
    config_.kind = LearnerKind::gbdt;
    config_.task = std::get<GbdtModel>(*impl_).task();
}

Model::Model(MlpModel model)
    : impl_(std::make_unique<std::variant<GbdtModel, MlpModel>>(std::move(model))) {
    const auto& m = std::get<MlpModel>(*impl_);
    config_.kind = LearnerKind::mlp;
    config_.task = m.task();
    config_.mlp = m.params();
}

Model::Model(const Model& other)
    : config_(other.config_), impl_(std::make_unique<std::variant<GbdtModel, MlpModel>>(*other.impl_)) {}
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(const Model& other) {
    if (this != &other) {
        config_ = other.config_;
        impl_ = std::make_unique<std::variant<GbdtModel, MlpModel>>(*other.impl_);
    }
    return *this;
}
Model& Model::operator=(Model&&) noexcept = default;
Model::~Model() = default;

LearnerKind Model::kind() const { return std::holds_alternative<GbdtModel>(*impl_) ? LearnerKind::gbdt : LearnerKind::mlp; }

Task Model::task() const {
    return std::visit([](const auto& m) { return m.task(); }, *impl_);
}

std::size_t Model::n_features() const {
    return std::visit([](const auto& m) { return m.n_features(); }, *impl_);
}

const GbdtModel* Model::gbdt() const { return std::get_if<GbdtModel>(impl_.get()); }
const MlpModel* Model::mlp() const { return std::get_if<MlpModel>(impl_.get()); }

nlohmann::json Model::to_json() const {
    nlohmann::json j = {{"kind", std::string(to_string(kind()))}, {"config", afsbm::to_json(config_)}};
    j["params"] = std::visit([](const auto& m) { return m.to_json(); }, *impl_);
    return j;
}

Model Model::from_json(const nlohmann::json& j) {
    const auto kind = parse_learner_kind(j.at("kind").get<std::string>());
    Model m = kind == LearnerKind::gbdt ? Model(GbdtModel::from_json(j.at("params")))
                                        : Model(MlpModel::from_json(j.at("params")));
    if (j.contains("config")) m.set_config(learner_config_from_json(j.at("config")));
    return m;
}

Model fit(const LearnerConfig& config, const Matrix& x, std::span<const double> y,
          const ValidationData* validation) {
    config.validate();
    if (config.kind == LearnerKind::gbdt) {
        Model m(GbdtModel::train(config.gbdt, config.task, config.seed, x, y));
        m.set_config(config);
        return m;
    }
    Model m(MlpModel::train(config.mlp, config.task, config.seed, x, y, validation));
    m.set_config(config);
    return m;
}

std::vector<double> predict(const Model& model, const Matrix& x) {
    if (const auto* g = model.gbdt()) return g->predict(x);
    return model.mlp()->predict(x);
}

double evaluate(const Model& model, const Matrix& x, std::span<const double> y) {
    return loss(loss_kind(model.task()), y, predict(model, x));
}

std::vector<double> feature_importance(const Model& model) {
    if (const auto* g = model.gbdt()) return g->feature_importance();
    throw std::invalid_argument("feature_importance: only available for gbdt models");
}

}  // namespace afsbm
