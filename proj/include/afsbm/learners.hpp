#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "afsbm/matrix.hpp"
#include "afsbm/metrics.hpp"
#include "json.hpp"

namespace afsbm {

enum class LearnerKind { gbdt, mlp };
enum class Task { regression, binary_classification };
enum class Activation { relu, logistic };

std::string_view to_string(LearnerKind kind);
std::string_view to_string(Task task);
std::string_view to_string(Activation activation);
LearnerKind parse_learner_kind(std::string_view text);
Task parse_task(std::string_view text);
Activation parse_activation(std::string_view text);

LossKind loss_kind(Task task);

struct GbdtParams {
    int num_leaves = 31;
    double learning_rate = 0.1;
    int n_estimators = 100;
    double subsample = 1.0;
    double colsample_bytree = 1.0;
    int min_child_samples = 20;
    // Not part of the tuning grid; kept for completeness of the boosting objective.
    double lambda_l2 = 0.0;
    int max_bins = 64;

    friend bool operator==(const GbdtParams&, const GbdtParams&) = default;
};

struct MlpParams {
    std::vector<int> hidden_layer_sizes{100};
    Activation activation = Activation::relu;
    double alpha = 1e-4;
    double learning_rate_init = 1e-3;
    int batch_size = 32;
    int max_epochs = 200;
    int patience = 10;
    double tolerance = 1e-4;

    friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

struct LearnerConfig {
    LearnerKind kind = LearnerKind::gbdt;
    Task task = Task::regression;
    GbdtParams gbdt;
    MlpParams mlp;
    std::uint64_t seed = 0;

    // Throws std::invalid_argument naming the first offending parameter.
    void validate() const;

    friend bool operator==(const LearnerConfig&, const LearnerConfig&) = default;
};

nlohmann::json to_json(const LearnerConfig& config);
LearnerConfig learner_config_from_json(const nlohmann::json& j);

class GbdtModel;
class MlpModel;

// Held-out data used for MLP early stopping; ignored by GBDT.
struct ValidationData {
    const Matrix& x;
    std::span<const double> y;
};

// A trained predictor. Immutable after fit; prediction is deterministic.
class Model {
public:
    explicit Model(GbdtModel model);
    explicit Model(MlpModel model);
    Model(const Model&);
    Model(Model&&) noexcept;
    Model& operator=(const Model&);
    Model& operator=(Model&&) noexcept;
    ~Model();

    LearnerKind kind() const;
    Task task() const;
    std::size_t n_features() const;
    const LearnerConfig& config() const { return config_; }
    void set_config(LearnerConfig config) { config_ = std::move(config); }

    const GbdtModel* gbdt() const;
    const MlpModel* mlp() const;

    nlohmann::json to_json() const;
    static Model from_json(const nlohmann::json& j);

private:
    LearnerConfig config_;
    std::unique_ptr<std::variant<GbdtModel, MlpModel>> impl_;
};

Model fit(const LearnerConfig& config, const Matrix& x, std::span<const double> y,
          const ValidationData* validation = nullptr);

// Regression: raw scores. Classification: P(y = 1).
std::vector<double> predict(const Model& model, const Matrix& x);

// Task loss of the model on (x, y): MSE for regression, cross-entropy for classification.
double evaluate(const Model& model, const Matrix& x, std::span<const double> y);

// Total split gain per feature. GBDT only; throws std::invalid_argument for MLP models.
std::vector<double> feature_importance(const Model& model);

}  // namespace afsbm
