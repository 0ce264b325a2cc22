#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "afsbm/learners.hpp"

namespace afsbm {

struct DenseLayer {
    Matrix weights;  // out x in
    std::vector<double> bias;
};

// Fully connected network with one output unit: identity for regression, sigmoid for
// binary classification. Trained by mini-batch gradient descent with L2 penalty.
class MlpModel {
public:
    MlpModel(MlpParams params, Task task, std::vector<DenseLayer> layers);

    // Glorot-uniform initial weights, zero biases.
    static MlpModel initialize(const MlpParams& params, Task task, std::size_t n_features,
                               std::uint64_t seed);

    static MlpModel train(const MlpParams& params, Task task, std::uint64_t seed,
                          const Matrix& x, std::span<const double> y,
                          const ValidationData* validation);

    Task task() const { return task_; }
    const MlpParams& params() const { return params_; }
    std::size_t n_features() const { return layers_.front().weights.cols(); }
    const std::vector<DenseLayer>& layers() const { return layers_; }

    std::vector<double> predict(const Matrix& x) const;

    // Flattened as [W1 row-major, b1, W2, b2, ...].
    std::size_t parameter_count() const;
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> flat);

    // Data loss (0.5 * MSE, or mean logistic loss) plus alpha / (2n) * sum of squared weights.
    double objective(const Matrix& x, std::span<const double> y) const;
    // Same value; writes d objective / d parameters into `gradient` (size parameter_count()).
    double objective_and_gradient(const Matrix& x, std::span<const double> y,
                                  std::span<double> gradient) const;

    // Epochs actually run by train(); 0 for an untrained model.
    int epochs_run() const { return epochs_run_; }

    nlohmann::json to_json() const;
    static MlpModel from_json(const nlohmann::json& j);

private:
    MlpParams params_;
    Task task_;
    std::vector<DenseLayer> layers_;
    int epochs_run_ = 0;
};

}  // namespace afsbm
