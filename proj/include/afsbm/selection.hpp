#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "afsbm/dataset.hpp"
#include "afsbm/learners.hpp"

namespace afsbm {

// Adaptive feature selection with binary masking: alternate between training the learner
// on the masked training set and greedily zeroing mask bits whose removal keeps the
// mask-validation loss within a relative tolerance of the running reference loss.

struct AfsBmParams {
    int mu = 5;              // rejected removals allowed per mask phase
    int beta = 3;            // outer iterations with an unchanged mask before stopping
    double delta_L = 0.02;   // relative loss tolerance
    std::uint64_t seed = 0;
    int max_outer_iterations = 50;

    void validate() const;
};

nlohmann::json to_json(const AfsBmParams& p);

// Index drawing order inside a mask phase.
inline constexpr const char* kIndexSelectionRule = "uniform_without_replacement";

// true = removal accepted. Relative test when l_th > 0, absolute test l_mask <= delta_L when
// l_th == 0. Throws std::invalid_argument on non-finite input or l_th < 0.
bool relevance_test(double l_mask, double l_th, double delta_L);

struct MaskDraw {
    std::size_t index;           // position in the current (reduced) feature set
    std::size_t original_index;  // position in the original feature set
    double l_th_before;
    double l_mask;
    bool accepted;
    int mu_remaining;            // after this draw
};

struct MaskPhaseResult {
    BinaryMask z_hat;
    std::vector<MaskDraw> draws;
    double l_th_final = 0.0;
    // Set when the only remaining active feature was drawn; the feature is kept.
    bool last_feature_guard = false;
};

struct ModelPhaseResult {
    Model model;
    double l_th;
};

using FitFunction =
    std::function<Model(const LearnerConfig&, const Matrix&, std::span<const double>)>;

// Masks train and mask_val with z_prev, fits once, returns the model and its mask_val loss.
ModelPhaseResult model_optimization_phase(const LearnerConfig& learner, const Dataset& train,
                                          const Dataset& mask_val, const BinaryMask& z_prev,
                                          const FitFunction& fit_fn = {});

// Draws active indices without replacement using `rng`; never retrains `model`.
// `original_index` maps current positions to original feature positions (identity if empty).
MaskPhaseResult mask_optimization_phase(const Model& model, const Dataset& mask_val,
                                        const BinaryMask& z_prev, double l_th,
                                        const AfsBmParams& params, std::mt19937_64& rng,
                                        std::span<const std::size_t> original_index = {});

struct OuterIteration {
    int iteration;               // 1-based
    std::size_t active_before;
    double l_th_model;           // reference loss right after the model phase
    double l_th_final;
    std::vector<MaskDraw> draws;
    std::vector<std::size_t> removed_original;
    int fit_calls;
    bool mask_unchanged;
    int beta_remaining;
};

struct LossPoint {
    int iteration;
    double l_th;
};

struct SelectionResult {
    BinaryMask final_mask;  // original index space, history = one entry per outer iteration
    std::vector<std::string> original_feature_names;
    std::vector<std::string> selected_feature_names;
    std::vector<std::size_t> selected_indices;
    std::vector<LossPoint> loss_trajectory;
    std::vector<OuterIteration> iterations;
    double sparsity = 1.0;  // popcount / M_original
    bool converged = false;
    std::string termination;  // "beta_exhausted", "max_outer_iterations", "last_feature"
    AfsBmParams params;
    int total_fit_calls = 0;

    nlohmann::json to_json() const;
};

SelectionResult run_afs_bm(const LearnerConfig& learner, const Dataset& train,
                           const Dataset& mask_val, const AfsBmParams& params,
                           const FitFunction& fit_fn = {});

}  // namespace afsbm
