#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "afsbm/dataset.hpp"
#include "afsbm/learners.hpp"

namespace afsbm {

enum class BaselineMethod { cross_correlation, mutual_information, rfe };

std::string_view to_string(BaselineMethod method);

struct BaselineParams {
    BaselineMethod method = BaselineMethod::cross_correlation;
    double gamma = 0.1;
    std::size_t k = 2;
    int mi_bins = 10;
};

struct BaselineSelection {
    BinaryMask mask;
    std::vector<double> scores;  // per feature; meaning depends on the method
};

// Pearson correlation; zero-variance inputs give 0.
double pearson(std::span<const double> x, std::span<const double> y);

std::vector<double> cross_correlation_scores(const Matrix& x, std::span<const double> y);

// mask_j = 1 iff |R_j| > gamma.
BaselineSelection cross_correlation_select(const Matrix& x, std::span<const double> y,
                                           double gamma);

// Plug-in MI (natural log) from an equal-width joint histogram. When `y_is_class` the
// target axis uses one bin per distinct label instead of `bins` equal-width bins.
double mutual_information(std::span<const double> x, std::span<const double> y, int bins,
                          bool y_is_class = false);

std::vector<double> mutual_information_scores(const Matrix& x, std::span<const double> y,
                                              int bins, bool y_is_class = false);

// Top-k by estimated MI, ties broken by lower column index.
BaselineSelection mutual_information_select(const Matrix& x, std::span<const double> y,
                                            std::size_t k, int mi_bins, bool y_is_class = false);

// Indices of the k largest scores, ties to the lower index.
BinaryMask top_k_mask(std::span<const double> scores, std::size_t k);

struct RfeRound {
    std::vector<std::size_t> active;  // original indices before elimination
    std::vector<double> importance;   // aligned with `active`
    std::size_t eliminated;           // original index
};

struct RfePath {
    std::vector<RfeRound> rounds;
    std::vector<std::size_t> survivors;  // original indices, ascending
    int fit_calls = 0;
};

// Fits on the surviving columns and drops the lowest-importance one (ties to the lowest
// index) until k remain. Exactly M - k fits.
RfePath rfe_path(const LearnerConfig& learner, const Matrix& x, std::span<const double> y,
                 std::size_t k);

// Mask with k survivors taken from a path computed down to k_path <= k. RFE is
// deterministic, so a shorter run is a prefix of a longer one.
BinaryMask rfe_mask_from_path(const RfePath& path, std::size_t n_features, std::size_t k);

BaselineSelection rfe_select(const LearnerConfig& learner, const Matrix& x,
                             std::span<const double> y, std::size_t k);

}  // namespace afsbm
