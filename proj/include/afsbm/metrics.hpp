#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "afsbm/matrix.hpp"

namespace afsbm {

enum class LossKind { mse, cross_entropy };

std::string_view to_string(LossKind kind);

inline constexpr double kProbabilityEpsilon = 1e-12;

double mse(std::span<const double> y, std::span<const double> y_hat);

// Binary labels in {0,1} against P(class 1).
double cross_entropy(std::span<const double> y, std::span<const double> p_hat);

// One-hot rows against probability rows; each probability row must sum to 1 within 1e-9.
double cross_entropy(const Matrix& y_one_hot, const Matrix& p_hat);

double loss(LossKind kind, std::span<const double> y, std::span<const double> prediction);

std::vector<double> squared_errors(std::span<const double> y, std::span<const double> y_hat);

struct AveragedLosses {
    std::vector<double> l_ave;
    std::vector<double> l_ave2;
};

// Zero-pads every series to the longest, averages over series, then takes the running
// mean over time.
AveragedLosses averaged_loss_sequences(const std::vector<std::vector<double>>& per_series_losses);

// Diagnostic variant: at each t, averages only over series that are long enough.
AveragedLosses averaged_loss_sequences_unpadded(
    const std::vector<std::vector<double>>& per_series_losses);

}  // namespace afsbm
