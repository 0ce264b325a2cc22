#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "afsbm/dataset.hpp"

namespace afsbm {

struct SyntheticSpec {
    std::size_t n_samples = 300;
    std::size_t n_features = 100;
    std::size_t n_informative = 10;
    double noise_variance = 0.1;
    std::uint64_t seed = 0;
    // Features are drawn uniformly on [feature_low, feature_high]; low must be > 0.
    double feature_low = 1e-3;
    double feature_high = 1.0;
    // Overrides the stream used for the non-informative columns only.
    std::optional<std::uint64_t> redundant_seed;

    void validate() const;
};

struct SyntheticData {
    Dataset data;
    std::vector<std::size_t> informative;  // always 0..n_informative-1
};

// Contribution of one informative feature value: x + sin x + cos x + x log10 x.
double informative_term(double x);

// y_i = sum over informative j of informative_term(X_ij) + eps_i, eps ~ N(0, noise_variance).
SyntheticData generate(const SyntheticSpec& spec);

}  // namespace afsbm
