#include "afsbm/synthetic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace afsbm {

void SyntheticSpec::validate() const {
    if (n_samples == 0 || n_features == 0 || n_informative == 0)
        throw std::invalid_argument("SyntheticSpec: sizes must be positive");
    if (n_informative > n_features)
        throw std::invalid_argument("SyntheticSpec: n_informative exceeds n_features");
    if (!(noise_variance >= 0.0)) throw std::invalid_argument("SyntheticSpec: negative noise variance");
    if (!(feature_low > 0.0)) throw std::invalid_argument("SyntheticSpec: feature_low must be > 0 (x log10 x)");
    if (!(feature_high >= feature_low)) throw std::invalid_argument("SyntheticSpec: feature_high < feature_low");
}

double informative_term(double x) { return x + std::sin(x) + std::cos(x) + x * std::log10(x); }

SyntheticData generate(const SyntheticSpec& spec) {
    spec.validate();
    // Independent streams so the redundant columns can be redrawn without touching y.
    std::seed_seq informative_seed{spec.seed, std::uint64_t{1}};
    std::seed_seq noise_seed{spec.seed, std::uint64_t{2}};
    std::seed_seq redundant_seed{spec.redundant_seed.value_or(spec.seed), std::uint64_t{3}};
    std::mt19937_64 informative_rng(informative_seed);
    std::mt19937_64 noise_rng(noise_seed);
    std::mt19937_64 redundant_rng(redundant_seed);

    std::uniform_real_distribution<double> feature(spec.feature_low, spec.feature_high);
    std::normal_distribution<double> noise(0.0, std::sqrt(spec.noise_variance));

    SyntheticData out;
    Dataset& d = out.data;
    d.features = Matrix(spec.n_samples, spec.n_features);
    d.targets.assign(spec.n_samples, 0.0);
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
        for (std::size_t j = 0; j < spec.n_informative; ++j) {
            const double x = feature(informative_rng);
            d.features(i, j) = x;
            d.targets[i] += informative_term(x);
        }
        for (std::size_t j = spec.n_informative; j < spec.n_features; ++j) d.features(i, j) = feature(redundant_rng);
        if (spec.noise_variance > 0.0) d.targets[i] += noise(noise_rng);
    }
    for (std::size_t j = 0; j < spec.n_features; ++j) d.feature_names.push_back("x" + std::to_string(j));
    for (std::size_t j = 0; j < spec.n_informative; ++j) out.informative.push_back(j);
    return out;
}

}  // namespace afsbm
