#include "afsbm/selection.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace afsbm {

void AfsBmParams::validate() const {
    if (mu < 1) throw std::invalid_argument("AfsBmParams: mu must be >= 1");
    if (beta < 1) throw std::invalid_argument("AfsBmParams: beta must be >= 1");
    if (!(delta_L > 0.0) || !std::isfinite(delta_L))
        throw std::invalid_argument("AfsBmParams: delta_L must be a positive finite number");
    if (max_outer_iterations < 0)
        throw std::invalid_argument("AfsBmParams: max_outer_iterations must be >= 0");
}

nlohmann::json to_json(const AfsBmParams& p) {
    return {{"mu", p.mu},
            {"beta", p.beta},
            {"delta_L", p.delta_L},
            {"seed", p.seed},
            {"max_outer_iterations", p.max_outer_iterations}};
}

bool relevance_test(double l_mask, double l_th, double delta_L) {
    if (!std::isfinite(l_mask) || !std::isfinite(l_th) || !std::isfinite(delta_L))
        throw std::invalid_argument("relevance_test: non-finite input");
    if (!(delta_L > 0.0)) throw std::invalid_argument("relevance_test: delta_L must be positive");
    if (l_th < 0.0) throw std::invalid_argument("relevance_test: negative reference loss");
    if (l_th > 0.0) return (l_mask - l_th) / l_th <= delta_L;
    return l_mask <= delta_L;
}

ModelPhaseResult model_optimization_phase(const LearnerConfig& learner, const Dataset& train,
                                          const Dataset& mask_val, const BinaryMask& z_prev,
                                          const FitFunction& fit_fn) {
    const Matrix x_train = apply_mask(train.features, z_prev);
    Model model = fit_fn ? fit_fn(learner, x_train, train.targets) : fit(learner, x_train, train.targets);
    const Matrix x_mask = apply_mask(mask_val.features, z_prev);
    const double l_th = evaluate(model, x_mask, mask_val.targets);
    return {std::move(model), l_th};
}

MaskPhaseResult mask_optimization_phase(const Model& model, const Dataset& mask_val,
                                        const BinaryMask& z_prev, double l_th,
                                        const AfsBmParams& params, std::mt19937_64& rng,
                                        std::span<const std::size_t> original_index) {
    if (!std::isfinite(l_th)) throw std::invalid_argument("mask_optimization_phase: non-finite L_th");
    if (!original_index.empty() && original_index.size() != z_prev.size())
        throw std::invalid_argument("mask_optimization_phase: index map size mismatch");

    MaskPhaseResult out;
    out.z_hat = BinaryMask(z_prev.bits());
    Matrix x = apply_mask(mask_val.features, out.z_hat);
    std::vector<std::size_t> pool = out.z_hat.active_indices();
    std::size_t active = pool.size();
    int mu = params.mu;
    std::vector<double> saved(x.rows());

    while (mu > 0 && !pool.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        const std::size_t pos = pick(rng);
        const std::size_t i = pool[pos];
        pool[pos] = pool.back();
        pool.pop_back();

        if (active == 1) {
            out.last_feature_guard = true;
            break;
        }

        out.z_hat.set(i, false);
        for (std::size_t r = 0; r < x.rows(); ++r) {
            saved[r] = x(r, i);
            x(r, i) = 0.0;
        }
        const double l_mask = evaluate(model, x, mask_val.targets);
        MaskDraw draw{i, original_index.empty() ? i : original_index[i], l_th, l_mask, false, mu};
        draw.accepted = relevance_test(l_mask, l_th, params.delta_L);
        if (draw.accepted) {
            l_th = l_mask;
            --active;
        } else {
            out.z_hat.set(i, true);
            for (std::size_t r = 0; r < x.rows(); ++r) x(r, i) = saved[r];
            --mu;
        }
        draw.mu_remaining = mu;
        out.draws.push_back(draw);
    }
    out.l_th_final = l_th;
    return out;
}

SelectionResult run_afs_bm(const LearnerConfig& learner, const Dataset& train,
                           const Dataset& mask_val, const AfsBmParams& params,
                           const FitFunction& fit_fn) {
    params.validate();
    train.validate();
    mask_val.validate();
    if (train.feature_names != mask_val.feature_names)
        throw std::invalid_argument("run_afs_bm: train and mask_val feature columns differ");
    const std::size_t m = train.cols();
    if (m < 2) throw std::invalid_argument("run_afs_bm: need at least two features");

    SelectionResult result;
    result.params = params;
    result.original_feature_names = train.feature_names;
    result.final_mask = BinaryMask::ones(m);

    Dataset cur_train = train;
    Dataset cur_mask = mask_val;
    std::vector<std::size_t> original(m);
    std::iota(original.begin(), original.end(), std::size_t{0});
    std::mt19937_64 rng(params.seed);

    int beta = params.beta;
    int k = 0;
    result.termination = "max_outer_iterations";
    while (beta > 0 && k < params.max_outer_iterations) {
        ++k;
        int calls = 0;
        const FitFunction counting = [&](const LearnerConfig& c, const Matrix& x, std::span<const double> y) {
            ++calls;
            return fit_fn ? fit_fn(c, x, y) : fit(c, x, y);
        };
        const BinaryMask z_prev = BinaryMask::ones(cur_train.cols());
        auto model_phase = model_optimization_phase(learner, cur_train, cur_mask, z_prev, counting);
        result.loss_trajectory.push_back({k, model_phase.l_th});

        auto mask_phase = mask_optimization_phase(model_phase.model, cur_mask, z_prev, model_phase.l_th,
                                                  params, rng, original);
        for (const auto& d : mask_phase.draws)
            if (d.accepted) result.loss_trajectory.push_back({k, d.l_mask});

        OuterIteration it;
        it.iteration = k;
        it.active_before = cur_train.cols();
        it.l_th_model = model_phase.l_th;
        it.l_th_final = mask_phase.l_th_final;
        it.draws = mask_phase.draws;
        it.fit_calls = calls;
        result.total_fit_calls += calls;

        for (std::size_t j = 0; j < mask_phase.z_hat.size(); ++j)
            if (!mask_phase.z_hat[j]) it.removed_original.push_back(original[j]);
        it.mask_unchanged = it.removed_original.empty();
        if (!it.mask_unchanged) {
            const auto deleted = delete_columns(cur_train.features, cur_mask.features, mask_phase.z_hat);
            cur_train = cur_train.select_columns(deleted.kept);
            cur_mask = cur_mask.select_columns(deleted.kept);
            std::vector<std::size_t> next;
            next.reserve(deleted.kept.size());
            for (auto p : deleted.kept) next.push_back(original[p]);
            original = std::move(next);
            for (auto o : it.removed_original) result.final_mask.set(o, false);
        } else {
            --beta;
        }
        it.beta_remaining = beta;
        result.final_mask.commit();
        result.iterations.push_back(std::move(it));

        if (mask_phase.last_feature_guard) {
            result.termination = "last_feature";
            break;
        }
        if (beta == 0) result.termination = "beta_exhausted";
    }
    result.converged = result.termination == "beta_exhausted";

    result.selected_indices = result.final_mask.active_indices();
    for (auto i : result.selected_indices) result.selected_feature_names.push_back(train.feature_names[i]);
    result.sparsity = static_cast<double>(result.selected_indices.size()) / static_cast<double>(m);
    return result;
}

nlohmann::json SelectionResult::to_json() const {
    nlohmann::json iters = nlohmann::json::array();
    for (const auto& it : iterations) {
        nlohmann::json draws = nlohmann::json::array();
        for (const auto& d : it.draws) {
            draws.push_back({{"index", d.original_index},
                             {"l_th_before", d.l_th_before},
                             {"l_mask", d.l_mask},
                             {"accepted", d.accepted},
                             {"mu_remaining", d.mu_remaining}});
        }
        iters.push_back({{"iteration", it.iteration},
                         {"active_before", it.active_before},
                         {"l_th_model", it.l_th_model},
                         {"l_th_final", it.l_th_final},
                         {"removed", it.removed_original},
                         {"fit_calls", it.fit_calls},
                         {"mask_unchanged", it.mask_unchanged},
                         {"beta_remaining", it.beta_remaining},
                         {"draws", draws}});
    }
    nlohmann::json trajectory = nlohmann::json::array();
    for (const auto& p : loss_trajectory) trajectory.push_back({p.iteration, p.l_th});
    return {{"original_feature_names", original_feature_names},
            {"final_mask", final_mask.bits()},
            {"mask_history", final_mask.history()},
            {"selected_indices", selected_indices},
            {"selected_feature_names", selected_feature_names},
            {"sparsity", sparsity},
            {"converged", converged},
            {"termination", termination},
            {"total_fit_calls", total_fit_calls},
            {"params", afsbm::to_json(params)},
            {"index_selection", kIndexSelectionRule},
            {"loss_trajectory", trajectory},
            {"iterations", iters}};
}

}  // namespace afsbm
