#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "afsbm/dataset.hpp"
#include "afsbm/learners.hpp"
#include "afsbm/selection.hpp"
#include "afsbm/synthetic.hpp"
#include "afsbm/time_features.hpp"
#include "json.hpp"

namespace afsbm {

// ---------------------------------------------------------------------------
// Parallel execution

// AFSBM_PARALLELISM if set and positive, otherwise the hardware concurrency (at least 1).
int default_parallelism();

// Runs fn(0..n-1) on up to `parallelism` threads. The first exception thrown is rethrown
// after all workers finish.
void parallel_for(std::size_t n, int parallelism, const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Grid search

struct GridSearchResult {
    std::size_t best_index = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<double> losses;             // +inf for failed cells
    std::vector<std::string> errors;        // empty string for successful cells
};

namespace detail {
GridSearchResult finish_grid_search(std::vector<double> losses, std::vector<std::string> errors);
}

// Evaluates every cell (full factorial already expanded) and returns the argmin of the
// objective, ties to the first cell in grid order. Cells exposing validate() are all
// validated before any objective call. Throws if the grid is empty or every cell fails.
template <class Cell>
GridSearchResult grid_search(std::span<const Cell> grid,
                             const std::function<double(const Cell&)>& objective,
                             int parallelism = 1) {
    if (grid.empty()) throw std::invalid_argument("grid_search: empty grid");
    if constexpr (requires(const Cell& c) { c.validate(); }) {
        for (const auto& cell : grid) cell.validate();
    }
    std::vector<double> losses(grid.size(), std::numeric_limits<double>::infinity());
    std::vector<std::string> errors(grid.size());
    parallel_for(grid.size(), parallelism, [&](std::size_t i) {
        try {
            losses[i] = objective(grid[i]);
        } catch (const std::exception& e) {
            errors[i] = e.what();
            if (errors[i].empty()) errors[i] = "unknown error";
        }
    });
    return detail::finish_grid_search(std::move(losses), std::move(errors));
}

// ---------------------------------------------------------------------------
// Configuration

struct LearnerGrid {
    LearnerKind kind = LearnerKind::gbdt;
    std::vector<int> num_leaves;
    std::vector<double> learning_rate;
    std::vector<int> n_estimators;
    std::vector<double> subsample;
    std::vector<double> colsample_bytree;
    std::vector<int> min_child_samples;
    std::vector<std::vector<int>> hidden_layer_sizes;
    std::vector<Activation> activation;
    std::vector<double> alpha;
    std::vector<double> learning_rate_init;

    static LearnerGrid published_gbdt();
    static LearnerGrid published_mlp();

    // Full factorial in declaration order (last field varies fastest).
    std::vector<LearnerConfig> expand(Task task, std::uint64_t seed) const;
    // Throws when any value lies outside the published search space.
    void check_published_values() const;
};

enum class SelectorMethod { vanilla, cross_correlation, mutual_information, rfe, afs_bm };

std::string_view to_string(SelectorMethod method);
SelectorMethod parse_selector_method(std::string_view text);

struct SelectorGrid {
    SelectorMethod method = SelectorMethod::vanilla;
    std::vector<double> gamma;        // cross_correlation
    std::vector<std::size_t> k;       // mutual_information / rfe; empty means 2..M
    int mi_bins = 10;
    std::vector<int> mu;              // afs_bm
    std::vector<int> beta;
    std::vector<double> delta_L;
    int max_outer_iterations = 50;

    static SelectorGrid published(SelectorMethod method);
    void check_published_values(std::size_t n_features) const;
};

enum class SourceType { synthetic, csv, time_series, series_dir };

struct DataSource {
    SourceType type = SourceType::synthetic;
    SyntheticSpec synthetic;
    std::filesystem::path path;
    std::string target_column = "y";
    std::optional<std::string> timestamp_column;
    bool categorical_target = false;
    TimeSeriesRecipe recipe;
    std::size_t max_series = 100;
};

struct ExperimentConfig {
    std::string name = "experiment";
    DataSource source;
    Task task = Task::regression;
    SplitSpec split;
    bool normalize = true;
    bool normalize_target = true;
    std::vector<LearnerGrid> learners;
    std::vector<SelectorGrid> selectors;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "afsbm_out";
    bool paper_mode = false;
    int parallelism = 0;  // 0 = default_parallelism()

    void validate() const;
};

// Relative paths in the document are resolved against `base_dir`.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Experiment

// Counts reads of each split made while a cell runs.
struct SplitAccessLog {
    int train = 0;
    int model_val = 0;
    int mask_val = 0;
    int test = 0;
};

struct CellResult {
    SelectorMethod selector = SelectorMethod::vanilla;
    LearnerKind learner = LearnerKind::gbdt;
    std::string status = "ok";  // ok | failed | skipped
    std::string error;
    LearnerConfig learner_config;
    nlohmann::json selector_params = nlohmann::json::object();
    double validation_loss = std::numeric_limits<double>::quiet_NaN();
    double test_loss = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> test_squared_errors;
    std::vector<std::size_t> selected_indices;
    std::vector<std::string> selected_names;
    std::optional<std::size_t> informative_selected;
    std::optional<std::size_t> redundant_selected;
    std::size_t grid_cells = 0;
    double wall_time_s = 0.0;
    std::uint64_t seed = 0;
    nlohmann::json selection_log = nlohmann::json::object();
    std::vector<double> scores;
    nlohmann::json model = nullptr;
    SplitAccessLog access;
};

struct LearnerTuning {
    LearnerKind kind;
    LearnerConfig best;
    double validation_loss;
    std::size_t grid_cells;
    std::size_t failed_cells;
};

// One run of the pipeline on one dataset.
struct DatasetReport {
    std::string label;
    std::uint64_t seed = 0;
    std::size_t n_rows = 0;
    std::vector<std::string> feature_names;
    SplitIndices rows;
    std::optional<NormalizationParams> normalization;
    std::optional<std::vector<std::size_t>> ground_truth;
    std::vector<LearnerTuning> tuning;
    std::vector<CellResult> cells;
};

struct AggregateCell {
    SelectorMethod selector;
    LearnerKind learner;
    std::size_t series_count;
    double mean_test_loss;
    AveragedLosses padded;
    AveragedLosses unpadded;
};

struct ExperimentReport {
    std::string name;
    Task task = Task::regression;
    std::uint64_t seed = 0;
    nlohmann::json config;
    nlohmann::json metadata;
    std::vector<DatasetReport> datasets;  // one, or one per series
    std::vector<AggregateCell> aggregates;  // series_dir only
    double wall_time_s = 0.0;

    nlohmann::json to_json() const;
    // selector x learner x loss x #features
    std::string table() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
nlohmann::json to_json(const NormalizationParams& params);
NormalizationParams normalization_from_json(const nlohmann::json& j);

// Loads the configured source into one or more datasets (several for series_dir).
struct LoadedSource {
    std::vector<Dataset> datasets;
    std::vector<std::string> labels;
    std::optional<std::vector<std::size_t>> ground_truth;
};
LoadedSource load_source(const DataSource& source, Task task);

// Runs every selector x learner cell on one dataset. Throws only on configuration or data
// errors; cell failures are recorded in the result.
DatasetReport run_pipeline(const ExperimentConfig& config, const Dataset& data,
                           std::uint64_t seed, const std::string& label,
                           const std::optional<std::vector<std::size_t>>& ground_truth);

ExperimentReport run_experiment(const ExperimentConfig& config);

// Writes report.json and report.txt into the output directory.
void write_report(const ExperimentReport& report, const std::filesystem::path& output_dir);

struct RecomputedLoss {
    std::string label;
    std::string selector;
    std::string learner;
    double reported;
    double recomputed;
};

// Rebuilds every ok cell's test loss from the serialized model, selected columns, test
// row indices and normalization parameters in `report`, reloading the raw data described
// by `config`.
std::vector<RecomputedLoss> recompute_test_losses(const nlohmann::json& report,
                                                  const ExperimentConfig& config);

}  // namespace afsbm
