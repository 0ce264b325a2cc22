#include "afsbm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include "afsbm/baselines.hpp"

namespace afsbm {

int default_parallelism() {
    if (const char* env = std::getenv("AFSBM_PARALLELISM")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

void parallel_for(std::size_t n, int parallelism, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, parallelism)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace detail {

GridSearchResult finish_grid_search(std::vector<double> losses, std::vector<std::string> errors) {
    GridSearchResult r;
    r.losses = std::move(losses);
    r.errors = std::move(errors);
    bool found = false;
    for (std::size_t i = 0; i < r.losses.size(); ++i) {
        if (!r.errors[i].empty() || !std::isfinite(r.losses[i])) continue;
        if (!found || r.losses[i] < r.best_loss) {
            r.best_loss = r.losses[i];
            r.best_index = i;
            found = true;
        }
    }
    if (!found) {
        std::string first;
        for (const auto& e : r.errors)
            if (!e.empty()) {
                first = e;
                break;
            }
        throw std::runtime_error("grid_search: every cell failed" + (first.empty() ? "" : ": " + first));
    }
    return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Grids

namespace {

template <class T>
std::vector<T> or_default(const std::vector<T>& v, T fallback) {
    return v.empty() ? std::vector<T>{fallback} : v;
}

template <class T>
void check_subset(const std::vector<T>& values, const std::vector<T>& allowed, const char* name) {
    for (const auto& v : values) {
        if (std::find(allowed.begin(), allowed.end(), v) == allowed.end())
            throw std::invalid_argument(std::string("paper_mode: value outside the published grid for ") + name);
    }
}

}  // namespace

LearnerGrid LearnerGrid::published_gbdt() {
    LearnerGrid g;
    g.kind = LearnerKind::gbdt;
    g.num_leaves = {20, 50, 100};
    g.learning_rate = {0.01, 0.1, 0.5};
    g.n_estimators = {20, 50, 100};
    g.subsample = {0.6, 0.8, 1.0};
    g.colsample_bytree = {0.6, 0.8, 1.0};
    g.min_child_samples = {5, 10};
    return g;
}

LearnerGrid LearnerGrid::published_mlp() {
    LearnerGrid g;
    g.kind = LearnerKind::mlp;
    g.hidden_layer_sizes = {{20}, {40}, {10}, {20, 10}};
    g.activation = {Activation::relu, Activation::logistic};
    g.alpha = {0.0001, 0.001, 0.01};
    g.learning_rate_init = {0.001, 0.01};
    return g;
}

std::vector<LearnerConfig> LearnerGrid::expand(Task task, std::uint64_t seed) const {
    std::vector<LearnerConfig> out;
    LearnerConfig base;
    base.kind = kind;
    base.task = task;
    base.seed = seed;
    if (kind == LearnerKind::gbdt) {
        const GbdtParams d;
        for (int nl : or_default(num_leaves, d.num_leaves))
            for (double lr : or_default(learning_rate, d.learning_rate))
                for (int ne : or_default(n_estimators, d.n_estimators))
                    for (double ss : or_default(subsample, d.subsample))
                        for (double cs : or_default(colsample_bytree, d.colsample_bytree))
                            for (int mc : or_default(min_child_samples, d.min_child_samples)) {
                                LearnerConfig c = base;
                                c.gbdt.num_leaves = nl;
                                c.gbdt.learning_rate = lr;
                                c.gbdt.n_estimators = ne;
                                c.gbdt.subsample = ss;
                                c.gbdt.colsample_bytree = cs;
                                c.gbdt.min_child_samples = mc;
                                out.push_back(c);
                            }
    } else {
        const MlpParams d;
        for (const auto& hs : or_default(hidden_layer_sizes, d.hidden_layer_sizes))
            for (Activation a : or_default(activation, d.activation))
                for (double al : or_default(alpha, d.alpha))
                    for (double lr : or_default(learning_rate_init, d.learning_rate_init)) {
                        LearnerConfig c = base;
                        c.mlp.hidden_layer_sizes = hs;
                        c.mlp.activation = a;
                        c.mlp.alpha = al;
                        c.mlp.learning_rate_init = lr;
                        out.push_back(c);
                    }
    }
    return out;
}

void LearnerGrid::check_published_values() const {
    const LearnerGrid p = kind == LearnerKind::gbdt ? published_gbdt() : published_mlp();
    check_subset(num_leaves, p.num_leaves, "num_leaves");
    check_subset(learning_rate, p.learning_rate, "learning_rate");
    check_subset(n_estimators, p.n_estimators, "n_estimators");
    check_subset(subsample, p.subsample, "subsample");
    check_subset(colsample_bytree, p.colsample_bytree, "colsample_bytree");
    check_subset(min_child_samples, p.min_child_samples, "min_child_samples");
    check_subset(hidden_layer_sizes, p.hidden_layer_sizes, "hidden_layer_sizes");
    check_subset(activation, p.activation, "activation");
    check_subset(alpha, p.alpha, "alpha");
    check_subset(learning_rate_init, p.learning_rate_init, "learning_rate_init");
}

std::string_view to_string(SelectorMethod method) {
    switch (method) {
        case SelectorMethod::vanilla: return "vanilla";
        case SelectorMethod::cross_correlation: return "cross_correlation";
        case SelectorMethod::mutual_information: return "mutual_information";
        case SelectorMethod::rfe: return "rfe";
        case SelectorMethod::afs_bm: return "afs_bm";
    }
    return "unknown";
}

SelectorMethod parse_selector_method(std::string_view text) {
    for (auto m : {SelectorMethod::vanilla, SelectorMethod::cross_correlation, SelectorMethod::mutual_information,
                   SelectorMethod::rfe, SelectorMethod::afs_bm}) {
        if (to_string(m) == text) return m;
    }
    throw std::invalid_argument("unknown selector method '" + std::string(text) + "'");
}

SelectorGrid SelectorGrid::published(SelectorMethod method) {
    SelectorGrid g;
    g.method = method;
    if (method == SelectorMethod::cross_correlation)
        g.gamma = {0.02, 0.03, 0.04, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.50};
    if (method == SelectorMethod::afs_bm) {
        g.mu = {5, 6, 7, 8, 9, 10};
        g.beta = {3, 4, 5, 6, 7};
        g.delta_L = {0.01, 0.015, 0.02, 0.025, 0.03, 0.04, 0.05};
    }
    return g;
}

void SelectorGrid::check_published_values(std::size_t n_features) const {
    const SelectorGrid p = published(method);
    check_subset(gamma, p.gamma, "gamma");
    check_subset(mu, p.mu, "mu");
    check_subset(beta, p.beta, "beta");
    check_subset(delta_L, p.delta_L, "delta_L");
    for (auto v : k)
        if (v < 2 || v > n_features) throw std::invalid_argument("paper_mode: k outside {2..M}");
}

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
    split.validate();
    if (learners.empty()) throw std::invalid_argument("ExperimentConfig: no learners");
    if (selectors.empty()) throw std::invalid_argument("ExperimentConfig: no selectors");
    for (const auto& lg : learners) {
        for (const auto& c : lg.expand(task, seed)) c.validate();
        if (paper_mode) lg.check_published_values();
    }
    for (const auto& s : selectors) {
        for (double g : s.gamma)
            if (!(g >= 0.0 && g <= 1.0)) throw std::invalid_argument("ExperimentConfig: gamma outside [0, 1]");
        for (auto v : s.k)
            if (v == 0) throw std::invalid_argument("ExperimentConfig: k must be positive");
        if (s.method == SelectorMethod::mutual_information && s.mi_bins < 2)
            throw std::invalid_argument("ExperimentConfig: mi_bins must be >= 2");
        for (int v : s.mu)
            if (v < 1) throw std::invalid_argument("ExperimentConfig: mu must be >= 1");
        for (int v : s.beta)
            if (v < 1) throw std::invalid_argument("ExperimentConfig: beta must be >= 1");
        for (double v : s.delta_L)
            if (!(v > 0.0)) throw std::invalid_argument("ExperimentConfig: delta_L must be positive");
        if (s.max_outer_iterations < 0)
            throw std::invalid_argument("ExperimentConfig: max_outer_iterations must be >= 0");
        if (paper_mode) s.check_published_values(std::numeric_limits<std::size_t>::max());
    }
    if (source.type == SourceType::synthetic) source.synthetic.validate();
    if (source.type != SourceType::synthetic && source.path.empty())
        throw std::invalid_argument("ExperimentConfig: data source needs a path");
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) path = base / path;
    return path;
}

template <class T>
std::vector<T> read_list(const nlohmann::json& j, const char* key, std::vector<T> fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_array()) return v.get<std::vector<T>>();
    return {v.get<T>()};
}

LearnerGrid learner_grid_from_json(const nlohmann::json& j) {
    const auto kind = parse_learner_kind(j.at("kind").get<std::string>());
    LearnerGrid g = kind == LearnerKind::gbdt ? LearnerGrid::published_gbdt() : LearnerGrid::published_mlp();
    if (kind == LearnerKind::gbdt) {
        g.num_leaves = read_list(j, "num_leaves", g.num_leaves);
        g.learning_rate = read_list(j, "learning_rate", g.learning_rate);
        g.n_estimators = read_list(j, "n_estimators", g.n_estimators);
        g.subsample = read_list(j, "subsample", g.subsample);
        g.colsample_bytree = read_list(j, "colsample_bytree", g.colsample_bytree);
        g.min_child_samples = read_list(j, "min_child_samples", g.min_child_samples);
    } else {
        g.hidden_layer_sizes = read_list(j, "hidden_layer_sizes", g.hidden_layer_sizes);
        if (j.contains("activation")) {
            g.activation.clear();
            for (const auto& a : read_list<std::string>(j, "activation", {})) g.activation.push_back(parse_activation(a));
        }
        g.alpha = read_list(j, "alpha", g.alpha);
        g.learning_rate_init = read_list(j, "learning_rate_init", g.learning_rate_init);
    }
    return g;
}

SelectorGrid selector_grid_from_json(const nlohmann::json& j) {
    SelectorGrid g = SelectorGrid::published(parse_selector_method(j.at("method").get<std::string>()));
    g.gamma = read_list(j, "gamma", g.gamma);
    g.k = read_list(j, "k", g.k);
    g.mi_bins = j.value("mi_bins", g.mi_bins);
    g.mu = read_list(j, "mu", g.mu);
    g.beta = read_list(j, "beta", g.beta);
    g.delta_L = read_list(j, "delta_L", g.delta_L);
    g.max_outer_iterations = j.value("max_outer_iterations", g.max_outer_iterations);
    return g;
}

SourceType parse_source_type(const std::string& s) {
    if (s == "synthetic") return SourceType::synthetic;
    if (s == "csv") return SourceType::csv;
    if (s == "time_series") return SourceType::time_series;
    if (s == "series_dir") return SourceType::series_dir;
    throw std::invalid_argument("unknown source type '" + s + "'");
}

std::string_view to_string(SourceType t) {
    switch (t) {
        case SourceType::synthetic: return "synthetic";
        case SourceType::csv: return "csv";
        case SourceType::time_series: return "time_series";
        case SourceType::series_dir: return "series_dir";
    }
    return "unknown";
}

}  // namespace

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    ExperimentConfig c;
    c.name = j.value("name", c.name);
    c.task = parse_task(j.value("task", std::string("regression")));
    c.seed = j.value("seed", std::uint64_t{0});
    c.paper_mode = j.value("paper_mode", false);
    c.parallelism = j.value("parallelism", 0);
    c.normalize = j.value("normalize", true);
    c.normalize_target = j.value("normalize_target", c.task == Task::regression);
    c.output_dir = resolve(base_dir, j.value("output_dir", std::string("afsbm_out")));

    const auto& s = j.at("source");
    c.source.type = parse_source_type(s.at("type").get<std::string>());
    if (c.source.type == SourceType::synthetic) {
        auto& sp = c.source.synthetic;
        sp.n_samples = s.value("n_samples", sp.n_samples);
        sp.n_features = s.value("n_features", sp.n_features);
        sp.n_informative = s.value("n_informative", sp.n_informative);
        sp.noise_variance = s.value("noise_variance", sp.noise_variance);
        sp.feature_low = s.value("feature_low", sp.feature_low);
        sp.feature_high = s.value("feature_high", sp.feature_high);
        sp.seed = s.value("seed", c.seed);
    } else {
        c.source.path = resolve(base_dir, s.at("path").get<std::string>());
        c.source.target_column = s.value("target", c.source.target_column);
        if (s.contains("timestamp") && !s.at("timestamp").is_null())
            c.source.timestamp_column = s.at("timestamp").get<std::string>();
        c.source.categorical_target = s.value("categorical_target", false);
        c.source.recipe.lags = read_list(s, "lags", c.source.recipe.lags);
        c.source.recipe.windows = read_list(s, "windows", c.source.recipe.windows);
        c.source.recipe.time_encodings = s.value("time_encodings", c.source.recipe.time_encodings);
        c.source.max_series = s.value("max_series", c.source.max_series);
        // series_dir subsampling draws from the synthetic seed slot
        c.source.synthetic.seed = c.seed;
    }

    const bool temporal = c.source.type == SourceType::time_series || c.source.type == SourceType::series_dir;
    c.split.mode = temporal ? SplitMode::chronological : SplitMode::random;
    if (j.contains("split")) {
        const auto& sp = j.at("split");
        if (sp.contains("mode")) {
            const auto mode = sp.at("mode").get<std::string>();
            if (mode == "chronological") c.split.mode = SplitMode::chronological;
            else if (mode == "random") c.split.mode = SplitMode::random;
            else throw std::invalid_argument("unknown split mode '" + mode + "'");
        }
        c.split.test_fraction = sp.value("test_fraction", c.split.test_fraction);
        c.split.mask_val_fraction = sp.value("mask_val_fraction", c.split.mask_val_fraction);
        c.split.model_val_fraction = sp.value("model_val_fraction", c.split.model_val_fraction);
    }
    c.split.seed = c.seed;

    if (j.contains("learners")) {
        for (const auto& l : j.at("learners")) c.learners.push_back(learner_grid_from_json(l));
    } else {
        c.learners.push_back(LearnerGrid::published_gbdt());
    }
    if (j.contains("selectors")) {
        for (const auto& sel : j.at("selectors")) c.selectors.push_back(selector_grid_from_json(sel));
    } else {
        for (auto m : {SelectorMethod::vanilla, SelectorMethod::cross_correlation, SelectorMethod::mutual_information,
                       SelectorMethod::rfe, SelectorMethod::afs_bm})
            c.selectors.push_back(SelectorGrid::published(m));
    }
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("config '" + path.string() + "': " + e.what());
    }
    return experiment_config_from_json(j, path.parent_path());
}

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json learners = nlohmann::json::array();
    for (const auto& g : c.learners) {
        nlohmann::json lj = {{"kind", std::string(to_string(g.kind))}};
        if (g.kind == LearnerKind::gbdt) {
            lj["num_leaves"] = g.num_leaves;
            lj["learning_rate"] = g.learning_rate;
            lj["n_estimators"] = g.n_estimators;
            lj["subsample"] = g.subsample;
            lj["colsample_bytree"] = g.colsample_bytree;
            lj["min_child_samples"] = g.min_child_samples;
        } else {
            lj["hidden_layer_sizes"] = g.hidden_layer_sizes;
            std::vector<std::string> acts;
            for (auto a : g.activation) acts.emplace_back(to_string(a));
            lj["activation"] = acts;
            lj["alpha"] = g.alpha;
            lj["learning_rate_init"] = g.learning_rate_init;
        }
        learners.push_back(lj);
    }
    nlohmann::json selectors = nlohmann::json::array();
    for (const auto& s : c.selectors) {
        nlohmann::json sj = {{"method", std::string(to_string(s.method))}};
        switch (s.method) {
            case SelectorMethod::cross_correlation: sj["gamma"] = s.gamma; break;
            case SelectorMethod::mutual_information:
                sj["k"] = s.k;
                sj["mi_bins"] = s.mi_bins;
                break;
            case SelectorMethod::rfe: sj["k"] = s.k; break;
            case SelectorMethod::afs_bm:
                sj["mu"] = s.mu;
                sj["beta"] = s.beta;
                sj["delta_L"] = s.delta_L;
                sj["max_outer_iterations"] = s.max_outer_iterations;
                break;
            case SelectorMethod::vanilla: break;
        }
        selectors.push_back(sj);
    }
    nlohmann::json source = {{"type", std::string(to_string(c.source.type))}};
    if (c.source.type == SourceType::synthetic) {
        const auto& sp = c.source.synthetic;
        source.update({{"n_samples", sp.n_samples},
                       {"n_features", sp.n_features},
                       {"n_informative", sp.n_informative},
                       {"noise_variance", sp.noise_variance},
                       {"feature_low", sp.feature_low},
                       {"feature_high", sp.feature_high},
                       {"seed", sp.seed}});
    } else {
        source["path"] = c.source.path.string();
        source["target"] = c.source.target_column;
        source["timestamp"] = c.source.timestamp_column ? nlohmann::json(*c.source.timestamp_column) : nlohmann::json();
        source["categorical_target"] = c.source.categorical_target;
        if (c.source.type != SourceType::csv) {
            source["lags"] = c.source.recipe.lags;
            source["windows"] = c.source.recipe.windows;
            source["time_encodings"] = c.source.recipe.time_encodings;
        }
        if (c.source.type == SourceType::series_dir) source["max_series"] = c.source.max_series;
    }
    return {{"name", c.name},
            {"task", std::string(to_string(c.task))},
            {"seed", c.seed},
            {"paper_mode", c.paper_mode},
            {"normalize", c.normalize},
            {"normalize_target", c.normalize_target},
            {"source", source},
            {"split",
             {{"mode", c.split.mode == SplitMode::random ? "random" : "chronological"},
              {"test_fraction", c.split.test_fraction},
              {"mask_val_fraction", c.split.mask_val_fraction},
              {"model_val_fraction", c.split.model_val_fraction}}},
            {"learners", learners},
            {"selectors", selectors}};
}

// ---------------------------------------------------------------------------
// Data sources

namespace {

Dataset load_time_series(const std::filesystem::path& path, const DataSource& source) {
    CsvOptions opts;
    opts.target_column = source.target_column;
    opts.timestamp_column = source.timestamp_column;
    const Dataset raw = load_csv(path, opts);
    const std::vector<std::string>* stamps = raw.timestamps ? &*raw.timestamps : nullptr;
    return build_time_series_dataset(raw.targets, stamps, source.recipe);
}

}  // namespace

LoadedSource load_source(const DataSource& source, Task task) {
    LoadedSource out;
    switch (source.type) {
        case SourceType::synthetic: {
            auto gen = generate(source.synthetic);
            out.datasets.push_back(std::move(gen.data));
            out.labels.push_back("synthetic");
            out.ground_truth = std::move(gen.informative);
            break;
        }
        case SourceType::csv: {
            CsvOptions opts;
            opts.target_column = source.target_column;
            opts.timestamp_column = source.timestamp_column;
            opts.categorical_target = source.categorical_target;
            out.datasets.push_back(load_csv(source.path, opts));
            out.labels.push_back(source.path.filename().string());
            break;
        }
        case SourceType::time_series:
            out.datasets.push_back(load_time_series(source.path, source));
            out.labels.push_back(source.path.filename().string());
            break;
        case SourceType::series_dir: {
            if (!std::filesystem::is_directory(source.path))
                throw std::runtime_error("series_dir: '" + source.path.string() + "' is not a directory");
            std::vector<std::filesystem::path> files;
            for (const auto& e : std::filesystem::directory_iterator(source.path))
                if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            if (files.empty()) throw std::runtime_error("series_dir: no .csv files in '" + source.path.string() + "'");
            if (files.size() > source.max_series) {
                std::mt19937_64 rng(source.synthetic.seed);
                std::shuffle(files.begin(), files.end(), rng);
                files.resize(source.max_series);
                std::sort(files.begin(), files.end());
            }
            for (const auto& f : files) {
                out.datasets.push_back(load_time_series(f, source));
                out.labels.push_back(f.filename().string());
            }
            break;
        }
    }
    if (task == Task::binary_classification) {
        for (const auto& d : out.datasets)
            for (double v : d.targets)
                if (v != 0.0 && v != 1.0)
                    throw std::invalid_argument("classification targets must be 0/1 (set categorical_target for labels)");
    }
    for (const auto& d : out.datasets) d.validate();
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

// Hands out the four splits and counts every read into the cell's access log.
class TrackedSplits {
public:
    TrackedSplits(const Splits& splits, SplitAccessLog& log) : splits_(splits), log_(log) {}
    const Dataset& train() { ++log_.train; return splits_.train; }
    const Dataset& model_val() { ++log_.model_val; return splits_.model_val; }
    const Dataset& mask_val() { ++log_.mask_val; return splits_.mask_val; }
    const Dataset& test() { ++log_.test; return splits_.test; }

private:
    const Splits& splits_;
    SplitAccessLog& log_;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Model fit_on_columns(const LearnerConfig& learner, const Dataset& train, const Dataset& model_val,
                     std::span<const std::size_t> cols) {
    const Matrix x = train.features.select_columns(cols);
    if (learner.kind == LearnerKind::mlp) {
        const Matrix xv = model_val.features.select_columns(cols);
        const ValidationData val{xv, model_val.targets};
        return fit(learner, x, train.targets, &val);
    }
    return fit(learner, x, train.targets);
}

struct Candidate {
    BinaryMask mask;
    nlohmann::json params = nlohmann::json::object();
    nlohmann::json log = nlohmann::json::object();
};

std::vector<std::size_t> k_values(const SelectorGrid& g, std::size_t m) {
    std::vector<std::size_t> ks = g.k;
    if (ks.empty())
        for (std::size_t k = std::min<std::size_t>(2, m); k <= m; ++k) ks.push_back(k);
    for (auto k : ks)
        if (k == 0 || k > m)
            throw std::invalid_argument("selector k = " + std::to_string(k) + " outside [1, " + std::to_string(m) + "]");
    return ks;
}

CellResult run_cell(const ExperimentConfig& config, const SelectorGrid& selector, const LearnerTuning& tuned,
                    const Splits& splits, std::uint64_t seed,
                    const std::optional<std::vector<std::size_t>>& ground_truth, int parallelism) {
    CellResult cell;
    cell.selector = selector.method;
    cell.learner = tuned.kind;
    cell.learner_config = tuned.best;
    cell.seed = seed;
    const auto start = std::chrono::steady_clock::now();

    if (selector.method == SelectorMethod::rfe && tuned.kind != LearnerKind::gbdt) {
        cell.status = "skipped";
        cell.error = "rfe ranks features by gbdt split gain; not defined for mlp";
        return cell;
    }
    try {
        TrackedSplits data(splits, cell.access);
        const Dataset& train = data.train();
        const Dataset& model_val = data.model_val();
        const std::size_t m = train.cols();
        const bool y_is_class = config.task == Task::binary_classification;

        std::size_t n_candidates = 0;
        std::function<Candidate(std::size_t)> make;
        switch (selector.method) {
            case SelectorMethod::vanilla:
                n_candidates = 1;
                make = [m](std::size_t) { return Candidate{BinaryMask::ones(m)}; };
                break;
            case SelectorMethod::cross_correlation: {
                cell.scores = cross_correlation_scores(train.features, train.targets);
                const auto gammas = selector.gamma.empty() ? SelectorGrid::published(selector.method).gamma : selector.gamma;
                n_candidates = gammas.size();
                make = [&, gammas](std::size_t i) {
                    Candidate c{BinaryMask::zeros(m)};
                    for (std::size_t j = 0; j < m; ++j)
                        if (std::abs(cell.scores[j]) > gammas[i]) c.mask.set(j, true);
                    c.params = {{"gamma", gammas[i]}};
                    return c;
                };
                break;
            }
            case SelectorMethod::mutual_information: {
                cell.scores = mutual_information_scores(train.features, train.targets, selector.mi_bins, y_is_class);
                const auto ks = k_values(selector, m);
                n_candidates = ks.size();
                make = [&, ks](std::size_t i) {
                    return Candidate{top_k_mask(cell.scores, ks[i]), {{"k", ks[i]}, {"mi_bins", selector.mi_bins}}};
                };
                break;
            }
            case SelectorMethod::rfe: {
                const auto ks = k_values(selector, m);
                const auto path = std::make_shared<RfePath>(
                    rfe_path(tuned.best, train.features, train.targets, *std::min_element(ks.begin(), ks.end())));
                cell.scores.assign(m, static_cast<double>(m));
                std::vector<std::size_t> order;
                for (std::size_t r = 0; r < path->rounds.size(); ++r) {
                    cell.scores[path->rounds[r].eliminated] = static_cast<double>(r);
                    order.push_back(path->rounds[r].eliminated);
                }
                cell.selection_log["elimination_order"] = order;
                cell.selection_log["path_fit_calls"] = path->fit_calls;
                n_candidates = ks.size();
                make = [path, ks, m](std::size_t i) {
                    return Candidate{rfe_mask_from_path(*path, m, ks[i]), {{"k", ks[i]}}};
                };
                break;
            }
            case SelectorMethod::afs_bm: {
                const Dataset& mask_val = data.mask_val();
                const auto p = SelectorGrid::published(SelectorMethod::afs_bm);
                const auto mus = selector.mu.empty() ? p.mu : selector.mu;
                const auto betas = selector.beta.empty() ? p.beta : selector.beta;
                const auto dls = selector.delta_L.empty() ? p.delta_L : selector.delta_L;
                std::vector<AfsBmParams> grid;
                for (int mu : mus)
                    for (int beta : betas)
                        for (double dl : dls) grid.push_back({mu, beta, dl, seed, selector.max_outer_iterations});
                n_candidates = grid.size();
                make = [&, grid](std::size_t i) {
                    const auto result = run_afs_bm(tuned.best, train, mask_val, grid[i]);
                    return Candidate{BinaryMask(result.final_mask.bits()), to_json(grid[i]), result.to_json()};
                };
                break;
            }
        }

        std::vector<Candidate> candidates(n_candidates);
        std::vector<std::size_t> cells(n_candidates);
        std::iota(cells.begin(), cells.end(), std::size_t{0});
        const std::function<double(const std::size_t&)> objective = [&](const std::size_t& i) {
            candidates[i] = make(i);
            const auto cols = candidates[i].mask.active_indices();
            if (cols.empty()) throw std::runtime_error("selector kept no features");
            const Model model = fit_on_columns(tuned.best, train, model_val, cols);
            return evaluate(model, model_val.features.select_columns(cols), model_val.targets);
        };
        const auto search = grid_search<std::size_t>(cells, objective, parallelism);
        cell.grid_cells = n_candidates;

        nlohmann::json grid_log = nlohmann::json::array();
        for (std::size_t i = 0; i < n_candidates; ++i) {
            nlohmann::json entry = {{"params", candidates[i].params}};
            if (search.errors[i].empty()) {
                entry["validation_loss"] = search.losses[i];
                entry["selected_count"] = candidates[i].mask.popcount();
            } else {
                entry["error"] = search.errors[i];
            }
            grid_log.push_back(entry);
        }

        Candidate& best = candidates[search.best_index];
        cell.selector_params = best.params;
        cell.validation_loss = search.best_loss;
        if (selector.method == SelectorMethod::afs_bm) cell.selection_log = best.log;
        cell.selection_log["grid"] = grid_log;
        cell.selected_indices = best.mask.active_indices();
        for (auto j : cell.selected_indices) cell.selected_names.push_back(train.feature_names[j]);
        if (ground_truth) {
            const std::set<std::size_t> truth(ground_truth->begin(), ground_truth->end());
            std::size_t inf = 0;
            for (auto j : cell.selected_indices) inf += truth.count(j);
            cell.informative_selected = inf;
            cell.redundant_selected = cell.selected_indices.size() - inf;
        }

        const Model final_model = fit_on_columns(tuned.best, train, model_val, cell.selected_indices);
        const Dataset& test = data.test();
        const Matrix x_test = test.features.select_columns(cell.selected_indices);
        const auto prediction = predict(final_model, x_test);
        cell.test_loss = loss(loss_kind(config.task), test.targets, prediction);
        if (config.task == Task::regression) cell.test_squared_errors = squared_errors(test.targets, prediction);
        cell.model = final_model.to_json();
    } catch (const std::exception& e) {
        cell.status = "failed";
        cell.error = e.what();
    }
    cell.wall_time_s = seconds_since(start);
    return cell;
}

}  // namespace

DatasetReport run_pipeline(const ExperimentConfig& config, const Dataset& data, std::uint64_t seed,
                           const std::string& label, const std::optional<std::vector<std::size_t>>& ground_truth) {
    data.validate();
    const int parallelism = config.parallelism > 0 ? config.parallelism : default_parallelism();
    if (config.paper_mode)
        for (const auto& s : config.selectors) s.check_published_values(data.cols());

    DatasetReport report;
    report.label = label;
    report.seed = seed;
    report.n_rows = data.rows();
    report.feature_names = data.feature_names;
    report.ground_truth = ground_truth;

    SplitSpec spec = config.split;
    spec.seed = seed;
    Splits splits = split(data, spec);
    report.rows = splits.rows;
    if (config.normalize) {
        const auto params = fit_normalization(splits.train, config.normalize_target && config.task == Task::regression);
        splits.train = params.apply(splits.train);
        splits.model_val = params.apply(splits.model_val);
        splits.mask_val = params.apply(splits.mask_val);
        splits.test = params.apply(splits.test);
        report.normalization = params;
    }

    for (const auto& grid : config.learners) {
        const auto configs = grid.expand(config.task, seed);
        const std::function<double(const LearnerConfig&)> objective = [&](const LearnerConfig& c) {
            std::vector<std::size_t> all(splits.train.cols());
            std::iota(all.begin(), all.end(), std::size_t{0});
            const Model m = fit_on_columns(c, splits.train, splits.model_val, all);
            return evaluate(m, splits.model_val.features, splits.model_val.targets);
        };
        const auto result = grid_search<LearnerConfig>(configs, objective, parallelism);
        const auto failed = static_cast<std::size_t>(
            std::count_if(result.errors.begin(), result.errors.end(), [](const std::string& e) { return !e.empty(); }));
        report.tuning.push_back({grid.kind, configs[result.best_index], result.best_loss, configs.size(), failed});
    }

    for (const auto& selector : config.selectors)
        for (const auto& tuned : report.tuning)
            report.cells.push_back(run_cell(config, selector, tuned, splits, seed, ground_truth, parallelism));
    return report;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    ExperimentReport report;
    report.name = config.name;
    report.task = config.task;
    report.seed = config.seed;
    report.config = to_json(config);
    report.metadata = {
        {"index_selection", kIndexSelectionRule},
        {"relevance_test_zero_reference", "absolute: L_mask <= delta_L"},
        {"rolling_std", "population"},
        {"ce_probability_epsilon", kProbabilityEpsilon},
        {"normalization", "fit on train split: x' = (x - mean) / max|x - mean|, zero-spread -> 0"},
        {"mi_estimator", "equal-width joint histogram, plug-in, natural log"},
        {"feature_importance", "total split gain (gbdt)"},
        {"gbdt", "leaf-wise growth, histogram split finding (64 bins)"},
        {"mlp", "mini-batch gradient descent, batch 32, <= 200 epochs, early stop patience 10 on model_val"},
        {"tuning", "learner grid on all features, then selector grid with the tuned learner"},
        {"filter_scoring_split", "train"},
        {"series_seed_policy", "global_seed + series_index"},
        {"loss_sequence_padding", "zero-padded; unpadded variant is diagnostic only"},
        {"environment", {{"compiler", __VERSION__}, {"cplusplus", __cplusplus}}}};
    if (config.source.type == SourceType::synthetic) {
        report.metadata["synthetic_feature_distribution"] =
            "uniform[" + std::to_string(config.source.synthetic.feature_low) + ", " +
            std::to_string(config.source.synthetic.feature_high) + "]";
    }

    const auto loaded = load_source(config.source, config.task);
    for (std::size_t s = 0; s < loaded.datasets.size(); ++s) {
        report.datasets.push_back(
            run_pipeline(config, loaded.datasets[s], config.seed + s, loaded.labels[s], loaded.ground_truth));
    }

    if (config.source.type == SourceType::series_dir && !report.datasets.empty()) {
        const std::size_t n_cells = report.datasets.front().cells.size();
        for (std::size_t c = 0; c < n_cells; ++c) {
            std::vector<std::vector<double>> sequences;
            double loss_sum = 0.0;
            for (const auto& d : report.datasets) {
                const auto& cell = d.cells[c];
                if (cell.status != "ok") continue;
                sequences.push_back(cell.test_squared_errors);
                loss_sum += cell.test_loss;
            }
            const auto& ref = report.datasets.front().cells[c];
            AggregateCell agg{ref.selector, ref.learner, sequences.size(), std::numeric_limits<double>::quiet_NaN(), {}, {}};
            if (!sequences.empty() && !sequences.front().empty()) {
                agg.mean_test_loss = loss_sum / static_cast<double>(sequences.size());
                agg.padded = averaged_loss_sequences(sequences);
                agg.unpadded = averaged_loss_sequences_unpadded(sequences);
            }
            report.aggregates.push_back(std::move(agg));
        }
    }
    report.wall_time_s = seconds_since(start);
    return report;
}

}  // namespace afsbm
