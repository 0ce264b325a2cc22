// Command line front end: run an experiment, run one selector on a CSV, or write
// the synthetic benchmark to disk.
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "afsbm/baselines.hpp"
#include "afsbm/harness.hpp"
#include "afsbm/selection.hpp"
#include "afsbm/synthetic.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

int cmd_run(const std::string& config_path, const std::string& output, int parallelism) {
    auto config = afsbm::load_experiment_config(config_path);
    if (!output.empty()) config.output_dir = output;
    if (parallelism > 0) config.parallelism = parallelism;
    const auto report = afsbm::run_experiment(config);
    afsbm::write_report(report, config.output_dir);
    std::cout << report.table();
    std::cout << "report written to " << (config.output_dir / "report.json").string() << '\n';
    return 0;
}

int cmd_recompute(const std::string& config_path, const std::string& report_path, double tolerance) {
    const auto config = afsbm::load_experiment_config(config_path);
    std::ifstream in(report_path);
    if (!in) throw std::runtime_error("cannot open report '" + report_path + "'");
    nlohmann::json report;
    in >> report;
    const auto losses = afsbm::recompute_test_losses(report, config);
    double worst = 0.0;
    for (const auto& l : losses) {
        const double diff = std::abs(l.reported - l.recomputed);
        worst = std::max(worst, diff);
        std::printf("%-24s %-20s %-6s reported %.17g recomputed %.17g\n", l.label.c_str(), l.selector.c_str(),
                    l.learner.c_str(), l.reported, l.recomputed);
    }
    std::printf("cells %zu max |diff| %.3g\n", losses.size(), worst);
    return losses.empty() || worst > tolerance ? kExitRuntime : 0;
}

struct SelectOptions {
    std::string method = "afs_bm";
    std::string data;
    std::string target = "y";
    std::string timestamp;
    std::string task = "regression";
    std::string learner = "gbdt";
    std::uint64_t seed = 0;
    int mu = 5;
    int beta = 3;
    double delta_L = 0.02;
    int max_outer = 50;
    double gamma = 0.1;
    std::size_t k = 10;
    int mi_bins = 10;
    bool normalize = true;
    std::string output;
};

int cmd_select(const SelectOptions& o) {
    afsbm::CsvOptions csv;
    csv.target_column = o.target;
    if (!o.timestamp.empty()) csv.timestamp_column = o.timestamp;
    const auto task = afsbm::parse_task(o.task);
    csv.categorical_target = task == afsbm::Task::binary_classification;
    const afsbm::Dataset data = afsbm::load_csv(o.data, csv);

    afsbm::SplitSpec spec;
    spec.seed = o.seed;
    spec.mode = o.timestamp.empty() ? afsbm::SplitMode::random : afsbm::SplitMode::chronological;
    auto splits = afsbm::split(data, spec);
    if (o.normalize) {
        const auto params = afsbm::fit_normalization(splits.train, task == afsbm::Task::regression);
        splits.train = params.apply(splits.train);
        splits.mask_val = params.apply(splits.mask_val);
    }

    afsbm::LearnerConfig learner;
    learner.kind = afsbm::parse_learner_kind(o.learner);
    learner.task = task;
    learner.seed = o.seed;
    learner.validate();

    nlohmann::json out = {{"method", o.method}, {"data", o.data}, {"learner", afsbm::to_json(learner)}};
    afsbm::BinaryMask mask;
    const bool y_is_class = task == afsbm::Task::binary_classification;
    if (o.method == "afs_bm") {
        afsbm::AfsBmParams p{o.mu, o.beta, o.delta_L, o.seed, o.max_outer};
        const auto result = afsbm::run_afs_bm(learner, splits.train, splits.mask_val, p);
        mask = afsbm::BinaryMask(result.final_mask.bits());
        out["selection"] = result.to_json();
    } else if (o.method == "cross_correlation") {
        const auto r = afsbm::cross_correlation_select(splits.train.features, splits.train.targets, o.gamma);
        mask = r.mask;
        out["scores"] = r.scores;
        out["gamma"] = o.gamma;
    } else if (o.method == "mutual_information") {
        const auto r = afsbm::mutual_information_select(splits.train.features, splits.train.targets, o.k, o.mi_bins,
                                                        y_is_class);
        mask = r.mask;
        out["scores"] = r.scores;
        out["k"] = o.k;
    } else if (o.method == "rfe") {
        const auto r = afsbm::rfe_select(learner, splits.train.features, splits.train.targets, o.k);
        mask = r.mask;
        out["scores"] = r.scores;
        out["k"] = o.k;
    } else {
        throw std::invalid_argument("unknown method '" + o.method + "'");
    }
    std::vector<std::string> names;
    for (auto j : mask.active_indices()) names.push_back(data.feature_names[j]);
    out["selected_indices"] = mask.active_indices();
    out["selected_features"] = names;

    if (o.output.empty()) {
        std::cout << out.dump(2) << '\n';
    } else {
        std::ofstream f(o.output);
        if (!f) throw std::runtime_error("cannot write '" + o.output + "'");
        f << out.dump(2) << '\n';
        std::cout << names.size() << " features selected; written to " << o.output << '\n';
    }
    return 0;
}

int cmd_synth(const std::string& out, const afsbm::SyntheticSpec& spec) {
    const auto gen = afsbm::generate(spec);
    afsbm::write_csv(out, gen.data, "y");
    std::cout << "wrote " << gen.data.rows() << " x " << gen.data.cols() << " to " << out << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive feature selection with binary masking"};
    app.require_subcommand(1);

    std::string config_path, output, report_path;
    int parallelism = 0;
    double tolerance = 1e-12;
    auto* run = app.add_subcommand("run", "run an experiment described by a JSON config");
    run->add_option("--config", config_path, "experiment config")->required();
    run->add_option("--output", output, "override output_dir");
    run->add_option("--parallelism", parallelism, "worker threads (default: AFSBM_PARALLELISM or all cores)");

    auto* recompute = app.add_subcommand("recompute", "recompute test losses from a saved report");
    recompute->add_option("--config", config_path, "experiment config")->required();
    recompute->add_option("--report", report_path, "report.json")->required();
    recompute->add_option("--tolerance", tolerance, "maximum allowed |reported - recomputed|");

    SelectOptions sel;
    auto* select = app.add_subcommand("select", "run one selector on a CSV file");
    select->add_option("--method", sel.method, "afs_bm | cross_correlation | mutual_information | rfe");
    select->add_option("--data", sel.data, "CSV file")->required();
    select->add_option("--target", sel.target, "target column");
    select->add_option("--timestamp", sel.timestamp, "timestamp column (switches to a chronological split)");
    select->add_option("--task", sel.task, "regression | binary_classification");
    select->add_option("--learner", sel.learner, "gbdt | mlp");
    select->add_option("--seed", sel.seed);
    select->add_option("--mu", sel.mu);
    select->add_option("--beta", sel.beta);
    select->add_option("--delta-L", sel.delta_L);
    select->add_option("--max-outer", sel.max_outer);
    select->add_option("--gamma", sel.gamma);
    select->add_option("--k", sel.k);
    select->add_option("--mi-bins", sel.mi_bins);
    select->add_flag("!--no-normalize", sel.normalize, "use raw values");
    select->add_option("--output", sel.output, "write JSON here instead of stdout");

    std::string synth_out;
    afsbm::SyntheticSpec spec;
    auto* synth = app.add_subcommand("synth", "write the synthetic benchmark as CSV");
    synth->add_option("--out", synth_out, "output CSV")->required();
    synth->add_option("--seed", spec.seed);
    synth->add_option("--samples", spec.n_samples);
    synth->add_option("--features", spec.n_features);
    synth->add_option("--informative", spec.n_informative);
    synth->add_option("--noise-variance", spec.noise_variance);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path, output, parallelism);
        if (*recompute) return cmd_recompute(config_path, report_path, tolerance);
        if (*select) return cmd_select(sel);
        if (*synth) return cmd_synth(synth_out, spec);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
