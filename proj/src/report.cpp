#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "afsbm/harness.hpp"

namespace afsbm {

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

double number_from(const nlohmann::json& j) {
    return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

nlohmann::json to_json(const ColumnScaling& s) {
    return {{"mean", s.mean}, {"scale", s.scale}, {"zero_spread", s.zero_spread}};
}

ColumnScaling scaling_from_json(const nlohmann::json& j) {
    return {j.at("mean").get<double>(), j.at("scale").get<double>(), j.at("zero_spread").get<bool>()};
}

nlohmann::json cell_json(const CellResult& c) {
    nlohmann::json j = {{"selector", std::string(to_string(c.selector))},
                        {"learner", std::string(to_string(c.learner))},
                        {"status", c.status},
                        {"learner_config", afsbm::to_json(c.learner_config)},
                        {"selector_params", c.selector_params},
                        {"validation_loss", number_or_null(c.validation_loss)},
                        {"test_loss", number_or_null(c.test_loss)},
                        {"selected_indices", c.selected_indices},
                        {"selected_names", c.selected_names},
                        {"n_selected", c.selected_indices.size()},
                        {"grid_cells", c.grid_cells},
                        {"wall_time_s", c.wall_time_s},
                        {"seed", c.seed},
                        {"scores", c.scores},
                        {"selection_log", c.selection_log},
                        {"test_squared_errors", c.test_squared_errors},
                        {"model", c.model},
                        {"split_access",
                         {{"train", c.access.train},
                          {"model_val", c.access.model_val},
                          {"mask_val", c.access.mask_val},
                          {"test", c.access.test}}}};
    if (!c.error.empty()) j["error"] = c.error;
    if (c.informative_selected) j["informative_selected"] = *c.informative_selected;
    if (c.redundant_selected) j["redundant_selected"] = *c.redundant_selected;
    return j;
}

nlohmann::json dataset_json(const DatasetReport& d) {
    nlohmann::json tuning = nlohmann::json::array();
    for (const auto& t : d.tuning) {
        tuning.push_back({{"learner", std::string(to_string(t.kind))},
                          {"best", afsbm::to_json(t.best)},
                          {"validation_loss", number_or_null(t.validation_loss)},
                          {"grid_cells", t.grid_cells},
                          {"failed_cells", t.failed_cells}});
    }
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : d.cells) cells.push_back(cell_json(c));
    return {{"label", d.label},
            {"seed", d.seed},
            {"n_rows", d.n_rows},
            {"feature_names", d.feature_names},
            {"rows",
             {{"train", d.rows.train},
              {"model_val", d.rows.model_val},
              {"mask_val", d.rows.mask_val},
              {"test", d.rows.test}}},
            {"normalization", d.normalization ? afsbm::to_json(*d.normalization) : nlohmann::json()},
            {"ground_truth", d.ground_truth ? nlohmann::json(*d.ground_truth) : nlohmann::json()},
            {"tuning", tuning},
            {"cells", cells}};
}

std::string format_loss(double v) {
    if (!std::isfinite(v)) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4e", v);
    return buf;
}

}  // namespace

nlohmann::json to_json(const NormalizationParams& params) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : params.columns) cols.push_back(to_json(c));
    return {{"columns", cols}, {"target", params.target ? to_json(*params.target) : nlohmann::json()}};
}

NormalizationParams normalization_from_json(const nlohmann::json& j) {
    NormalizationParams p;
    for (const auto& c : j.at("columns")) p.columns.push_back(scaling_from_json(c));
    if (j.contains("target") && !j.at("target").is_null()) p.target = scaling_from_json(j.at("target"));
    return p;
}

nlohmann::json ExperimentReport::to_json() const {
    nlohmann::json ds = nlohmann::json::array();
    for (const auto& d : datasets) ds.push_back(dataset_json(d));
    nlohmann::json agg = nlohmann::json::array();
    for (const auto& a : aggregates) {
        agg.push_back({{"selector", std::string(to_string(a.selector))},
                       {"learner", std::string(to_string(a.learner))},
                       {"series_count", a.series_count},
                       {"mean_test_loss", number_or_null(a.mean_test_loss)},
                       {"l_ave", a.padded.l_ave},
                       {"l_ave2", a.padded.l_ave2},
                       {"l_ave_unpadded", a.unpadded.l_ave},
                       {"l_ave2_unpadded", a.unpadded.l_ave2}});
    }
    return {{"name", name},
            {"task", std::string(afsbm::to_string(task))},
            {"seed", seed},
            {"config", config},
            {"metadata", metadata},
            {"datasets", ds},
            {"aggregates", agg},
            {"wall_time_s", wall_time_s}};
}

std::string ExperimentReport::table() const {
    std::ostringstream out;
    char line[256];
    const char* loss_name = task == Task::regression ? "MSE" : "CE";
    if (!aggregates.empty()) {
        std::snprintf(line, sizeof line, "%-20s %-6s %7s %14s %14s\n", "selector", "learner", "series",
                      (std::string("mean ") + loss_name).c_str(), "final l_ave2");
        out << line;
        for (const auto& a : aggregates) {
            const double last = a.padded.l_ave2.empty() ? std::numeric_limits<double>::quiet_NaN() : a.padded.l_ave2.back();
            std::snprintf(line, sizeof line, "%-20s %-6s %7zu %14s %14s\n", std::string(to_string(a.selector)).c_str(),
                          std::string(to_string(a.learner)).c_str(), a.series_count,
                          format_loss(a.mean_test_loss).c_str(), format_loss(last).c_str());
            out << line;
        }
        return out.str();
    }
    for (const auto& d : datasets) {
        out << "dataset " << d.label << " (" << d.n_rows << " rows, " << d.feature_names.size() << " features, seed "
            << d.seed << ")\n";
        std::snprintf(line, sizeof line, "%-20s %-6s %-8s %12s %12s %9s %s\n", "selector", "learner", "status",
                      (std::string("val ") + loss_name).c_str(), (std::string("test ") + loss_name).c_str(),
                      "features", d.ground_truth ? "inf/red" : "");
        out << line;
        for (const auto& c : d.cells) {
            std::string truth;
            if (c.informative_selected)
                truth = std::to_string(*c.informative_selected) + "/" + std::to_string(*c.redundant_selected);
            std::snprintf(line, sizeof line, "%-20s %-6s %-8s %12s %12s %9zu %s\n",
                          std::string(to_string(c.selector)).c_str(), std::string(to_string(c.learner)).c_str(),
                          c.status.c_str(), format_loss(c.validation_loss).c_str(), format_loss(c.test_loss).c_str(),
                          c.selected_indices.size(), truth.c_str());
            out << line;
        }
    }
    return out.str();
}

void write_report(const ExperimentReport& report, const std::filesystem::path& output_dir) {
    std::filesystem::create_directories(output_dir);
    {
        std::ofstream out(output_dir / "report.json");
        if (!out) throw std::runtime_error("cannot write " + (output_dir / "report.json").string());
        out << report.to_json().dump(2) << '\n';
    }
    std::ofstream out(output_dir / "report.txt");
    if (!out) throw std::runtime_error("cannot write " + (output_dir / "report.txt").string());
    out << report.table();
}

std::vector<RecomputedLoss> recompute_test_losses(const nlohmann::json& report, const ExperimentConfig& config) {
    const auto loaded = load_source(config.source, config.task);
    const auto& datasets = report.at("datasets");
    if (datasets.size() != loaded.datasets.size())
        throw std::runtime_error("recompute: report has " + std::to_string(datasets.size()) + " datasets, source has " +
                                 std::to_string(loaded.datasets.size()));
    std::vector<RecomputedLoss> out;
    for (std::size_t s = 0; s < datasets.size(); ++s) {
        const auto& d = datasets[s];
        Dataset test = loaded.datasets[s].select_rows(d.at("rows").at("test").get<std::vector<std::size_t>>());
        if (!d.at("normalization").is_null()) test = normalization_from_json(d.at("normalization")).apply(test);
        for (const auto& c : d.at("cells")) {
            if (c.at("status") != "ok") continue;
            const auto cols = c.at("selected_indices").get<std::vector<std::size_t>>();
            const Model model = Model::from_json(c.at("model"));
            const auto prediction = predict(model, test.features.select_columns(cols));
            out.push_back({d.at("label").get<std::string>(), c.at("selector").get<std::string>(),
                           c.at("learner").get<std::string>(), number_from(c.at("test_loss")),
                           loss(loss_kind(config.task), test.targets, prediction)});
        }
    }
    return out;
}

}  // namespace afsbm
