#include "afsbm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

namespace afsbm {

void Dataset::validate() const {
    if (features.rows() != targets.size()) {
        throw std::invalid_argument("Dataset: " + std::to_string(features.rows()) +
                                    " feature rows but " + std::to_string(targets.size()) +
                                    " targets");
    }
    if (feature_names.size() != features.cols()) {
        throw std::invalid_argument("Dataset: " + std::to_string(feature_names.size()) +
                                    " names for " + std::to_string(features.cols()) + " columns");
    }
    std::unordered_set<std::string> seen;
    for (const auto& name : feature_names) {
        if (!seen.insert(name).second)
            throw std::invalid_argument("Dataset: duplicate feature name '" + name + "'");
    }
    if (timestamps && timestamps->size() != features.rows())
        throw std::invalid_argument("Dataset: timestamp count does not match row count");
}

Dataset Dataset::select_rows(std::span<const std::size_t> idx) const {
    Dataset out;
    out.features = features.select_rows(idx);
    out.targets.reserve(idx.size());
    for (auto i : idx) out.targets.push_back(targets.at(i));
    out.feature_names = feature_names;
    if (timestamps) {
        std::vector<std::string> ts;
        ts.reserve(idx.size());
        for (auto i : idx) ts.push_back((*timestamps)[i]);
        out.timestamps = std::move(ts);
    }
    return out;
}

Dataset Dataset::select_columns(std::span<const std::size_t> idx) const {
    Dataset out;
    out.features = features.select_columns(idx);
    out.targets = targets;
    for (auto j : idx) out.feature_names.push_back(feature_names.at(j));
    out.timestamps = timestamps;
    return out;
}

// ---------------------------------------------------------------------------

BinaryMask::BinaryMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto b : bits_) {
        if (b > 1) throw std::invalid_argument("BinaryMask: element is not 0 or 1");
    }
}

std::size_t BinaryMask::popcount() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<std::size_t> BinaryMask::active_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i]) out.push_back(i);
    return out;
}

void BinaryMask::commit() {
    if (!history_.empty()) {
        const auto& prev = history_.back();
        if (prev.size() != bits_.size())
            throw std::logic_error("BinaryMask::commit: width changed between commits");
        for (std::size_t i = 0; i < bits_.size(); ++i) {
            if (bits_[i] && !prev[i])
                throw std::logic_error("BinaryMask::commit: feature " + std::to_string(i) +
                                       " re-added");
        }
    }
    history_.push_back(bits_);
}

// ---------------------------------------------------------------------------
// CSV

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
    return out;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& text, double& out) {
    const std::string t = trim(text);
    if (t.empty()) return false;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) throw CsvError("load_csv: missing header row", 0, "");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header) h = trim(h);

    std::set<std::string> names;
    for (const auto& h : header) {
        if (!names.insert(h).second) throw CsvError("load_csv: duplicate header '" + h + "'", 0, h);
    }

    const auto find_col = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw CsvError("load_csv: column '" + name + "' not found in header", 0, name);
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t target_col = find_col(options.target_column);
    std::optional<std::size_t> ts_col;
    if (options.timestamp_column) ts_col = find_col(*options.timestamp_column);

    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (c != target_col && (!ts_col || c != *ts_col)) feature_cols.push_back(c);

    std::vector<double> values;
    std::vector<std::string> raw_targets;
    std::vector<std::string> stamps;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty() || line == "\r") continue;
        ++row;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw CsvError("load_csv: row " + std::to_string(row) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(header.size()),
                           row, "");
        }
        for (auto c : feature_cols) {
            double v = 0.0;
            if (!parse_number(fields[c], v)) {
                throw CsvError("load_csv: non-numeric value '" + fields[c] + "' at row " +
                                   std::to_string(row) + ", column '" + header[c] + "'",
                               row, header[c]);
            }
            values.push_back(v);
        }
        raw_targets.push_back(trim(fields[target_col]));
        if (ts_col) stamps.push_back(trim(fields[*ts_col]));
    }

    Dataset d;
    d.features = Matrix(row, feature_cols.size(), std::move(values));
    for (auto c : feature_cols) d.feature_names.push_back(header[c]);

    d.targets.resize(row);
    if (options.categorical_target) {
        std::map<std::string, double> labels;
        for (const auto& t : raw_targets) labels.emplace(t, 0.0);
        double next = 0.0;
        for (auto& [label, code] : labels) code = next++;
        for (std::size_t i = 0; i < row; ++i) d.targets[i] = labels.at(raw_targets[i]);
    } else {
        for (std::size_t i = 0; i < row; ++i) {
            if (!parse_number(raw_targets[i], d.targets[i])) {
                throw CsvError("load_csv: non-numeric value '" + raw_targets[i] + "' at row " +
                                   std::to_string(i + 1) + ", column '" + options.target_column +
                                   "'",
                               i + 1, options.target_column);
            }
        }
    }
    if (ts_col) d.timestamps = std::move(stamps);
    return d;
}

void write_csv(const std::filesystem::path& path, const Dataset& d, const std::string& target_name) {
    d.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open '" + path.string() + "'");
    if (d.timestamps) out << "timestamp,";
    for (const auto& n : d.feature_names) out << n << ',';
    out << target_name << '\n';
    for (std::size_t r = 0; r < d.rows(); ++r) {
        if (d.timestamps) out << (*d.timestamps)[r] << ',';
        for (std::size_t c = 0; c < d.cols(); ++c) out << format_double(d.features(r, c)) << ',';
        out << format_double(d.targets[r]) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Normalization

ColumnScaling fit_scaling(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("normalize: empty column");
    double sum = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) throw std::invalid_argument("normalize: non-finite value");
        sum += v;
    }
    ColumnScaling s;
    s.mean = sum / static_cast<double>(values.size());
    double max_abs = 0.0;
    for (double v : values) max_abs = std::max(max_abs, std::abs(v - s.mean));
    if (max_abs == 0.0) {
        s.scale = 1.0;
        s.zero_spread = true;
    } else {
        s.scale = max_abs;
    }
    return s;
}

Matrix NormalizationParams::apply(const Matrix& x) const {
    if (x.cols() != columns.size())
        throw std::invalid_argument("NormalizationParams::apply: column count mismatch");
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = columns[c].apply(x(r, c));
    return out;
}

Dataset NormalizationParams::apply(const Dataset& d) const {
    Dataset out = d;
    out.features = apply(d.features);
    if (target) {
        for (auto& t : out.targets) t = target->apply(t);
    }
    return out;
}

NormalizationParams fit_normalization(const Dataset& d, bool include_target) {
    NormalizationParams p;
    p.columns.reserve(d.cols());
    for (std::size_t c = 0; c < d.cols(); ++c) p.columns.push_back(fit_scaling(d.features.column(c)));
    if (include_target) p.target = fit_scaling(d.targets);
    return p;
}

Normalized normalize(const Dataset& d, bool include_target) {
    auto params = fit_normalization(d, include_target);
    auto data = params.apply(d);
    return {std::move(data), std::move(params)};
}

// ---------------------------------------------------------------------------
// Splits

void SplitSpec::validate() const {
    const auto in_open_unit = [](double f) { return f > 0.0 && f < 1.0; };
    if (!in_open_unit(test_fraction) || !in_open_unit(mask_val_fraction) ||
        !in_open_unit(model_val_fraction)) {
        throw std::invalid_argument("SplitSpec: every fraction must lie in (0, 1)");
    }
    if (test_fraction + mask_val_fraction + model_val_fraction >= 1.0)
        throw std::invalid_argument("SplitSpec: fractions must sum to less than 1");
}

SplitIndices split_indices(std::size_t n, const SplitSpec& spec) {
    spec.validate();
    const auto count = [n](double f) {
        return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
    };
    const std::size_t n_test = count(spec.test_fraction);
    const std::size_t n_mask = count(spec.mask_val_fraction);
    const std::size_t n_model = count(spec.model_val_fraction);
    if (n < 10 || n_test == 0 || n_mask == 0 || n_model == 0 || n_test + n_mask + n_model >= n) {
        throw std::invalid_argument("split: " + std::to_string(n) +
                                    " rows is too few for the requested fractions");
    }
    const std::size_t n_train = n - n_test - n_mask - n_model;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (spec.mode == SplitMode::random) {
        std::mt19937_64 rng(spec.seed);
        std::shuffle(order.begin(), order.end(), rng);
    }
    SplitIndices s;
    auto it = order.begin();
    const auto take = [&](std::vector<std::size_t>& dst, std::size_t k) {
        dst.assign(it, it + static_cast<std::ptrdiff_t>(k));
        it += static_cast<std::ptrdiff_t>(k);
        std::sort(dst.begin(), dst.end());
    };
    take(s.train, n_train);
    take(s.model_val, n_model);
    take(s.mask_val, n_mask);
    take(s.test, n_test);
    return s;
}

Splits split(const Dataset& d, const SplitSpec& spec) {
    Splits out;
    out.rows = split_indices(d.rows(), spec);
    out.train = d.select_rows(out.rows.train);
    out.model_val = d.select_rows(out.rows.model_val);
    out.mask_val = d.select_rows(out.rows.mask_val);
    out.test = d.select_rows(out.rows.test);
    return out;
}

// ---------------------------------------------------------------------------
// Masking

Matrix apply_mask(const Matrix& x, const BinaryMask& z) {
    if (z.size() != x.cols()) {
        throw std::invalid_argument("apply_mask: mask length " + std::to_string(z.size()) +
                                    " != column count " + std::to_string(x.cols()));
    }
    Matrix out = x;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        if (z[c]) continue;
        for (std::size_t r = 0; r < x.rows(); ++r) out(r, c) = 0.0;
    }
    return out;
}

DeletedColumns delete_columns(const Matrix& train, const Matrix& mask_val, const BinaryMask& z_hat) {
    if (z_hat.size() != train.cols() || z_hat.size() != mask_val.cols())
        throw std::invalid_argument("delete_columns: mask length does not match column count");
    DeletedColumns out;
    out.kept = z_hat.active_indices();
    if (out.kept.empty()) throw std::invalid_argument("delete_columns: mask removes every feature");
    out.train = train.select_columns(out.kept);
    out.mask_val = mask_val.select_columns(out.kept);
    out.mask = BinaryMask::ones(out.kept.size());
    return out;
}

}  // namespace afsbm
