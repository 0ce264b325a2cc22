#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "afsbm/matrix.hpp"

namespace afsbm {

// Feature matrix plus targets, column names and optional ISO-8601 timestamps.
struct Dataset {
    Matrix features;
    std::vector<double> targets;
    std::vector<std::string> feature_names;
    std::optional<std::vector<std::string>> timestamps;

    std::size_t rows() const { return features.rows(); }
    std::size_t cols() const { return features.cols(); }

    // Throws std::invalid_argument when a structural invariant is broken.
    void validate() const;

    Dataset select_rows(std::span<const std::size_t> idx) const;
    Dataset select_columns(std::span<const std::size_t> idx) const;
};

// z in {0,1}^M with the sequence of masks committed at the end of each outer iteration.
class BinaryMask {
public:
    BinaryMask() = default;
    explicit BinaryMask(std::size_t size, bool value = true) : bits_(size, value ? 1 : 0) {}
    explicit BinaryMask(std::vector<std::uint8_t> bits);

    static BinaryMask ones(std::size_t size) { return BinaryMask(size, true); }
    static BinaryMask zeros(std::size_t size) { return BinaryMask(size, false); }

    std::size_t size() const { return bits_.size(); }
    bool operator[](std::size_t i) const { return bits_[i] != 0; }
    void set(std::size_t i, bool value) { bits_.at(i) = value ? 1 : 0; }

    std::size_t popcount() const;
    std::vector<std::size_t> active_indices() const;
    const std::vector<std::uint8_t>& bits() const { return bits_; }

    // Appends the current bits to history. Throws std::logic_error if a bit that was
    // cleared in the previous entry is set again.
    void commit();
    const std::vector<std::vector<std::uint8_t>>& history() const { return history_; }

    bool same_bits(const BinaryMask& other) const { return bits_ == other.bits_; }

private:
    std::vector<std::uint8_t> bits_;
    std::vector<std::vector<std::uint8_t>> history_;
};

// ---------------------------------------------------------------------------
// CSV ingestion

class CsvError : public std::runtime_error {
public:
    CsvError(const std::string& what, std::size_t row, std::string column)
        : std::runtime_error(what), row_(row), column_(std::move(column)) {}
    // 1-based data row (header excluded); 0 when the error is not row specific.
    std::size_t row() const { return row_; }
    const std::string& column() const { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

struct CsvOptions {
    std::string target_column;
    std::optional<std::string> timestamp_column;
    // Map non-numeric target labels to 0..K-1 in sorted label order.
    bool categorical_target = false;
};

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options);

// Writes features then the target (named `target_name`), timestamp first if present.
void write_csv(const std::filesystem::path& path, const Dataset& d,
               const std::string& target_name = "y");

std::vector<std::string> split_csv_line(const std::string& line);

// ---------------------------------------------------------------------------
// Normalization: x' = (x - mean) / max|x - mean|, zero-spread columns map to 0.

struct ColumnScaling {
    double mean = 0.0;
    double scale = 1.0;
    bool zero_spread = false;

    double apply(double x) const { return zero_spread ? 0.0 : (x - mean) / scale; }
    double invert(double v) const { return zero_spread ? mean : v * scale + mean; }
};

ColumnScaling fit_scaling(std::span<const double> values);

struct NormalizationParams {
    std::vector<ColumnScaling> columns;
    std::optional<ColumnScaling> target;

    Matrix apply(const Matrix& x) const;
    Dataset apply(const Dataset& d) const;
};

// Fits on `d` (targets too when `include_target`) without transforming.
NormalizationParams fit_normalization(const Dataset& d, bool include_target = false);

struct Normalized {
    Dataset data;
    NormalizationParams params;
};
Normalized normalize(const Dataset& d, bool include_target = false);

// ---------------------------------------------------------------------------
// Splits

enum class SplitMode { chronological, random };

struct SplitSpec {
    double test_fraction = 0.10;
    double mask_val_fraction = 0.20;
    double model_val_fraction = 0.20;
    SplitMode mode = SplitMode::random;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SplitIndices {
    std::vector<std::size_t> train, model_val, mask_val, test;
};

struct Splits {
    Dataset train, model_val, mask_val, test;
    SplitIndices rows;
};

// Row partition only; useful when the same partition must be reproduced elsewhere.
SplitIndices split_indices(std::size_t n_rows, const SplitSpec& spec);
Splits split(const Dataset& d, const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Masking

Matrix apply_mask(const Matrix& x, const BinaryMask& z);

struct DeletedColumns {
    Matrix train;
    Matrix mask_val;
    BinaryMask mask;                // all ones, new width
    std::vector<std::size_t> kept;  // positions in the input kept, ascending
};

DeletedColumns delete_columns(const Matrix& train, const Matrix& mask_val, const BinaryMask& z_hat);

}  // namespace afsbm
