#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "afsbm/dataset.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace afsbm;
using afsbm::test::make_dataset;
using afsbm::test::TempDir;
using afsbm::test::uniform_matrix;

namespace {

std::vector<std::size_t> range(std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> v(hi - lo);
    std::iota(v.begin(), v.end(), lo);
    return v;
}

}  // namespace

TEST_CASE("normalize: symmetric, constant and two-point columns") {
    Matrix x = Matrix::from_rows({{1, 5, 0}, {2, 5, 10}, {3, 5, 0}});
    auto d = make_dataset(x, {0, 0, 0});
    // third column is [0, 10, 0]; use a dedicated dataset for the two-point case
    const auto n = normalize(d);
    CHECK(n.data.features(0, 0) == -1.0);
    CHECK(n.data.features(1, 0) == 0.0);
    CHECK(n.data.features(2, 0) == 1.0);
    CHECK(n.params.columns[1].zero_spread);
    for (std::size_t r = 0; r < 3; ++r) CHECK(n.data.features(r, 1) == 0.0);

    const auto two = normalize(make_dataset(Matrix::from_rows({{0}, {10}}), {0, 0}));
    CHECK(two.data.features(0, 0) == -1.0);
    CHECK(two.data.features(1, 0) == 1.0);
}

TEST_CASE("normalize: NaN is rejected") {
    auto d = make_dataset(Matrix::from_rows({{1}, {std::nan("")}}), {0, 0});
    CHECK_THROWS_AS(normalize(d), std::invalid_argument);
}

TEST_CASE("normalize: stored params reproduce the transform bit for bit") {
    auto d = make_dataset(uniform_matrix(40, 5, 3, -7.0, 13.0), std::vector<double>(40, 1.5));
    const auto n = normalize(d, true);
    const Dataset again = n.params.apply(d);
    CHECK(again.features == n.data.features);
    CHECK(again.targets == n.data.targets);
    for (double v : n.data.features.data()) CHECK(std::abs(v) <= 1.0);
}

TEST_CASE("normalize: target scaling inverts") {
    const ColumnScaling s = fit_scaling(std::vector<double>{3.0, 9.0, 4.0});
    for (double v : {3.0, 9.0, 4.0, -1.0}) CHECK(s.invert(s.apply(v)) == doctest::Approx(v).epsilon(1e-15));
}

TEST_CASE("split: chronological arithmetic on 100 rows") {
    SplitSpec spec;
    spec.mode = SplitMode::chronological;
    const auto s = split_indices(100, spec);
    CHECK(s.train == range(0, 50));
    CHECK(s.model_val == range(50, 70));
    CHECK(s.mask_val == range(70, 90));
    CHECK(s.test == range(90, 100));
}

TEST_CASE("split: random mode is seeded and partitions the rows") {
    SplitSpec spec;
    spec.seed = 42;
    const auto a = split_indices(137, spec);
    const auto b = split_indices(137, spec);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    spec.seed = 43;
    CHECK(split_indices(137, spec).train != a.train);

    std::multiset<std::size_t> all;
    for (const auto* part : {&a.train, &a.model_val, &a.mask_val, &a.test}) all.insert(part->begin(), part->end());
    CHECK(all.size() == 137);
    CHECK(std::set<std::size_t>(all.begin(), all.end()).size() == 137);
    CHECK(*all.rbegin() == 136);
}

TEST_CASE("split: errors") {
    SplitSpec spec;
    CHECK_THROWS(split_indices(5, spec));
    spec.test_fraction = 0.6;
    spec.mask_val_fraction = 0.3;
    spec.model_val_fraction = 0.3;
    CHECK_THROWS(spec.validate());
}

TEST_CASE("split: datasets follow the index partition") {
    auto d = make_dataset(uniform_matrix(30, 2, 1), std::vector<double>(30));
    for (std::size_t i = 0; i < 30; ++i) d.targets[i] = static_cast<double>(i);
    SplitSpec spec;
    spec.seed = 9;
    const auto s = split(d, spec);
    for (std::size_t k = 0; k < s.rows.test.size(); ++k) CHECK(s.test.targets[k] == static_cast<double>(s.rows.test[k]));
}

TEST_CASE("apply_mask: identity, annihilator, elementwise, idempotent") {
    const Matrix x = Matrix::from_rows({{1, 2}, {3, 4}});
    CHECK(apply_mask(x, BinaryMask::ones(2)) == x);
    CHECK(apply_mask(x, BinaryMask::zeros(2)) == Matrix(2, 2, 0.0));
    const BinaryMask z(std::vector<std::uint8_t>{1, 0});
    CHECK(apply_mask(x, z) == Matrix::from_rows({{1, 0}, {3, 0}}));
    CHECK(apply_mask(apply_mask(x, z), z) == apply_mask(x, z));
    CHECK_THROWS(apply_mask(x, BinaryMask::ones(3)));
}

TEST_CASE("delete_columns") {
    const Matrix a = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
    const Matrix b = Matrix::from_rows({{7, 8, 9}});
    const auto r = delete_columns(a, b, BinaryMask(std::vector<std::uint8_t>{1, 0, 1}));
    CHECK(r.train == Matrix::from_rows({{1, 3}, {4, 6}}));
    CHECK(r.mask_val == Matrix::from_rows({{7, 9}}));
    CHECK(r.mask.bits() == std::vector<std::uint8_t>{1, 1});
    CHECK(r.kept == std::vector<std::size_t>{0, 2});
    CHECK(r.train.cols() == 2);

    const auto same = delete_columns(a, b, BinaryMask::ones(3));
    CHECK(same.train == a);
    CHECK(same.mask.popcount() == 3);

    CHECK_THROWS(delete_columns(a, b, BinaryMask::zeros(3)));
    CHECK_THROWS(delete_columns(a, b, BinaryMask::ones(2)));
}

TEST_CASE("BinaryMask: commit enforces monotonicity") {
    BinaryMask z = BinaryMask::ones(3);
    z.commit();
    z.set(1, false);
    z.commit();
    CHECK(z.history().size() == 2);
    CHECK(z.active_indices() == std::vector<std::size_t>{0, 2});
    z.set(1, true);
    CHECK_THROWS_AS(z.commit(), std::logic_error);
    CHECK_THROWS(BinaryMask(std::vector<std::uint8_t>{0, 2}));
}

TEST_CASE("csv: round trip and error reporting") {
    TempDir dir("csv");
    Dataset d = make_dataset(Matrix::from_rows({{0.1, 1e-17}, {-2.5, 3.0}}), {1.0 / 3.0, 7.0});
    d.timestamps = std::vector<std::string>{"2020-01-01", "2020-01-02"};
    const auto path = dir.path() / "d.csv";
    write_csv(path, d, "target");
    CsvOptions opts;
    opts.target_column = "target";
    opts.timestamp_column = "timestamp";
    const Dataset back = load_csv(path, opts);
    CHECK(back.features == d.features);
    CHECK(back.targets == d.targets);
    CHECK(back.feature_names == d.feature_names);
    CHECK(back.timestamps == d.timestamps);

    const auto bad = dir.path() / "bad.csv";
    std::ofstream(bad) << "a,b,y\n1,2,3\n4,oops,6\n";
    CsvOptions o2;
    o2.target_column = "y";
    try {
        load_csv(bad, o2);
        FAIL("expected CsvError");
    } catch (const CsvError& e) {
        CHECK(e.row() == 2);
        CHECK(e.column() == "b");
    }
    o2.target_column = "missing";
    CHECK_THROWS_AS(load_csv(bad, o2), CsvError);

    const auto dup = dir.path() / "dup.csv";
    std::ofstream(dup) << "a,a,y\n1,2,3\n";
    o2.target_column = "y";
    CHECK_THROWS_AS(load_csv(dup, o2), CsvError);
}

TEST_CASE("csv: categorical target maps labels in sorted order") {
    TempDir dir("cat");
    const auto path = dir.path() / "c.csv";
    std::ofstream(path) << "x,label\n1,yes\n2,no\n3,yes\n";
    CsvOptions o;
    o.target_column = "label";
    o.categorical_target = true;
    const auto d = load_csv(path, o);
    CHECK(d.targets == std::vector<double>{1, 0, 1});
}

TEST_CASE("csv: quoted fields") {
    CHECK(split_csv_line("a,\"b,c\",d") == std::vector<std::string>{"a", "b,c", "d"});
    CHECK(split_csv_line("\"x\"\"y\",1") == std::vector<std::string>{"x\"y", "1"});
}
