#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "forge/data.hpp"
#include "forge/rng.hpp"

using namespace forge;

namespace {

const std::string kFixture3 = std::string(FORGE_TEST_DATA_DIR) + "/creditcard_fixture3.csv";

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

Dataset labeled(std::vector<std::vector<float>> rows, std::vector<std::uint8_t> labels) {
    Dataset d;
    const std::size_t w = rows.empty() ? 0 : rows[0].size();
    for (std::size_t c = 0; c < w; ++c) d.feature_names.push_back("f" + std::to_string(c + 1));
    d.features = Matrix(rows.size(), w);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < w; ++c) d.features.at(r, c) = rows[r][c];
    }
    d.labels = std::move(labels);
    d.synthetic_mask.assign(rows.size(), 0);
    return d;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("load_csv parses the 3-row fixture exactly") {
    Dataset d = load_csv(kFixture3);
    REQUIRE(d.rows() == 3);
    REQUIRE(d.width() == kCreditcardWidth);
    CHECK(d.feature_names[0] == "Time");
    CHECK(d.feature_names[29] == "Amount");
    CHECK(d.features.at(0, 0) == 0.0f);
    CHECK(d.features.at(0, 1) == -6.5f);
    CHECK(d.features.at(0, 29) == 149.62f);
    CHECK(d.features.at(1, 0) == 1.0f);
    CHECK(d.features.at(1, 1) == 0.125f);
    CHECK(d.features.at(1, 2) == -1.25f);
    CHECK(d.features.at(2, 0) == 406.0f);
    CHECK(d.features.at(2, 1) == -0.75f);
    CHECK(d.features.at(2, 2) == 1.1f);
    CHECK(d.labels[0] == 0);
    CHECK(d.labels[1] == 0);
    CHECK(d.labels[2] == 1);
    for (std::uint8_t m : d.synthetic_mask) CHECK(m == 0);
}

TEST_CASE("load_csv rejects a wrong header") {
    const std::string path = temp_path("forge_bad_header.csv");
    std::ofstream(path) << "Time,V1,Amount,Class\n0,1,2,0\n";
    CHECK_THROWS_AS(load_csv(path), HeaderMismatch);
}

TEST_CASE("load_csv rejects empty files and bad cells") {
    const std::string empty = temp_path("forge_empty.csv");
    std::ofstream(empty) << "";
    CHECK_THROWS_AS(load_csv(empty), EmptyFile);

    const std::string bad = temp_path("forge_bad_cell.csv");
    {
        std::ofstream f(bad);
        f << slurp(kFixture3);
        f << "7,oops";
        for (int i = 0; i < 27; ++i) f << ",0";
        f << ",1.0,0\n";
    }
    try {
        load_csv(bad);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.row == 5);  // header + 3 fixture rows, then the broken line
        CHECK(e.col == 2);
    }

    const std::string bad_label = temp_path("forge_bad_label.csv");
    {
        std::ofstream f(bad_label);
        f << slurp(kFixture3);
        f << "7";
        for (int i = 0; i < 28; ++i) f << ",0";
        f << ",1.0,2\n";  // label out of {0,1}
    }
    CHECK_THROWS_AS(load_csv(bad_label), ParseError);
}

TEST_CASE("csv write/load round-trips the fixture bit-exactly") {
    Dataset d = load_csv(kFixture3);
    const std::string path = temp_path("forge_roundtrip.csv");
    write_dataset_csv(d, path);
    Dataset d2 = read_dataset_csv(path);
    REQUIRE(d2.rows() == d.rows());
    REQUIRE(d2.width() == d.width());
    CHECK(d2.feature_names == d.feature_names);
    for (std::size_t i = 0; i < d.features.data.size(); ++i) {
        CHECK(d.features.data[i] == d2.features.data[i]);
    }
    CHECK(d.labels == d2.labels);

    // writing the reloaded dataset reproduces the same bytes
    const std::string path2 = temp_path("forge_roundtrip2.csv");
    write_dataset_csv(d2, path2);
    CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("format_float round-trips arbitrary floats") {
    Rng rng(77);
    for (int i = 0; i < 1000; ++i) {
        const float v = static_cast<float>(rng.uniform(-1e6, 1e6));
        CHECK(std::strtof(format_float(v).c_str(), nullptr) == v);
    }
    CHECK(format_float(0.5f) == "0.5");
}

TEST_CASE("deduplicate keeps first occurrences, preserves order, and is idempotent") {
    Dataset d = labeled({{1, 2}, {3, 4}, {1, 2}, {5, 6}, {1, 2}}, {0, 1, 0, 0, 1});
    Dataset u = deduplicate(d);
    // row 2 duplicates row 0 (same features, same label); row 4 differs by label so it stays
    REQUIRE(u.rows() == 4);
    CHECK(u.features.at(0, 0) == 1.0f);
    CHECK(u.features.at(1, 0) == 3.0f);
    CHECK(u.features.at(2, 0) == 5.0f);
    CHECK(u.features.at(3, 0) == 1.0f);
    CHECK(u.labels[3] == 1);

    Dataset again = deduplicate(u);
    CHECK(again.rows() == u.rows());
    for (std::size_t i = 0; i < u.features.data.size(); ++i) {
        CHECK(again.features.data[i] == u.features.data[i]);
    }

    Dataset clean = labeled({{1, 1}, {2, 2}}, {0, 1});
    CHECK(deduplicate(clean).rows() == 2);
}

TEST_CASE("minmax fit and transform") {
    Dataset d = labeled({{10, 5}, {20, 5}, {30, 5}}, {0, 0, 1});
    ScalerParams scaler = minmax_fit(d, {0, 1});
    REQUIRE(scaler.entries.size() == 2);
    CHECK(scaler.entries[0].min == 10.0f);
    CHECK(scaler.entries[0].max == 30.0f);
    CHECK(scaler.entries[1].min == 5.0f);
    CHECK(scaler.entries[1].max == 5.0f);

    Dataset t = minmax_transform(d, scaler);
    CHECK(t.features.at(0, 0) == 0.0f);
    CHECK(t.features.at(1, 0) == 0.5f);
    CHECK(t.features.at(2, 0) == 1.0f);
    // degenerate column maps to zero
    for (std::size_t r = 0; r < 3; ++r) CHECK(t.features.at(r, 1) == 0.0f);

    // out-of-range extrapolates without clipping: 40 over [10,30] -> 1.5
    Dataset wide = labeled({{40, 0}}, {0});
    CHECK(minmax_transform(wide, scaler).features.at(0, 0) == 1.5f);

    Dataset empty = labeled({}, {});
    CHECK_THROWS_AS(minmax_fit(empty, {0}), EmptyDataset);
    ScalerParams off;
    off.entries.push_back({7, 0.0f, 1.0f});
    CHECK_THROWS_AS(minmax_transform(d, off), SchemaMismatch);
}

TEST_CASE("stratified split: 10/10 toy at 0.8 gives 8+8 train, 2+2 test") {
    std::vector<std::vector<float>> rows;
    std::vector<std::uint8_t> labels;
    for (int i = 0; i < 20; ++i) {
        rows.push_back({static_cast<float>(i)});
        labels.push_back(i < 10 ? 0 : 1);
    }
    Dataset d = labeled(rows, labels);
    SplitIndices split = stratified_split(d, 0.8, 42);
    CHECK(split.train_idx.size() == 16);
    CHECK(split.test_idx.size() == 4);
    Dataset train = select_rows(d, split.train_idx);
    Dataset test = select_rows(d, split.test_idx);
    CHECK(class_counts(train) == std::pair<std::size_t, std::size_t>{8, 8});
    CHECK(class_counts(test) == std::pair<std::size_t, std::size_t>{2, 2});
}

TEST_CASE("stratified split: 492 positives at 80:20 put exactly 98 in test") {
    std::vector<std::vector<float>> rows;
    std::vector<std::uint8_t> labels;
    for (int i = 0; i < 2000 + 492; ++i) {
        rows.push_back({static_cast<float>(i)});
        labels.push_back(i < 2000 ? 0 : 1);
    }
    Dataset d = labeled(rows, labels);
    SplitIndices split = stratified_split(d, 0.8, 1);
    const auto [test_neg, test_pos] = class_counts(select_rows(d, split.test_idx));
    CHECK(test_pos == 98);   // floor(0.2 * 492)
    CHECK(test_neg == 400);  // floor(0.2 * 2000)
    const auto [train_neg, train_pos] = class_counts(select_rows(d, split.train_idx));
    CHECK(train_pos == 394);
    CHECK(train_neg == 1600);
}

TEST_CASE("stratified split: deterministic, disjoint, covering") {
    Dataset d = generate_two_gaussian(300, 37, 4, 2.0, 5);
    SplitIndices a = stratified_split(d, 0.8, 9);
    SplitIndices b = stratified_split(d, 0.8, 9);
    CHECK(a.train_idx == b.train_idx);
    CHECK(a.test_idx == b.test_idx);
    SplitIndices c = stratified_split(d, 0.8, 10);
    CHECK(a.train_idx != c.train_idx);

    std::vector<bool> seen(d.rows(), false);
    for (std::size_t i : a.train_idx) seen[i] = true;
    for (std::size_t i : a.test_idx) {
        CHECK_FALSE(seen[i]);  // disjoint
        seen[i] = true;
    }
    for (bool s : seen) CHECK(s);  // union covers every row

    // per-class test fraction within one sample of 0.2
    const auto [test_neg, test_pos] = class_counts(select_rows(d, a.test_idx));
    CHECK(std::abs(static_cast<double>(test_neg) - 0.2 * 300) <= 1.0);
    CHECK(std::abs(static_cast<double>(test_pos) - 0.2 * 37) <= 1.0);

    Dataset single = labeled({{1}, {2}}, {0, 0});
    CHECK_THROWS_AS(stratified_split(single, 0.8, 1), SingleClass);
}

TEST_CASE("class_counts") {
    Dataset d = labeled({{1}, {2}, {3}}, {0, 1, 1});
    CHECK(class_counts(d) == std::pair<std::size_t, std::size_t>{1, 2});
    Dataset empty = labeled({}, {});
    CHECK(class_counts(empty) == std::pair<std::size_t, std::size_t>{0, 0});
}

TEST_CASE("two-Gaussian generator: counts, determinism, separation") {
    Dataset a = generate_two_gaussian(100, 10, 8, 2.0, 7);
    Dataset b = generate_two_gaussian(100, 10, 8, 2.0, 7);
    REQUIRE(a.rows() == 110);
    CHECK(class_counts(a) == std::pair<std::size_t, std::size_t>{100, 10});
    for (std::size_t i = 0; i < a.features.data.size(); ++i) {
        CHECK(a.features.data[i] == b.features.data[i]);
    }

    // positive-class mean sits near separation/sqrt(d) in every coordinate
    Dataset big = generate_two_gaussian(4000, 4000, 4, 2.0, 11);
    const double expected_shift = 2.0 / std::sqrt(4.0);
    for (std::size_t c = 0; c < 4; ++c) {
        double neg = 0.0, pos = 0.0;
        for (std::size_t r = 0; r < big.rows(); ++r) {
            (big.labels[r] ? pos : neg) += big.features.at(r, c);
        }
        neg /= 4000.0;
        pos /= 4000.0;
        CHECK(std::abs(neg) < 0.08);
        CHECK(std::abs(pos - expected_shift) < 0.08);
    }
}

TEST_CASE("minority_rows extracts the positive class") {
    Dataset d = labeled({{1, 1}, {2, 2}, {3, 3}}, {0, 1, 1});
    Matrix m = minority_rows(d);
    REQUIRE(m.rows == 2);
    CHECK(m.at(0, 0) == 2.0f);
    CHECK(m.at(1, 1) == 3.0f);
}

}  // TEST_SUITE
