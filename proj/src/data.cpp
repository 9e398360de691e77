#include "forge/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "forge/rng.hpp"

namespace forge {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Splits one CSV record; handles quoted fields and embedded "".
std::vector<std::string> split_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

float parse_float_cell(const std::string& cell, std::size_t row, std::size_t col) {
    if (cell.empty()) throw ParseError(row, col, "empty cell");
    const char* begin = cell.c_str();
    char* end = nullptr;
    const float v = std::strtof(begin, &end);
    if (end != begin + cell.size()) throw ParseError(row, col, "not a number: '" + cell + "'");
    if (!std::isfinite(v)) throw ParseError(row, col, "non-finite value: '" + cell + "'");
    return v;
}

std::uint8_t parse_label_cell(const std::string& cell, std::size_t row, std::size_t col) {
    const float v = parse_float_cell(cell, row, col);
    if (v == 0.0f) return 0;
    if (v == 1.0f) return 1;
    throw ParseError(row, col, "label must be 0 or 1, got '" + cell + "'");
}

Dataset parse_dataset(const std::string& text, const std::string& path,
                      const std::vector<std::string>* required_header) {
    if (text.empty()) throw EmptyFile(path);

    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(std::move(line));
        if (end == text.size()) break;
        start = end + 1;
    }
    if (lines.empty()) throw EmptyFile(path);

    std::vector<std::string> header = split_record(lines[0]);
    if (required_header) {
        if (header != *required_header) {
            throw HeaderMismatch(path + ": expected the credit-card schema Time,V1..V28,Amount,Class");
        }
    }
    bool has_synthetic = false;
    std::size_t label_col;
    if (header.size() >= 2 && header.back() == "synthetic" &&
        header[header.size() - 2] == "Class") {
        has_synthetic = true;
        label_col = header.size() - 2;
    } else if (!header.empty() && header.back() == "Class") {
        label_col = header.size() - 1;
    } else {
        throw HeaderMismatch(path + ": no Class column in header");
    }
    const std::size_t width = label_col;
    if (width == 0) throw HeaderMismatch(path + ": no feature columns");

    Dataset d;
    d.feature_names.assign(header.begin(), header.begin() + width);
    const std::size_t n_rows = lines.size() - 1;
    d.features = Matrix(n_rows, width);
    d.labels.resize(n_rows);
    d.synthetic_mask.assign(n_rows, 0);

    for (std::size_t r = 0; r < n_rows; ++r) {
        const std::size_t file_row = r + 2;  // 1-based, after the header line
        std::vector<std::string> cells = split_record(lines[r + 1]);
        if (cells.size() != header.size()) {
            throw ParseError(file_row, cells.size(), "expected " + std::to_string(header.size()) +
                                                         " fields, got " +
                                                         std::to_string(cells.size()));
        }
        for (std::size_t c = 0; c < width; ++c) {
            d.features.at(r, c) = parse_float_cell(cells[c], file_row, c + 1);
        }
        d.labels[r] = parse_label_cell(cells[label_col], file_row, label_col + 1);
        if (has_synthetic) {
            d.synthetic_mask[r] = parse_label_cell(cells[label_col + 1], file_row, label_col + 2);
        }
    }
    return d;
}

std::uint32_t float_key(float v) {
    if (v == 0.0f) v = 0.0f;  // collapse -0 and +0
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    return bits;
}

}  // namespace

std::vector<std::string> creditcard_feature_names() {
    std::vector<std::string> names;
    names.reserve(kCreditcardWidth);
    names.push_back("Time");
    for (int i = 1; i <= 28; ++i) names.push_back("V" + std::to_string(i));
    names.push_back("Amount");
    return names;
}

Dataset load_csv(const std::string& path) {
    std::vector<std::string> required = creditcard_feature_names();
    required.push_back("Class");
    return parse_dataset(read_file(path), path, &required);
}

Dataset read_dataset_csv(const std::string& path) {
    return parse_dataset(read_file(path), path, nullptr);
}

std::string format_float(float v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    return buf;
}

void write_dataset_csv(const Dataset& d, const std::string& path, bool include_synthetic) {
    std::string out;
    out.reserve(d.rows() * d.width() * 12 + 256);
    for (std::size_t c = 0; c < d.feature_names.size(); ++c) {
        if (c) out += ',';
        out += d.feature_names[c];
    }
    out += ",Class";
    if (include_synthetic) out += ",synthetic";
    out += '\n';
    for (std::size_t r = 0; r < d.rows(); ++r) {
        for (std::size_t c = 0; c < d.width(); ++c) {
            if (c) out += ',';
            out += format_float(d.features.at(r, c));
        }
        out += ',';
        out += d.labels[r] ? '1' : '0';
        if (include_synthetic) {
            out += ',';
            out += d.synthetic_mask[r] ? '1' : '0';
        }
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

Dataset deduplicate(const Dataset& d) {
    const std::size_t w = d.width();
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    buckets.reserve(d.rows());
    std::vector<std::size_t> keep;
    keep.reserve(d.rows());

    auto rows_equal = [&](std::size_t a, std::size_t b) {
        if (d.labels[a] != d.labels[b]) return false;
        for (std::size_t c = 0; c < w; ++c) {
            if (d.features.at(a, c) != d.features.at(b, c)) return false;
        }
        return true;
    };

    for (std::size_t r = 0; r < d.rows(); ++r) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (std::size_t c = 0; c < w; ++c) {
            h ^= float_key(d.features.at(r, c));
            h *= 0x100000001b3ULL;
        }
        h ^= d.labels[r];
        h *= 0x100000001b3ULL;
        auto& bucket = buckets[h];
        bool duplicate = false;
        for (std::size_t prev : bucket) {
            if (rows_equal(prev, r)) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) {
            bucket.push_back(r);
            keep.push_back(r);
        }
    }
    return select_rows(d, keep);
}

ScalerParams minmax_fit(const Dataset& d, const std::vector<std::size_t>& columns) {
    if (d.rows() == 0) throw EmptyDataset("minmax_fit");
    ScalerParams params;
    for (std::size_t col : columns) {
        if (col >= d.width()) {
            throw SchemaMismatch("minmax_fit column " + std::to_string(col) + " of width " +
                                 std::to_string(d.width()));
        }
        float lo = std::numeric_limits<float>::max();
        float hi = std::numeric_limits<float>::lowest();
        for (std::size_t r = 0; r < d.rows(); ++r) {
            const float v = d.features.at(r, col);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        params.entries.push_back({col, lo, hi});
    }
    return params;
}

Dataset minmax_transform(const Dataset& d, const ScalerParams& params) {
    Dataset out = d;
    for (const auto& e : params.entries) {
        if (e.column >= d.width()) {
            throw SchemaMismatch("scaler column " + std::to_string(e.column) + " of width " +
                                 std::to_string(d.width()));
        }
        const float range = e.max - e.min;
        for (std::size_t r = 0; r < out.rows(); ++r) {
            float& v = out.features.at(r, e.column);
            v = range == 0.0f ? 0.0f : (v - e.min) / range;
        }
    }
    return out;
}

SplitIndices stratified_split(const Dataset& d, double train_fraction, std::uint64_t seed) {
    std::vector<std::size_t> neg, pos;
    for (std::size_t r = 0; r < d.rows(); ++r) (d.labels[r] ? pos : neg).push_back(r);
    if (neg.empty() || pos.empty()) {
        throw SingleClass("stratified_split needs both classes, got " + std::to_string(neg.size()) +
                          " negatives / " + std::to_string(pos.size()) + " positives");
    }

    SplitIndices split;
    split.seed = seed;
    auto divide = [&](std::vector<std::size_t>& idx, std::uint64_t stream) {
        Rng rng(mix_seed(seed, stream));
        rng.shuffle(idx);
        // epsilon guard: (1 - 0.8) * 10 is 1.999... in binary, which must floor to 2
        const auto n_test = static_cast<std::size_t>(
            std::floor((1.0 - train_fraction) * static_cast<double>(idx.size()) + 1e-9));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            (i < idx.size() - n_test ? split.train_idx : split.test_idx).push_back(idx[i]);
        }
    };
    divide(neg, 0);
    divide(pos, 1);
    std::sort(split.train_idx.begin(), split.train_idx.end());
    std::sort(split.test_idx.begin(), split.test_idx.end());
    return split;
}

std::pair<std::size_t, std::size_t> class_counts(const Dataset& d) {
    std::size_t pos = 0;
    for (std::uint8_t l : d.labels) pos += l;
    return {d.rows() - pos, pos};
}

Dataset select_rows(const Dataset& d, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.feature_names = d.feature_names;
    out.features = Matrix(indices.size(), d.width());
    out.labels.resize(indices.size());
    out.synthetic_mask.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t r = indices[i];
        std::memcpy(out.features.data.data() + i * d.width(), d.features.data.data() + r * d.width(),
                    d.width() * sizeof(float));
        out.labels[i] = d.labels[r];
        out.synthetic_mask[i] = d.synthetic_mask[r];
    }
    return out;
}

Matrix minority_rows(const Dataset& d) {
    std::vector<std::size_t> idx;
    for (std::size_t r = 0; r < d.rows(); ++r) {
        if (d.labels[r]) idx.push_back(r);
    }
    Matrix m(idx.size(), d.width());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        std::memcpy(m.data.data() + i * d.width(), d.features.data.data() + idx[i] * d.width(),
                    d.width() * sizeof(float));
    }
    return m;
}

Dataset generate_two_gaussian(std::size_t n_negative, std::size_t n_positive,
                              std::size_t n_features, double separation, std::uint64_t seed) {
    Dataset d;
    for (std::size_t c = 0; c < n_features; ++c) d.feature_names.push_back("f" + std::to_string(c + 1));
    const std::size_t n = n_negative + n_positive;
    d.features = Matrix(n, n_features);
    d.labels.assign(n, 0);
    d.synthetic_mask.assign(n, 0);

    Rng rng(seed);
    const double shift = separation / std::sqrt(static_cast<double>(n_features));
    for (std::size_t r = 0; r < n; ++r) {
        const bool positive = r >= n_negative;
        d.labels[r] = positive ? 1 : 0;
        for (std::size_t c = 0; c < n_features; ++c) {
            d.features.at(r, c) = static_cast<float>(rng.normal() + (positive ? shift : 0.0));
        }
    }
    return d;
}

}  // namespace forge
