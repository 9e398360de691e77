#pragma once

#include <stdexcept>
#include <string>

namespace forge {

// Error taxonomy shared across the library. Each condition the public API can
// raise has its own type so callers (and tests) can catch precisely.

struct ShapeMismatch : std::runtime_error {
    explicit ShapeMismatch(const std::string& msg) : std::runtime_error("shape mismatch: " + msg) {}
};

struct AxisOutOfRange : std::runtime_error {
    explicit AxisOutOfRange(const std::string& msg) : std::runtime_error("axis out of range: " + msg) {}
};

struct NotScalar : std::runtime_error {
    explicit NotScalar(const std::string& msg) : std::runtime_error("not a scalar: " + msg) {}
};

struct MissingGrad : std::runtime_error {
    explicit MissingGrad(const std::string& msg) : std::runtime_error("missing gradient: " + msg) {}
};

struct HeaderMismatch : std::runtime_error {
    explicit HeaderMismatch(const std::string& msg) : std::runtime_error("header mismatch: " + msg) {}
};

struct ParseError : std::runtime_error {
    std::size_t row;
    std::size_t col;
    ParseError(std::size_t row_, std::size_t col_, const std::string& msg)
        : std::runtime_error("parse error at row " + std::to_string(row_) + ", col " +
                             std::to_string(col_) + ": " + msg),
          row(row_),
          col(col_) {}
};

struct EmptyFile : std::runtime_error {
    explicit EmptyFile(const std::string& msg) : std::runtime_error("empty file: " + msg) {}
};

struct EmptyDataset : std::runtime_error {
    explicit EmptyDataset(const std::string& msg) : std::runtime_error("empty dataset: " + msg) {}
};

struct EmptyData : std::runtime_error {
    explicit EmptyData(const std::string& msg) : std::runtime_error("empty data: " + msg) {}
};

struct SchemaMismatch : std::runtime_error {
    explicit SchemaMismatch(const std::string& msg) : std::runtime_error("schema mismatch: " + msg) {}
};

struct SingleClass : std::runtime_error {
    explicit SingleClass(const std::string& msg) : std::runtime_error("single class: " + msg) {}
};

struct WidthMismatch : std::runtime_error {
    explicit WidthMismatch(const std::string& msg) : std::runtime_error("width mismatch: " + msg) {}
};

struct LengthMismatch : std::runtime_error {
    explicit LengthMismatch(const std::string& msg) : std::runtime_error("length mismatch: " + msg) {}
};

struct TooFewMinoritySamples : std::runtime_error {
    explicit TooFewMinoritySamples(const std::string& msg)
        : std::runtime_error("too few minority samples: " + msg) {}
};

struct EmptyMinority : std::runtime_error {
    explicit EmptyMinority(const std::string& msg) : std::runtime_error("empty minority: " + msg) {}
};

struct CorruptManifest : std::runtime_error {
    explicit CorruptManifest(const std::string& msg) : std::runtime_error("corrupt manifest: " + msg) {}
};

struct VersionMismatch : std::runtime_error {
    explicit VersionMismatch(const std::string& msg) : std::runtime_error("version mismatch: " + msg) {}
};

}  // namespace forge
