#pragma once

#include <charconv>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpo {

using Vector = std::vector<double>;

/// Shortest decimal text that round-trips to the same double.
inline std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Dense row-major matrix. Used for return panels (T x n) and mask matrices.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    Vector column(std::size_t c) const {
        Vector out(rows);
        for (std::size_t r = 0; r < rows; ++r) out[r] = (*this)(r, c);
        return out;
    }
    Matrix transposed() const {
        Matrix t(cols, rows);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) t(c, r) = (*this)(r, c);
        return t;
    }
};

// Error taxonomy. The CLI maps each family onto its own exit code.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A non-finite or degenerate value appeared while evaluating a graph.
struct EvaluationError : Error {
    using Error::Error;
};

/// API misuse, e.g. backward() before forward().
struct UsageError : Error {
    using Error::Error;
};

/// Shape or dimension mismatch in caller-supplied data.
struct InputError : Error {
    using Error::Error;
};

/// Invalid loss spec, training config or scenario file.
struct ConfigError : Error {
    using Error::Error;
};

/// Bad CSV content: missing values, unordered dates, too few rows.
struct IngestionError : Error {
    using Error::Error;
};

/// Training diverged (non-finite loss).
struct TrainingError : Error {
    using Error::Error;
};

}  // namespace mpo
