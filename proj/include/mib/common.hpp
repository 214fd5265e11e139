#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mib {

// ---------------------------------------------------------------------------
// Error taxonomy. Exit-code mapping lives in the CLI.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Incompatible dimensions (matrix widths, row counts, ...).
struct ShapeError : Error {
    using Error::Error;
};

/// Value outside the mathematical domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

/// API misuse: bad argument combination, missing precondition.
struct UsageError : Error {
    using Error::Error;
};

/// Malformed input file; message carries line/column context.
struct ParseError : Error {
    using Error::Error;
};

/// Non-finite gradient or parameter during training; names the parameter.
struct TrainingFault : Error {
    using Error::Error;
};

/// Invalid run configuration; message lists every violated field.
struct ConfigError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Seed derivation. Every random draw in the toolkit flows from one master
// seed through derive_seed(master, purpose, index...) so any sub-result is
// independently replayable.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derive a child seed from a base seed, a purpose tag and up to two indices.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = splitmix64(base ^ fnv1a64(purpose));
    h = splitmix64(h ^ (a * 0xd6e8feb86659fd93ULL));
    h = splitmix64(h ^ (b * 0xa0761d6478bd642fULL));
    return h;
}

// ---------------------------------------------------------------------------
// Dense row-major matrix of doubles. The only numeric container the toolkit
// uses; deliberately minimal.
// ---------------------------------------------------------------------------

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return v_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return v_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return v_[i * cols_ + j]; }

    double* row(std::size_t i) { return v_.data() + i * cols_; }
    const double* row(std::size_t i) const { return v_.data() + i * cols_; }

    std::vector<double>& data() { return v_; }
    const std::vector<double>& data() const { return v_; }

    bool all_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    /// Column-wise horizontal concatenation [a | b]; row counts must match.
    static Matrix hcat(const Matrix& a, const Matrix& b) {
        if (a.rows() != b.rows())
            throw ShapeError("hcat: row count mismatch (" + std::to_string(a.rows()) +
                             " vs " + std::to_string(b.rows()) + ")");
        Matrix out(a.rows(), a.cols() + b.cols());
        for (std::size_t i = 0; i < a.rows(); ++i) {
            for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
            for (std::size_t j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
        }
        return out;
    }

    /// New matrix holding the given rows, in order.
    Matrix take_rows(const std::vector<std::size_t>& idx) const {
        Matrix out(idx.size(), cols_);
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < cols_; ++j) out(i, j) = (*this)(idx[i], j);
        return out;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> v_;
};

}  // namespace mib
