#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mbot {

using Vec = std::vector<double>;

// Exit-code-aligned error taxonomy: validation (bad arguments / contract
// violations), io (files), numerical (solver failures).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IOError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense row-major matrix.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    // Reuses capacity; zero-fills. For workspace reuse in hot loops.
    void reshape(std::size_t rows, std::size_t cols) {
        rows_ = rows;
        cols_ = cols;
        data_.assign(rows * cols, 0.0);
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    Vec row_sums() const {
        Vec s(rows_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) s[i] += (*this)(i, j);
        return s;
    }
    Vec col_sums() const {
        Vec s(cols_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) s[j] += (*this)(i, j);
        return s;
    }

  private:
    std::size_t rows_ = 0, cols_ = 0;
    Vec data_;
};

// Point cloud: n points of dimension d, row-major.
struct PointCloud {
    std::size_t n = 0, d = 0;
    Vec coords;  // n*d

    PointCloud() = default;
    PointCloud(std::size_t n_, std::size_t d_) : n(n_), d(d_), coords(n_ * d_, 0.0) {}

    double* point(std::size_t i) { return coords.data() + i * d; }
    const double* point(std::size_t i) const { return coords.data() + i * d; }
};

inline double sq_dist(const double* x, const double* y, std::size_t d) {
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
        const double diff = x[t] - y[t];
        s += diff * diff;
    }
    return s;
}

// Probability vectors are plain Vecs; validation is explicit.
inline void validate_prob(const Vec& a, const char* name = "weights") {
    double s = 0.0;
    for (double v : a) {
        if (!(v >= 0.0))
            throw ValidationError(std::string(name) + ": negative or NaN entry");
        s += v;
    }
    if (std::abs(s - 1.0) > 1e-12)
        throw ValidationError(std::string(name) + ": entries must sum to 1 (got " +
                              std::to_string(s) + ")");
}

inline Vec uniform_weights(std::size_t n) { return Vec(n, 1.0 / static_cast<double>(n)); }

// Ground cost matrix with the exponent it was built with.
struct CostMatrix {
    Matrix entries;
    double power_p = 1.0;
};

// Dense transport plan between two discrete measures.
struct TransportPlan {
    Matrix matrix;
    Vec row_marginal;
    Vec col_marginal;
};

struct KernelResult {
    double value = 0.0;
    TransportPlan plan;   // meaningful iff has_plan
    bool has_plan = false;
    int iterations = 0;
    bool converged = true;
};

// Sparse n x n lifted plan, coordinate storage.
struct PlanEntry {
    std::uint32_t i = 0, j = 0;
    double mass = 0.0;
};

struct LiftedPlan {
    std::size_t n_rows = 0, n_cols = 0;
    std::vector<PlanEntry> entries;  // sorted by (i, j), strictly positive mass
    std::uint64_t batch_count = 0;

    Vec row_sums() const {
        Vec s(n_rows, 0.0);
        for (const auto& e : entries) s[e.i] += e.mass;
        return s;
    }
    Vec col_sums() const {
        Vec s(n_cols, 0.0);
        for (const auto& e : entries) s[e.j] += e.mass;
        return s;
    }
    double total_mass() const {
        double s = 0.0;
        for (const auto& e : entries) s += e.mass;
        return s;
    }
};

// Deterministic pairwise (tree) summation: reproducible and low-drift for
// large batch counts, independent of worker count.
inline double tree_sum(const double* v, std::size_t len) {
    if (len == 0) return 0.0;
    if (len <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < len; ++i) s += v[i];
        return s;
    }
    const std::size_t half = len / 2;
    return tree_sum(v, half) + tree_sum(v + half, len - half);
}

inline double tree_sum(const Vec& v) { return tree_sum(v.data(), v.size()); }

}  // namespace mbot
