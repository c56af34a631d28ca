#pragma once

#include <cmath>

#include "mbot/common.hpp"

namespace mbot {

// ||x - y||_2^p from the squared distance. Power 2 avoids the sqrt; power 1
// is the plain distance; other p go through pow.
inline double cost_from_sqdist(double s, double p) {
    if (p == 2.0) return s;
    if (p == 1.0) return std::sqrt(s);
    return std::pow(s, 0.5 * p);
}

// C[i][j] = ||x_i - y_j||_2^p.
inline CostMatrix build_cost_matrix(const PointCloud& X, const PointCloud& Y, double p) {
    if (X.d != Y.d) throw ValidationError("build_cost_matrix: dimension mismatch");
    if (p < 1.0) throw ValidationError("build_cost_matrix: p must be >= 1");
    CostMatrix C;
    C.power_p = p;
    C.entries = Matrix(X.n, Y.n);
    for (std::size_t i = 0; i < X.n; ++i) {
        const double* xi = X.point(i);
        double* row = C.entries.row(i);
        for (std::size_t j = 0; j < Y.n; ++j)
            row[j] = cost_from_sqdist(sq_dist(xi, Y.point(j), X.d), p);
    }
    // Identical input clouds must give an exactly clean diagonal.
    if (&X == &Y || (X.n == Y.n && X.coords == Y.coords))
        for (std::size_t i = 0; i < X.n && i < Y.n; ++i) C.entries(i, i) = 0.0;
    return C;
}

// Euclidean distance matrix of one cloud with itself (GW intra costs).
inline Matrix distance_matrix(const PointCloud& X) {
    Matrix D(X.n, X.n, 0.0);
    for (std::size_t i = 0; i < X.n; ++i)
        for (std::size_t j = i + 1; j < X.n; ++j) {
            const double v = std::sqrt(sq_dist(X.point(i), X.point(j), X.d));
            D(i, j) = v;
            D(j, i) = v;
        }
    return D;
}

}  // namespace mbot
