#pragma once

#include <algorithm>
#include <cmath>

#include "mbot/common.hpp"
#include "mbot/exact_ot.hpp"

namespace mbot {

namespace detail {

// (L (x) P)_ij = sum_{i',j'} |C1_{ii'} - C2_{jj'}|^p P_{i'j'}.
// p == 2 uses the algebraic split |s-t|^2 = s^2 - 2st + t^2, which needs only
// matrix products; other p fall back to the direct contraction.
inline void gw_tensor_apply(const Matrix& C1, const Matrix& C2, double p, const Matrix& P,
                            Matrix& out) {
    const std::size_t n1 = C1.rows(), n2 = C2.rows();
    if (p == 2.0) {
        const Vec r = P.row_sums(), c = P.col_sums();
        Vec u(n1, 0.0), v(n2, 0.0);
        for (std::size_t i = 0; i < n1; ++i)
            for (std::size_t k = 0; k < n1; ++k) u[i] += C1(i, k) * C1(i, k) * r[k];
        for (std::size_t j = 0; j < n2; ++j)
            for (std::size_t l = 0; l < n2; ++l) v[j] += C2(j, l) * C2(j, l) * c[l];
        // T = C1 * P * C2 via (C1 * P) first.
        Matrix CP(n1, n2, 0.0);
        for (std::size_t i = 0; i < n1; ++i)
            for (std::size_t k = 0; k < n1; ++k) {
                const double w = C1(i, k);
                if (w == 0.0) continue;
                const double* prow = P.row(k);
                double* orow = CP.row(i);
                for (std::size_t j = 0; j < n2; ++j) orow[j] += w * prow[j];
            }
        for (std::size_t i = 0; i < n1; ++i)
            for (std::size_t j = 0; j < n2; ++j) {
                double t = 0.0;
                const double* cprow = CP.row(i);
                for (std::size_t l = 0; l < n2; ++l) t += cprow[l] * C2(l, j);
                out(i, j) = u[i] + v[j] - 2.0 * t;
            }
        return;
    }
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n1; ++k) {
                const double c1 = C1(i, k);
                const double* prow = P.row(k);
                for (std::size_t l = 0; l < n2; ++l) {
                    if (prow[l] == 0.0) continue;
                    s += std::pow(std::abs(c1 - C2(j, l)), p) * prow[l];
                }
            }
            out(i, j) = s;
        }
}

inline double frob_dot(const Matrix& A, const Matrix& B) {
    double s = 0.0;
    const double* pa = A.data();
    const double* pb = B.data();
    const std::size_t len = A.rows() * A.cols();
    for (std::size_t t = 0; t < len; ++t) s += pa[t] * pb[t];
    return s;
}

}  // namespace detail

// Gromov-Wasserstein by Frank-Wolfe: E(P) = sum |C1_{ii'} - C2_{jj'}|^p P_ij P_i'j'
// minimized over U(a,b), with the exact OT solver as the linear oracle and
// exact line search (the objective is quadratic along segments). Starts from
// the product coupling, stops on relative decrease < 1e-9 or 1000 iterations.
// Local optimum only: the problem is a non-convex quadratic program.
inline KernelResult solve_gw(const Vec& a, const Vec& b, const CostMatrix& C1cm,
                             const CostMatrix& C2cm, double p) {
    const Matrix& C1 = C1cm.entries;
    const Matrix& C2 = C2cm.entries;
    const std::size_t n1 = a.size(), n2 = b.size();
    if (C1.rows() != C1.cols() || C2.rows() != C2.cols())
        throw ValidationError("GW: intra-cost matrices must be square");
    if (C1.rows() != n1 || C2.rows() != n2)
        throw ValidationError("GW: marginal lengths do not match cost shapes");
    double scale = 0.0;
    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t j = 0; j < n1; ++j) {
            scale = std::max(scale, std::abs(C1(i, j)));
            if (std::abs(C1(i, j) - C1(j, i)) > 1e-12 * std::max(1.0, std::abs(C1(i, j))))
                throw ValidationError("GW: C1 must be symmetric");
        }
        if (std::abs(C1(i, i)) > 1e-12) throw ValidationError("GW: C1 diagonal must be zero");
    }
    for (std::size_t i = 0; i < n2; ++i) {
        for (std::size_t j = 0; j < n2; ++j) {
            scale = std::max(scale, std::abs(C2(i, j)));
            if (std::abs(C2(i, j) - C2(j, i)) > 1e-12 * std::max(1.0, std::abs(C2(i, j))))
                throw ValidationError("GW: C2 must be symmetric");
        }
        if (std::abs(C2(i, i)) > 1e-12) throw ValidationError("GW: C2 diagonal must be zero");
    }
    if (p != 2.0 && n1 * n2 > 4096)
        throw ValidationError("GW: direct contraction for p != 2 limited to n1*n2 <= 4096");

    Matrix P(n1, n2);
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j) P(i, j) = a[i] * b[j];

    Matrix LP(n1, n2), LD(n1, n2), D(n1, n2), G(n1, n2);
    NetworkSimplex nsx;
    detail::gw_tensor_apply(C1, C2, p, P, LP);
    double energy = detail::frob_dot(LP, P);

    constexpr int kMaxIter = 1000;
    constexpr double kRelTol = 1e-9;
    int it = 0;
    bool converged = false;
    while (it < kMaxIter) {
        ++it;
        for (std::size_t t = 0; t < n1 * n2; ++t) G.data()[t] = 2.0 * LP.data()[t];
        nsx.solve(a.data(), n1, b.data(), n2, G.data());
        for (std::size_t t = 0; t < n1 * n2; ++t) D.data()[t] = -P.data()[t];
        for (const auto& e : nsx.plan_entries()) D(e.i, e.j) += e.mass;

        const double lin = detail::frob_dot(G, D);  // directional derivative
        detail::gw_tensor_apply(C1, C2, p, D, LD);
        const double quad = detail::frob_dot(LD, D);

        double gamma;
        if (quad > 0.0)
            gamma = std::clamp(-lin / (2.0 * quad), 0.0, 1.0);
        else
            gamma = (quad + lin < 0.0) ? 1.0 : 0.0;
        if (gamma == 0.0) {
            converged = true;
            break;
        }

        for (std::size_t t = 0; t < n1 * n2; ++t) P.data()[t] += gamma * D.data()[t];
        const double new_energy = energy + gamma * lin + gamma * gamma * quad;
        detail::gw_tensor_apply(C1, C2, p, P, LP);
        const double drop = energy - new_energy;
        energy = new_energy;
        if (drop <= kRelTol * std::max(1.0, std::abs(energy))) {
            converged = true;
            break;
        }
    }

    KernelResult res;
    res.iterations = it;
    res.converged = converged;
    res.has_plan = true;
    res.plan.matrix = P;
    res.plan.row_marginal = a;
    res.plan.col_marginal = b;
    detail::gw_tensor_apply(C1, C2, p, P, LP);
    res.value = std::max(0.0, detail::frob_dot(LP, P));
    return res;
}

}  // namespace mbot
