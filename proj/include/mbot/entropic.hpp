#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "mbot/common.hpp"

namespace mbot {

// Log-domain Sinkhorn. Potentials f, g; the primal plan is
//   pi_ij = a_i b_j exp((f_i + g_j - C_ij) / eps).
// Updates are log-sum-exp, so small eps never underflows. Stops when the L1
// violation of both marginals drops below 1e-9 or at an iteration cap.
// Value reported is <pi, C> + eps * KL(pi | a (x) b).
//
// Two measures against the slow regime (cost spread far above eps, where
// alternating scaling contracts like 1 - 4 exp(-delta/2) with delta the log
// cross-ratio of the kernel matrix):
//   - adaptive over-relaxation: potentials move by omega times the plain
//     update. The windowed violation ratio mu at the current omega is fed
//     through Young's relation (mu + omega - 1)^2 = omega^2 * mu * rho^2 to
//     recover the plain contraction rho, and omega is reset to the optimal
//     2 / (1 + sqrt(1 - rho^2)); the update is a fixed point of this rule,
//     so the estimate is stable. Runaway violations drop omega back to 1,
//     and plain sweeps converge from arbitrary potentials, so the safeguard
//     is absolute;
//   - a size-scaled iteration cap, since deep iteration is affordable
//     exactly when the matrix is tiny.
inline KernelResult solve_entropic(const Vec& a, const Vec& b, const CostMatrix& C,
                                   double eps) {
    const std::size_t n1 = a.size(), n2 = b.size();
    if (n1 != C.entries.rows() || n2 != C.entries.cols())
        throw ValidationError("entropic OT: marginal lengths do not match cost shape");
    if (!(eps > 0.0)) throw ValidationError("entropic OT: eps must be positive");

    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    Vec log_a(n1), log_b(n2);
    for (std::size_t i = 0; i < n1; ++i) log_a[i] = a[i] > 0.0 ? std::log(a[i]) : kNegInf;
    for (std::size_t j = 0; j < n2; ++j) log_b[j] = b[j] > 0.0 ? std::log(b[j]) : kNegInf;

    Vec f(n1, 0.0), g(n2, 0.0), scratch(std::max(n1, n2));
    const Matrix& M = C.entries;

    const auto lse = [&](const double* v, std::size_t len) {
        double mx = kNegInf;
        for (std::size_t t = 0; t < len; ++t) mx = std::max(mx, v[t]);
        if (mx == kNegInf) return kNegInf;
        double s = 0.0;
        for (std::size_t t = 0; t < len; ++t) s += std::exp(v[t] - mx);
        return mx + std::log(s);
    };

    const std::size_t cells = n1 * n2;
    const int kMaxIter = cells <= 256 ? 1000000 : (cells <= 4096 ? 100000 : 10000);
    constexpr double kTol = 1e-9;
    int it = 0;
    bool converged = false;
    Matrix plan(n1, n2, 0.0);

    const auto rebuild_plan = [&]() {
        for (std::size_t i = 0; i < n1; ++i) {
            if (a[i] == 0.0) {
                for (std::size_t j = 0; j < n2; ++j) plan(i, j) = 0.0;
                continue;
            }
            for (std::size_t j = 0; j < n2; ++j)
                plan(i, j) = (b[j] == 0.0)
                                 ? 0.0
                                 : std::exp(log_a[i] + log_b[j] +
                                            (f[i] + g[j] - M(i, j)) / eps);
        }
    };

    int probe_len = 32;  // sweeps between contraction estimates
    int next_probe = probe_len;
    double omega = 1.0;
    double probe_viol = std::numeric_limits<double>::infinity();
    double best_viol = std::numeric_limits<double>::infinity();

    while (it < kMaxIter) {
        ++it;
        for (std::size_t i = 0; i < n1; ++i) {
            if (a[i] == 0.0) {
                f[i] = 0.0;
                continue;
            }
            for (std::size_t j = 0; j < n2; ++j)
                scratch[j] = log_b[j] + (g[j] - M(i, j)) / eps;
            const double fi = -eps * lse(scratch.data(), n2);
            f[i] += omega * (fi - f[i]);
        }
        for (std::size_t j = 0; j < n2; ++j) {
            if (b[j] == 0.0) {
                g[j] = 0.0;
                continue;
            }
            for (std::size_t i = 0; i < n1; ++i)
                scratch[i] = log_a[i] + (f[i] - M(i, j)) / eps;
            const double gj = -eps * lse(scratch.data(), n1);
            g[j] += omega * (gj - g[j]);
        }

        rebuild_plan();
        double row_viol = 0.0, col_viol = 0.0;
        for (std::size_t i = 0; i < n1; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n2; ++j) s += plan(i, j);
            row_viol += std::abs(s - a[i]);
        }
        for (std::size_t j = 0; j < n2; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n1; ++i) s += plan(i, j);
            col_viol += std::abs(s - b[j]);
        }
        const double viol = std::max(row_viol, col_viol);
        if (viol < kTol) {
            converged = true;
            break;
        }
        best_viol = std::min(best_viol, viol);
        if (viol > 1e3 * best_viol) {
            omega = 1.0;  // runaway: back to plain sweeps, re-estimate later
            probe_viol = std::numeric_limits<double>::infinity();
            best_viol = viol;
            next_probe = it + probe_len;
        } else if (it >= next_probe) {
            if (probe_viol < std::numeric_limits<double>::infinity() && probe_viol > 0.0) {
                const double mu = std::pow(viol / probe_viol, 1.0 / probe_len);
                if (mu < 1.0) {
                    const double t = mu + omega - 1.0;
                    const double rho2 = t * t / (omega * omega * mu);
                    // leave quick solves on the plain, well-tested trajectory
                    if (rho2 > 0.25 && rho2 < 1.0) {
                        omega = std::min(1.98, 2.0 / (1.0 + std::sqrt(1.0 - rho2)));
                        probe_len = 128;  // longer window averages SOR oscillation
                    }
                }
            }
            probe_viol = viol;
            next_probe = it + probe_len;
        }
    }

    KernelResult res;
    res.iterations = it;
    res.converged = converged;
    res.has_plan = true;
    res.plan.matrix = plan;
    res.plan.row_marginal = a;
    res.plan.col_marginal = b;

    double transport = 0.0, rel_ent = 0.0;
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j) {
            const double m = plan(i, j);
            if (m <= 0.0) continue;
            transport += m * M(i, j);
            rel_ent += m * (std::log(m) - log_a[i] - log_b[j]);
        }
    res.value = transport + eps * rel_ent;
    return res;
}

// S^eps(a,b) = W^eps(a,b) - (W^eps(a,a) + W^eps(b,b)) / 2. No plan: three
// distinct plans exist internally and none is canonical.
inline KernelResult sinkhorn_divergence(const Vec& a, const Vec& b, const CostMatrix& C_xy,
                                        const CostMatrix& C_xx, const CostMatrix& C_yy,
                                        double eps) {
    const KernelResult xy = solve_entropic(a, b, C_xy, eps);
    const KernelResult xx = solve_entropic(a, a, C_xx, eps);
    const KernelResult yy = solve_entropic(b, b, C_yy, eps);
    KernelResult res;
    res.value = xy.value - 0.5 * (xx.value + yy.value);
    res.iterations = std::max({xy.iterations, xx.iterations, yy.iterations});
    res.converged = xy.converged && xx.converged && yy.converged;
    res.has_plan = false;
    return res;
}

}  // namespace mbot
