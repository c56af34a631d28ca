#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include "mbot/common.hpp"
#include "mbot/entropic.hpp"
#include "mbot/exact_ot.hpp"
#include "mbot/gromov.hpp"
#include "mbot/minibatch.hpp"
#include "mbot/parallel.hpp"
#include "mbot/rng.hpp"
#include "mbot/wasserstein1d.hpp"

namespace mbot {

// Gradients of minibatch losses with respect to point coordinates, with each
// batch plan frozen at its optimum (a Danskin / envelope selection, so exact
// OT plans contribute a subgradient and entropic plans an exact gradient).

namespace detail {

// One batch's gradient contribution: compact rows so batches can be merged
// into the global gradient in batch order, independent of the worker count.
struct BatchContrib {
    std::vector<std::uint32_t> rows;  // global point ids
    Vec vals;                         // rows.size() x d, row-major
};

class GradScatter {
  public:
    void bind(BatchContrib& out, std::size_t dim) {
        out_ = &out;
        d_ = dim;
        lut_.clear();
        out_->rows.clear();
        out_->vals.clear();
    }
    double* row(std::uint32_t global) {
        auto [it, fresh] = lut_.try_emplace(global, static_cast<std::uint32_t>(out_->rows.size()));
        if (fresh) {
            out_->rows.push_back(global);
            out_->vals.resize(out_->vals.size() + d_, 0.0);
        }
        return out_->vals.data() + static_cast<std::size_t>(it->second) * d_;
    }
    std::size_t dim() const { return d_; }

  private:
    BatchContrib* out_ = nullptr;
    std::size_t d_ = 0;
    std::unordered_map<std::uint32_t, std::uint32_t> lut_;
};

inline void merge_contrib(const BatchContrib& c, std::size_t d, Matrix& G) {
    for (std::size_t r = 0; r < c.rows.size(); ++r) {
        const double* src = c.vals.data() + r * d;
        for (std::size_t col = 0; col < d; ++col) G(c.rows[r], col) += src[col];
    }
}

// d cost / d point for c(u,v) = |u-v|^p: dc/dv = f(s) (v-u) with s = |u-v|^2
// and f = p s^{(p-2)/2}; coincident points take the zero selection.
inline double sqdist_grad_factor(double s, double p) {
    if (s <= 0.0) return 0.0;
    if (p == 2.0) return 2.0;
    if (p == 1.0) return 1.0 / std::sqrt(s);
    return p * std::pow(s, 0.5 * p - 1.0);
}

// Scatters coef * d(sum_e mass_e c(x_e, y_e))/d(points) for a batch plan over
// points (X[I], Y[J]); either slot may be null.
inline void scatter_plan_grad(const std::vector<PlanEntry>& plan, const PointCloud& X,
                              const IndexTuple& I, const PointCloud& Y, const IndexTuple& J,
                              double p, double coef, GradScatter* sx, GradScatter* sy) {
    const std::size_t d = X.d;
    for (const PlanEntry& e : plan) {
        const double* u = X.point(I[e.i]);
        const double* v = Y.point(J[e.j]);
        const double f = sqdist_grad_factor(sq_dist(u, v, d), p);
        if (f == 0.0) continue;
        const double w = coef * e.mass * f;
        if (sy) {
            double* g = sy->row(J[e.j]);
            for (std::size_t c = 0; c < d; ++c) g[c] += w * (v[c] - u[c]);
        }
        if (sx) {
            double* g = sx->row(I[e.i]);
            for (std::size_t c = 0; c < d; ++c) g[c] += w * (u[c] - v[c]);
        }
    }
}

struct GradWork {
    Matrix cost, cxx, cyy, d1, d2, t, g1, g2;
    NetworkSimplex nsx;
    std::vector<PlanEntry> plan;
    Vec xs, ys;
    IndexTuple I, J;
    Vec wa, wb;
};

// Optimal batch plan for the exact kernels plus its raw transport cost.
inline double exact_batch_plan(GradWork& w, const Vec& wa, const Vec& wb, const PointCloud& X,
                               const PointCloud& Y, const IndexTuple& I, const IndexTuple& J,
                               double p) {
    w.plan.clear();
    if (X.d == 1) {
        const std::size_t m1 = I.size(), m2 = J.size();
        w.xs.resize(m1);
        w.ys.resize(m2);
        for (std::size_t r = 0; r < m1; ++r) w.xs[r] = X.point(I[r])[0];
        for (std::size_t r = 0; r < m2; ++r) w.ys[r] = Y.point(J[r])[0];
        return monotone_coupling_1d(wa, wb, w.xs, w.ys, p, w.plan);
    }
    build_batch_cost(X, Y, I, J, p, w.cost);
    w.nsx.solve(wa.data(), wa.size(), wb.data(), wb.size(), w.cost.data());
    if (!w.nsx.converged())
        throw NumericalError("batch gradient: exact solver hit its pivot cap");
    w.plan = w.nsx.plan_entries();
    return w.nsx.value();
}

inline void dense_plan_to_entries(const Matrix& P, std::vector<PlanEntry>& out) {
    out.clear();
    for (std::size_t i = 0; i < P.rows(); ++i)
        for (std::size_t j = 0; j < P.cols(); ++j)
            if (P(i, j) > 0.0)
                out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                               P(i, j)});
}

// dE/dC2 for the frozen GW plan; C1, C2 symmetric with zero diagonals.
// p = 2 factorizes; general p is the direct quartic sum.
inline void gw_dE_dC2(const Matrix& P, const Matrix& C1, const Matrix& C2, const Vec& wb,
                      double p, Matrix& T, Matrix& G2) {
    const std::size_t m1 = C1.rows(), m2 = C2.rows();
    G2.reshape(m2, m2);
    if (p == 2.0) {
        T.reshape(m2, m1);  // T = P^T C1
        for (std::size_t i = 0; i < m1; ++i)
            for (std::size_t j = 0; j < m2; ++j) {
                const double pij = P(i, j);
                if (pij == 0.0) continue;
                for (std::size_t k = 0; k < m1; ++k) T(j, k) += pij * C1(i, k);
            }
        for (std::size_t j = 0; j < m2; ++j)
            for (std::size_t l = 0; l < m2; ++l) {
                double s = 0.0;
                for (std::size_t k = 0; k < m1; ++k) s += T(j, k) * P(k, l);
                G2(j, l) = 2.0 * C2(j, l) * wb[j] * wb[l] - 2.0 * s;
            }
        return;
    }
    for (std::size_t i = 0; i < m1; ++i)
        for (std::size_t j = 0; j < m2; ++j) {
            const double pij = P(i, j);
            if (pij == 0.0) continue;
            for (std::size_t k = 0; k < m1; ++k)
                for (std::size_t l = 0; l < m2; ++l) {
                    const double pkl = P(k, l);
                    if (pkl == 0.0) continue;
                    const double diff = C2(j, l) - C1(i, k);
                    if (diff == 0.0) continue;
                    G2(j, l) += p * std::pow(std::abs(diff), p - 1.0) *
                                (diff > 0.0 ? 1.0 : -1.0) * pij * pkl;
                }
        }
}

// Chains a dE/dC sensitivity through a Euclidean distance matrix to points.
inline void scatter_dist_grad(const Matrix& G, const Matrix& C, const PointCloud& Y,
                              const IndexTuple& J, double coef, GradScatter* s) {
    const std::size_t m = J.size(), d = Y.d;
    for (std::size_t j = 0; j < m; ++j) {
        double* g = s->row(J[j]);
        const double* yj = Y.point(J[j]);
        for (std::size_t l = 0; l < m; ++l) {
            if (l == j || C(j, l) <= 0.0) continue;
            const double w = coef * (G(j, l) + G(l, j)) / C(j, l);
            const double* yl = Y.point(J[l]);
            for (std::size_t c = 0; c < d; ++c) g[c] += w * (yj[c] - yl[c]);
        }
    }
}

// Gradient of one batch kernel value, scattered into sx (d/dX) and sy (d/dY).
inline void batch_grad(const MinibatchSpec& s, const Vec& wa, const Vec& wb,
                       const PointCloud& X, const PointCloud& Y, const IndexTuple& I,
                       const IndexTuple& J, double coef, GradScatter* sx, GradScatter* sy,
                       GradWork& w) {
    switch (s.kernel) {
        case Kernel::WassersteinPow: {
            exact_batch_plan(w, wa, wb, X, Y, I, J, s.p);
            scatter_plan_grad(w.plan, X, I, Y, J, s.p, coef, sx, sy);
            return;
        }
        case Kernel::Wasserstein: {
            const double v = exact_batch_plan(w, wa, wb, X, Y, I, J, s.p);
            if (v <= 0.0) return;  // zero selection at the root's kink
            const double chain = (1.0 / s.p) * std::pow(v, 1.0 / s.p - 1.0);
            scatter_plan_grad(w.plan, X, I, Y, J, s.p, coef * chain, sx, sy);
            return;
        }
        case Kernel::Entropic: {
            build_batch_cost(X, Y, I, J, s.p, w.cost);
            const KernelResult r =
                solve_entropic(wa, wb, CostMatrix{w.cost, s.p}, s.eps);
            dense_plan_to_entries(r.plan.matrix, w.plan);
            scatter_plan_grad(w.plan, X, I, Y, J, s.p, coef, sx, sy);
            return;
        }
        case Kernel::SinkhornDiv: {
            build_batch_cost(X, Y, I, J, s.p, w.cost);
            const KernelResult rxy =
                solve_entropic(wa, wb, CostMatrix{w.cost, s.p}, s.eps);
            dense_plan_to_entries(rxy.plan.matrix, w.plan);
            scatter_plan_grad(w.plan, X, I, Y, J, s.p, coef, sx, sy);
            if (sx) {
                build_batch_cost(X, X, I, I, s.p, w.cxx);
                const KernelResult rxx =
                    solve_entropic(wa, wa, CostMatrix{w.cxx, s.p}, s.eps);
                dense_plan_to_entries(rxx.plan.matrix, w.plan);
                scatter_plan_grad(w.plan, X, I, X, I, s.p, -0.5 * coef, sx, sx);
            }
            if (sy) {
                build_batch_cost(Y, Y, J, J, s.p, w.cyy);
                const KernelResult ryy =
                    solve_entropic(wb, wb, CostMatrix{w.cyy, s.p}, s.eps);
                dense_plan_to_entries(ryy.plan.matrix, w.plan);
                scatter_plan_grad(w.plan, Y, J, Y, J, s.p, -0.5 * coef, sy, sy);
            }
            return;
        }
        case Kernel::GromovWasserstein: {
            build_batch_dist(X, I, w.d1);
            build_batch_dist(Y, J, w.d2);
            const KernelResult r = solve_gw(wa, wb, CostMatrix{w.d1, 1.0},
                                            CostMatrix{w.d2, 1.0}, s.p);
            if (sy) {
                gw_dE_dC2(r.plan.matrix, w.d1, w.d2, wb, s.p, w.t, w.g2);
                scatter_dist_grad(w.g2, w.d2, Y, J, coef, sy);
            }
            if (sx) {
                // same derivation with the roles of the two spaces swapped
                Matrix Pt(J.size(), I.size());
                for (std::size_t i = 0; i < I.size(); ++i)
                    for (std::size_t j = 0; j < J.size(); ++j) Pt(j, i) = r.plan.matrix(i, j);
                gw_dE_dC2(Pt, w.d2, w.d1, wa, s.p, w.t, w.g1);
                scatter_dist_grad(w.g1, w.d1, X, I, coef, sx);
            }
            return;
        }
    }
    throw ValidationError("batch gradient: unsupported kernel");
}

// Gradient of the incomplete estimator with batch pair idx drawn from
// derive_stream(master, "pair", idx), I before J, exactly as the loss does.
// Scatters into GX / GY when non-null; both may point at the same matrix when
// X and Y are the same cloud (the self term of a debiased loss).
inline void incomplete_grad(const MinibatchSpec& s, const Vec& a, const Vec& b,
                            const PointCloud& X, const PointCloud& Y, std::uint64_t master,
                            double coef, Matrix* GX, Matrix* GY, unsigned workers) {
    validate_inputs(s, a, b, X, Y, "loss gradient");
    const std::uint64_t k = s.k;
    const double per_batch = coef / static_cast<double>(k);
    const unsigned W = clamp_workers(workers);
    struct Ctx {
        GradWork w;
        TupleSampler sa, sb;
        GradScatter sx, sy;
        Ctx(const MinibatchSpec& sp, const Vec& a_, const Vec& b_)
            : sa(sp.law, a_, sp.m), sb(sp.law, b_, sp.m) {}
    };
    std::vector<Ctx> ctx;
    ctx.reserve(W);
    for (unsigned i = 0; i < W; ++i) ctx.emplace_back(s, a, b);
    std::vector<std::array<BatchContrib, 2>> per(k);
    parallel_for(k, W, [&](unsigned wi, std::size_t idx) {
        Ctx& c = ctx[wi];
        Rng rng(master, "pair", idx);
        c.sa.draw(rng, c.w.I);
        c.sb.draw(rng, c.w.J);
        reweight_into(s.reweight, a, c.w.I, c.w.wa);
        reweight_into(s.reweight, b, c.w.J, c.w.wb);
        GradScatter* sx = nullptr;
        GradScatter* sy = nullptr;
        if (GX) {
            c.sx.bind(per[idx][0], X.d);
            sx = &c.sx;
        }
        if (GY) {
            c.sy.bind(per[idx][1], Y.d);
            sy = &c.sy;
        }
        batch_grad(s, c.w.wa, c.w.wb, X, Y, c.w.I, c.w.J, per_batch, sx, sy, c.w);
    });
    for (std::uint64_t idx = 0; idx < k; ++idx) {
        if (GX) merge_contrib(per[idx][0], X.d, *GX);
        if (GY) merge_contrib(per[idx][1], Y.d, *GY);
    }
}

}  // namespace detail

// Gradient of the incomplete minibatch loss with respect to the second
// cloud's coordinates, batch plans frozen (Danskin selection). Shares the
// loss estimator's batch streams, so it differentiates exactly the quantity
// incomplete_loss reports for the same spec.
inline Matrix loss_grad_wrt_target(const MinibatchSpec& s, const Vec& a, const Vec& b,
                                   const PointCloud& X, const PointCloud& Y,
                                   unsigned workers = 1) {
    Matrix G(Y.n, Y.d);
    detail::incomplete_grad(s, a, b, X, Y, s.seed, 1.0, nullptr, &G, workers);
    return G;
}

// Gradient of the incomplete debiased loss with respect to the second cloud.
// The (a,a) self term is constant; the (b,b) term contributes through both
// of its slots. Streams match debiased_loss with Estimator::Incomplete.
inline Matrix debiased_loss_grad_wrt_target(const MinibatchSpec& s, const Vec& a, const Vec& b,
                                            const PointCloud& X, const PointCloud& Y,
                                            unsigned workers = 1) {
    Matrix G(Y.n, Y.d);
    detail::incomplete_grad(s, a, b, X, Y, derive_stream(s.seed, "debias", 0), 1.0, nullptr,
                            &G, workers);
    detail::incomplete_grad(s, b, b, Y, Y, derive_stream(s.seed, "debias", 2), -0.5, &G, &G,
                            workers);
    return G;
}

// ---- Plan-subgradient descent on particle positions ---------------------------

enum class FlowLoss { Raw, Debiased };

struct FlowConfig {
    MinibatchSpec spec;   // spec.seed is the flow master; step t uses its "flow" substream
    double eta = 0.05;
    std::size_t iterations = 100;
    FlowLoss loss = FlowLoss::Raw;
    std::size_t snapshot_stride = 0;  // 0: initial and final states only
    unsigned workers = 1;
};

struct FlowResult {
    std::vector<PointCloud> snapshots;
    std::vector<std::size_t> snapshot_steps;
    Vec loss_trace;  // estimate at each pre-update state, one entry per step
    std::size_t steps_run = 0;
};

// Moves X toward target by descending the minibatch loss(target, X) with
// fresh batches each step: X <- X - eta * m * grad. Uniform weights.
inline FlowResult gradient_flow(const PointCloud& X0, const PointCloud& target,
                                const FlowConfig& cfg) {
    if (X0.n == 0 || target.n == 0) throw ValidationError("gradient_flow: empty cloud");
    if (X0.d != target.d) throw ValidationError("gradient_flow: dimension mismatch");
    if (!(cfg.eta > 0.0)) throw ValidationError("gradient_flow: eta must be > 0");
    const Vec u_move = uniform_weights(X0.n);
    const Vec u_data = uniform_weights(target.n);
    FlowResult res;
    PointCloud X = X0;
    res.snapshots.push_back(X);
    res.snapshot_steps.push_back(0);
    res.loss_trace.reserve(cfg.iterations);
    const double step_scale = cfg.eta * static_cast<double>(cfg.spec.m);
    double prev_loss = std::numeric_limits<double>::infinity();
    std::size_t rising = 0;
    for (std::size_t t = 0; t < cfg.iterations; ++t) {
        MinibatchSpec st = cfg.spec;
        st.seed = derive_stream(cfg.spec.seed, "flow", t);
        double loss_t;
        Matrix G;
        if (cfg.loss == FlowLoss::Raw) {
            loss_t = incomplete_loss(st, u_data, u_move, target, X, cfg.workers);
            G = loss_grad_wrt_target(st, u_data, u_move, target, X, cfg.workers);
        } else {
            loss_t = debiased_loss(st, u_data, u_move, target, X, Estimator::Incomplete,
                                   cfg.workers);
            G = debiased_loss_grad_wrt_target(st, u_data, u_move, target, X, cfg.workers);
        }
        if (!std::isfinite(loss_t))
            throw NumericalError("gradient_flow: loss diverged to a non-finite value");
        rising = loss_t > prev_loss ? rising + 1 : 0;
        if (rising >= 50)
            throw NumericalError("gradient_flow: loss increased 50 steps in a row");
        prev_loss = loss_t;
        res.loss_trace.push_back(loss_t);
        for (std::size_t i = 0; i < X.n; ++i)
            for (std::size_t c = 0; c < X.d; ++c)
                X.coords[i * X.d + c] -= step_scale * G(i, c);
        res.steps_run = t + 1;
        if (cfg.snapshot_stride > 0 && (t + 1) % cfg.snapshot_stride == 0 &&
            t + 1 < cfg.iterations) {
            res.snapshots.push_back(X);
            res.snapshot_steps.push_back(t + 1);
        }
    }
    if (cfg.iterations > 0) {
        res.snapshots.push_back(X);
        res.snapshot_steps.push_back(cfg.iterations);
    }
    return res;
}

}  // namespace mbot
