#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mbot/common.hpp"
#include "mbot/cost.hpp"
#include "mbot/entropic.hpp"
#include "mbot/exact_ot.hpp"
#include "mbot/gromov.hpp"
#include "mbot/parallel.hpp"
#include "mbot/rng.hpp"
#include "mbot/wasserstein1d.hpp"

namespace mbot {

// Batch kernels. Wasserstein is the p-th root of WassersteinPow; both share
// the same optimal plan.
enum class Kernel { Wasserstein, WassersteinPow, Entropic, SinkhornDiv, GromovWasserstein };
enum class Reweight { Uniform, Normalized };
enum class Law { WithReplacement, WithoutReplacement };
enum class Estimator { Complete, Incomplete };

inline const char* kernel_name(Kernel k) {
    switch (k) {
        case Kernel::Wasserstein: return "wp";
        case Kernel::WassersteinPow: return "wp_pow";
        case Kernel::Entropic: return "entropic";
        case Kernel::SinkhornDiv: return "sinkhorn_div";
        case Kernel::GromovWasserstein: return "gw";
    }
    return "?";
}
inline const char* reweight_name(Reweight r) {
    return r == Reweight::Uniform ? "uniform" : "normalized";
}
inline const char* law_name(Law l) {
    return l == Law::WithReplacement ? "with_replacement" : "without_replacement";
}

inline bool kernel_uses_eps(Kernel k) {
    return k == Kernel::Entropic || k == Kernel::SinkhornDiv;
}
// Kernels whose batch problem yields one transport plan that can be lifted.
inline bool plan_kernel(Kernel k) {
    return k == Kernel::Wasserstein || k == Kernel::WassersteinPow || k == Kernel::Entropic;
}

// Index m-tuple over a support of size n, 0-based, repeats allowed.
using IndexTuple = std::vector<std::uint32_t>;

struct MinibatchSpec {
    std::size_t m = 1;
    Kernel kernel = Kernel::WassersteinPow;
    double p = 2.0;
    double eps = 0.0;
    Reweight reweight = Reweight::Uniform;
    Law law = Law::WithoutReplacement;
    std::uint64_t k = 1;  // sampled batch pairs (incomplete mode)
    std::uint64_t seed = 42;
};

inline void validate_spec(const MinibatchSpec& s, std::size_t n_a, std::size_t n_b) {
    if (s.m == 0) throw ValidationError("minibatch spec: m must be >= 1");
    if (s.k == 0) throw ValidationError("minibatch spec: k must be >= 1");
    if (s.p < 1.0) throw ValidationError("minibatch spec: p must be >= 1");
    if (kernel_uses_eps(s.kernel) && !(s.eps > 0.0))
        throw ValidationError("minibatch spec: eps must be > 0 for entropic kernels");
    if (s.law == Law::WithoutReplacement && (s.m > n_a || s.m > n_b))
        throw ValidationError("minibatch spec: m exceeds support size for sampling "
                              "without replacement");
}

namespace detail {
inline void check_tuple(const Vec& a, const IndexTuple& I, const char* where) {
    if (I.empty()) throw ValidationError(std::string(where) + ": empty index tuple");
    for (std::uint32_t i : I)
        if (i >= a.size()) throw ValidationError(std::string(where) + ": index out of range");
}
}  // namespace detail

// ---- Reweighting functions -------------------------------------------------

inline void reweight_uniform_into(const IndexTuple& I, Vec& out) {
    out.assign(I.size(), 1.0 / static_cast<double>(I.size()));
}

inline void reweight_normalized_into(const Vec& a, const IndexTuple& I, Vec& out) {
    const std::size_t m = I.size();
    out.resize(m);
    double s = 0.0;
    for (std::uint32_t i : I) s += a[i];
    if (s <= 0.0) {  // all selected entries massless: fall back to uniform
        out.assign(m, 1.0 / static_cast<double>(m));
        return;
    }
    for (std::size_t t = 0; t < m; ++t) out[t] = a[I[t]] / s;
}

inline void reweight_into(Reweight rw, const Vec& a, const IndexTuple& I, Vec& out) {
    if (rw == Reweight::Uniform)
        reweight_uniform_into(I, out);
    else
        reweight_normalized_into(a, I, out);
}

inline Vec reweight_uniform(const Vec& a, const IndexTuple& I) {
    detail::check_tuple(a, I, "reweight_uniform");
    Vec out;
    reweight_uniform_into(I, out);
    return out;
}

inline Vec reweight_normalized(const Vec& a, const IndexTuple& I) {
    detail::check_tuple(a, I, "reweight_normalized");
    Vec out;
    reweight_normalized_into(a, I, out);
    return out;
}

inline Vec reweight(Reweight rw, const Vec& a, const IndexTuple& I) {
    return rw == Reweight::Uniform ? reweight_uniform(a, I) : reweight_normalized(a, I);
}

// ---- Tuple laws ------------------------------------------------------------

// (n-m)!/(n-1)! as 1/((n-1)(n-2)...(n-m+1)), log-space when the product
// would overflow.
inline double without_replacement_scale(std::size_t n, std::size_t m) {
    double prod = 1.0;
    for (std::size_t t = 1; t < m; ++t) {
        prod *= static_cast<double>(n - t);
        if (prod > 1e300) {
            double lg = 0.0;
            for (std::size_t u = 1; u < m; ++u) lg += std::log(static_cast<double>(n - u));
            return std::exp(-lg);
        }
    }
    return 1.0 / prod;
}

// Probability of the ordered tuple I. With replacement: product of weights.
// Without replacement: 0 on repeats, else (1/m) (n-m)!/(n-1)! sum of weights.
inline double tuple_probability(Law law, const Vec& a, const IndexTuple& I) {
    detail::check_tuple(a, I, "tuple_probability");
    const std::size_t n = a.size(), m = I.size();
    if (law == Law::WithReplacement) {
        double p = 1.0;
        for (std::uint32_t i : I) p *= a[i];
        return p;
    }
    if (m > n) throw ValidationError("tuple_probability: m > n without replacement");
    IndexTuple sorted = I;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t t = 1; t < m; ++t)
        if (sorted[t] == sorted[t - 1]) return 0.0;
    double s = 0.0;
    for (std::uint32_t i : I) s += a[i];
    return (1.0 / static_cast<double>(m)) * without_replacement_scale(n, m) * s;
}

// Draws index tuples from either law. Reusable across many draws (owns the
// weight CDF and scratch state); draw() is deterministic in the Rng stream.
//
// Without replacement: pick a slot uniformly, fill it with an index drawn
// from the weights, then fill the remaining slots with a uniformly random
// ordered arrangement of distinct indices from the other n-1 (sparse partial
// Fisher-Yates, O(m) per draw). The induced tuple law matches
// tuple_probability by construction.
class TupleSampler {
  public:
    TupleSampler(Law law, const Vec& a, std::size_t m)
        : law_(law), n_(a.size()), m_(m), cdf_(cumulative(a)) {
        if (m_ == 0) throw ValidationError("sample_tuple: m must be >= 1");
        if (n_ == 0) throw ValidationError("sample_tuple: empty weight vector");
        if (!(cdf_.back() > 0.0)) throw ValidationError("sample_tuple: zero total mass");
        if (law_ == Law::WithoutReplacement && m_ > n_)
            throw ValidationError("sample_tuple: m > n without replacement");
        displaced_.reserve(2 * m_);
    }

    void draw(Rng& rng, IndexTuple& out) {
        out.resize(m_);
        if (law_ == Law::WithReplacement) {
            for (std::size_t t = 0; t < m_; ++t)
                out[t] = static_cast<std::uint32_t>(sample_cdf(cdf_, rng));
            return;
        }
        const std::size_t slot = static_cast<std::size_t>(rng.below(m_));
        const std::uint32_t special = static_cast<std::uint32_t>(sample_cdf(cdf_, rng));
        displaced_.clear();
        std::size_t t = 0;  // position within the virtual pool [0..n-2]
        for (std::size_t pos = 0; pos < m_; ++pos) {
            if (pos == slot) {
                out[pos] = special;
                continue;
            }
            const std::uint64_t r = t + rng.below(static_cast<std::uint64_t>(n_ - 1 - t));
            const std::uint32_t vr = pool_get(r, special);
            const std::uint32_t vt = pool_get(t, special);
            out[pos] = vr;
            displaced_[r] = vt;
            ++t;
        }
    }

  private:
    // Virtual pool holding [0..n-1] minus the special index, with lazily
    // recorded swaps.
    std::uint32_t pool_get(std::uint64_t pos, std::uint32_t special) const {
        const auto it = displaced_.find(pos);
        if (it != displaced_.end()) return it->second;
        return static_cast<std::uint32_t>(pos < special ? pos : pos + 1);
    }

    Law law_;
    std::size_t n_, m_;
    Vec cdf_;
    std::unordered_map<std::uint64_t, std::uint32_t> displaced_;
};

inline IndexTuple sample_tuple(Law law, const Vec& a, std::size_t m, Rng& rng) {
    TupleSampler s(law, a, m);
    IndexTuple out;
    s.draw(rng, out);
    return out;
}

// ---- Exact enumeration over batches ----------------------------------------

// Kernel values and lifted batch plans produced here are invariant under
// permutations of a tuple, so enumeration runs over canonical sorted
// representatives (subsets / multisets) with the number of orderings folded
// into the probability. This keeps complete estimators exact while shrinking
// the enumeration by up to m! per side.
struct CanonicalBatch {
    IndexTuple idx;  // sorted; strictly increasing without replacement
    double prob;     // total probability over all orderings of idx
    Vec weights;     // reweighting of the representative ordering
};

inline double factorial_d(std::size_t m) {
    double f = 1.0;
    for (std::size_t t = 2; t <= m; ++t) f *= static_cast<double>(t);
    return f;
}

// C(n, m) without replacement, C(n+m-1, m) with replacement.
inline double canonical_batch_count(Law law, std::size_t n, std::size_t m) {
    double c = 1.0;
    for (std::size_t t = 1; t <= m; ++t) {
        const double num = (law == Law::WithoutReplacement)
                               ? static_cast<double>(n - m + t)
                               : static_cast<double>(n - 1 + t);
        c *= num / static_cast<double>(t);
        if (c > 1e18) return c;
    }
    return c;
}

inline std::vector<CanonicalBatch> enumerate_batches(Law law, Reweight rw, const Vec& a,
                                                     std::size_t m) {
    const std::size_t n = a.size();
    if (m == 0) throw ValidationError("enumerate_batches: m must be >= 1");
    if (law == Law::WithoutReplacement && m > n)
        throw ValidationError("enumerate_batches: m > n without replacement");
    std::vector<CanonicalBatch> out;
    const double fact_m = factorial_d(m);
    IndexTuple idx(m);
    if (law == Law::WithoutReplacement) {
        for (std::size_t t = 0; t < m; ++t) idx[t] = static_cast<std::uint32_t>(t);
        while (true) {
            const double prob = fact_m * tuple_probability(law, a, idx);
            if (prob > 0.0) out.push_back({idx, prob, reweight(rw, a, idx)});
            std::size_t t = m;
            while (t > 0 && idx[t - 1] == static_cast<std::uint32_t>(n - m + t - 1)) --t;
            if (t == 0) break;
            ++idx[t - 1];
            for (std::size_t u = t; u < m; ++u) idx[u] = idx[u - 1] + 1;
        }
    } else {
        idx.assign(m, 0);
        while (true) {
            double mult = fact_m;  // orderings of this multiset: m!/prod(run!)
            std::size_t t = 0;
            while (t < m) {
                std::size_t u = t + 1;
                while (u < m && idx[u] == idx[t]) ++u;
                mult /= factorial_d(u - t);
                t = u;
            }
            const double prob = mult * tuple_probability(law, a, idx);
            if (prob > 0.0) out.push_back({idx, prob, reweight(rw, a, idx)});
            std::size_t v = m;
            while (v > 0 && idx[v - 1] == static_cast<std::uint32_t>(n - 1)) --v;
            if (v == 0) break;
            const std::uint32_t next = idx[v - 1] + 1;
            for (std::size_t u = v - 1; u < m; ++u) idx[u] = next;
        }
    }
    return out;
}

// E_{I~P}[Q_I' w(a, I)]: the expected lifted reweighting. Equals a exactly
// for the admissible pairings (uniform, with_replacement) and
// (normalized, without_replacement).
inline Vec expected_reweight(Law law, Reweight rw, const Vec& a, std::size_t m) {
    const auto batches = enumerate_batches(law, rw, a, m);
    Vec out(a.size(), 0.0);
    for (const auto& cb : batches)
        for (std::size_t t = 0; t < cb.idx.size(); ++t)
            out[cb.idx[t]] += cb.prob * cb.weights[t];
    return out;
}

inline bool admissible_pair(Reweight rw, Law law) {
    return (rw == Reweight::Uniform && law == Law::WithReplacement) ||
           (rw == Reweight::Normalized && law == Law::WithoutReplacement);
}

// ---- Batch kernel evaluation -----------------------------------------------

namespace detail {

inline void build_batch_cost(const PointCloud& X, const PointCloud& Y, const IndexTuple& I,
                             const IndexTuple& J, double p, Matrix& out) {
    out.reshape(I.size(), J.size());
    for (std::size_t r = 0; r < I.size(); ++r) {
        const double* x = X.point(I[r]);
        double* row = out.row(r);
        for (std::size_t c = 0; c < J.size(); ++c)
            row[c] = cost_from_sqdist(sq_dist(x, Y.point(J[c]), X.d), p);
    }
}

inline void build_batch_dist(const PointCloud& X, const IndexTuple& I, Matrix& out) {
    const std::size_t m = I.size();
    out.reshape(m, m);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = r + 1; c < m; ++c) {
            const double v = std::sqrt(sq_dist(X.point(I[r]), X.point(I[c]), X.d));
            out(r, c) = v;
            out(c, r) = v;
        }
}

inline double root_p(double v, double p) {
    if (p == 1.0) return v;
    if (p == 2.0) return std::sqrt(v);
    return std::pow(v, 1.0 / p);
}

}  // namespace detail

// One batch sub-problem evaluator with reusable workspaces. Not thread-safe;
// give each worker its own instance.
class BatchEval {
  public:
    double value(const MinibatchSpec& s, const Vec& wa, const Vec& wb, const PointCloud& X,
                 const PointCloud& Y, const IndexTuple& I, const IndexTuple& J) {
        return run(s, wa, wb, X, Y, I, J, nullptr);
    }

    // Batch plan entries are in batch position space (row r of I, column c of
    // J); only strictly positive masses are emitted.
    double value_and_plan(const MinibatchSpec& s, const Vec& wa, const Vec& wb,
                          const PointCloud& X, const PointCloud& Y, const IndexTuple& I,
                          const IndexTuple& J, std::vector<PlanEntry>& plan_out) {
        return run(s, wa, wb, X, Y, I, J, &plan_out);
    }

  private:
    double run(const MinibatchSpec& s, const Vec& wa, const Vec& wb, const PointCloud& X,
               const PointCloud& Y, const IndexTuple& I, const IndexTuple& J,
               std::vector<PlanEntry>* plan_out) {
        if (plan_out && !plan_kernel(s.kernel))
            throw ValidationError("batch plan requested for a kernel without a single plan");
        switch (s.kernel) {
            case Kernel::Wasserstein:
            case Kernel::WassersteinPow: {
                double v;
                if (X.d == 1 && Y.d == 1) {
                    // 1D fast path; also pins the monotone plan among ties so
                    // lifted plans match the analytic closed form.
                    gather1d(X, I, xs_);
                    gather1d(Y, J, ys_);
                    std::vector<PlanEntry>& sink = plan_out ? *plan_out : scratch_;
                    v = monotone_coupling_1d(wa, wb, xs_, ys_, s.p, sink);
                } else {
                    detail::build_batch_cost(X, Y, I, J, s.p, cost_);
                    nsx_.solve(wa.data(), wa.size(), wb.data(), wb.size(), cost_.data());
                    if (!nsx_.converged())
                        throw NumericalError("exact batch OT hit its pivot limit");
                    v = nsx_.value();
                    if (plan_out) *plan_out = nsx_.plan_entries();
                }
                return s.kernel == Kernel::Wasserstein ? detail::root_p(v, s.p) : v;
            }
            case Kernel::Entropic: {
                detail::build_batch_cost(X, Y, I, J, s.p, cost_);
                const KernelResult res = solve_entropic(wa, wb, {cost_, s.p}, s.eps);
                if (plan_out) {
                    plan_out->clear();
                    const Matrix& P = res.plan.matrix;
                    for (std::size_t r = 0; r < P.rows(); ++r)
                        for (std::size_t c = 0; c < P.cols(); ++c)
                            if (P(r, c) > 0.0)
                                plan_out->push_back({static_cast<std::uint32_t>(r),
                                                     static_cast<std::uint32_t>(c), P(r, c)});
                }
                return res.value;
            }
            case Kernel::SinkhornDiv: {
                detail::build_batch_cost(X, Y, I, J, s.p, cost_);
                detail::build_batch_cost(X, X, I, I, s.p, cxx_);
                detail::build_batch_cost(Y, Y, J, J, s.p, cyy_);
                return sinkhorn_divergence(wa, wb, {cost_, s.p}, {cxx_, s.p}, {cyy_, s.p},
                                           s.eps)
                    .value;
            }
            case Kernel::GromovWasserstein: {
                detail::build_batch_dist(X, I, d1_);
                detail::build_batch_dist(Y, J, d2_);
                return solve_gw(wa, wb, {d1_, 1.0}, {d2_, 1.0}, s.p).value;
            }
        }
        throw ValidationError("unknown kernel");
    }

    static void gather1d(const PointCloud& X, const IndexTuple& I, Vec& out) {
        out.resize(I.size());
        for (std::size_t t = 0; t < I.size(); ++t) out[t] = X.coords[I[t]];
    }

    Matrix cost_, cxx_, cyy_, d1_, d2_;
    Vec xs_, ys_;
    NetworkSimplex nsx_;
    std::vector<PlanEntry> scratch_;
};

// ---- Complete (enumeration) estimators --------------------------------------

namespace detail {

inline void validate_inputs(const MinibatchSpec& s, const Vec& a, const Vec& b,
                            const PointCloud& X, const PointCloud& Y, const char* where) {
    validate_prob(a, "a");
    validate_prob(b, "b");
    if (a.size() != X.n || b.size() != Y.n)
        throw ValidationError(std::string(where) + ": weight/cloud size mismatch");
    if (X.d != Y.d && s.kernel != Kernel::GromovWasserstein)
        throw ValidationError(std::string(where) + ": point dimension mismatch");
    if (X.n == 0 || Y.n == 0) throw ValidationError(std::string(where) + ": empty input");
    validate_spec(s, a.size(), b.size());
}

inline void enumerate_sides(const MinibatchSpec& s, const Vec& a, const Vec& b,
                            std::vector<CanonicalBatch>& A, std::vector<CanonicalBatch>& B) {
    const double ca = canonical_batch_count(s.law, a.size(), s.m);
    const double cb = canonical_batch_count(s.law, b.size(), s.m);
    if (ca * cb > 1e7)
        throw ValidationError("complete enumeration budget exceeded (> 1e7 batch pairs); "
                              "use the incomplete (sampled) estimator");
    A = enumerate_batches(s.law, s.reweight, a, s.m);
    B = enumerate_batches(s.law, s.reweight, b, s.m);
}

}  // namespace detail

// Exact expectation of the batch kernel under P_a x P_b by enumeration.
inline double complete_loss(const MinibatchSpec& s, const Vec& a, const Vec& b,
                            const PointCloud& X, const PointCloud& Y, unsigned workers = 1) {
    detail::validate_inputs(s, a, b, X, Y, "complete_loss");
    std::vector<CanonicalBatch> A, B;
    detail::enumerate_sides(s, a, b, A, B);
    const unsigned W = clamp_workers(workers);
    std::vector<BatchEval> evals(W);
    Vec partial(A.size(), 0.0);
    parallel_for(A.size(), W, [&](unsigned w, std::size_t i) {
        BatchEval& ev = evals[w];
        double acc = 0.0;
        for (std::size_t j = 0; j < B.size(); ++j)
            acc += A[i].prob * B[j].prob *
                   ev.value(s, A[i].weights, B[j].weights, X, Y, A[i].idx, B[j].idx);
        partial[i] = acc;
    });
    return tree_sum(partial);
}

// ---- Incomplete (Monte-Carlo) estimators ------------------------------------

struct EstimatorStats {
    double mean = 0.0;
    double std_error = 0.0;
    std::uint64_t batches = 0;
};

namespace detail {

/// Reproducibility contract: batch pair number idx is drawn from the substream
// derive_stream(master, "pair", idx), I before J, so results do not depend on
// the worker count.
inline EstimatorStats incomplete_stats_impl(const MinibatchSpec& s, const Vec& a, const Vec& b,
                                            const PointCloud& X, const PointCloud& Y,
                                            std::uint64_t master, unsigned workers) {
    const std::uint64_t k = s.k;
    Vec vals(k, 0.0);
    const unsigned W = clamp_workers(workers);
    struct Ctx {
        BatchEval ev;
        TupleSampler sa, sb;
        IndexTuple I, J;
        Vec wa, wb;
        Ctx(const MinibatchSpec& sp, const Vec& aw, const Vec& bw)
            : sa(sp.law, aw, sp.m), sb(sp.law, bw, sp.m) {}
    };
    std::vector<Ctx> ctx;
    ctx.reserve(W);
    for (unsigned w = 0; w < W; ++w) ctx.emplace_back(s, a, b);
    parallel_for(k, W, [&](unsigned w, std::size_t idx) {
        Ctx& c = ctx[w];
        Rng rng(master, "pair", idx);
        c.sa.draw(rng, c.I);
        c.sb.draw(rng, c.J);
        reweight_into(s.reweight, a, c.I, c.wa);
        reweight_into(s.reweight, b, c.J, c.wb);
        vals[idx] = c.ev.value(s, c.wa, c.wb, X, Y, c.I, c.J);
    });
    EstimatorStats st;
    st.batches = k;
    st.mean = tree_sum(vals) / static_cast<double>(k);
    if (k > 1) {
        for (double& v : vals) {
            const double d = v - st.mean;
            v = d * d;
        }
        st.std_error = std::sqrt(tree_sum(vals) /
                                 (static_cast<double>(k) * static_cast<double>(k - 1)));
    }
    return st;
}

}  // namespace detail

inline EstimatorStats incomplete_loss_stats(const MinibatchSpec& s, const Vec& a, const Vec& b,
                                            const PointCloud& X, const PointCloud& Y,
                                            unsigned workers = 1) {
    detail::validate_inputs(s, a, b, X, Y, "incomplete_loss");
    return detail::incomplete_stats_impl(s, a, b, X, Y, s.seed, workers);
}

// Mean of the batch kernel over k seeded i.i.d. tuple pairs.
inline double incomplete_loss(const MinibatchSpec& s, const Vec& a, const Vec& b,
                              const PointCloud& X, const PointCloud& Y, unsigned workers = 1) {
    return incomplete_loss_stats(s, a, b, X, Y, workers).mean;
}

// The tuple pairs incomplete_loss / incomplete_plan would evaluate, in order.
struct BatchPair {
    IndexTuple I, J;
};
inline std::vector<BatchPair> draw_batch_pairs(const MinibatchSpec& s, const Vec& a,
                                               const Vec& b) {
    TupleSampler sa(s.law, a, s.m), sb(s.law, b, s.m);
    std::vector<BatchPair> out(s.k);
    for (std::uint64_t idx = 0; idx < s.k; ++idx) {
        Rng rng(s.seed, "pair", idx);
        sa.draw(rng, out[idx].I);
        sb.draw(rng, out[idx].J);
    }
    return out;
}

// Loss minus half of both self losses. Zero at identical inputs in complete
// mode; Monte-Carlo mode draws the three terms from independent substreams
// of the master seed (offsets 0, 1, 2).
inline double debiased_loss(const MinibatchSpec& s, const Vec& a, const Vec& b,
                            const PointCloud& X, const PointCloud& Y,
                            Estimator mode = Estimator::Complete, unsigned workers = 1) {
    if (mode == Estimator::Complete) {
        const double ab = complete_loss(s, a, b, X, Y, workers);
        const double aa = complete_loss(s, a, a, X, X, workers);
        const double bb = complete_loss(s, b, b, Y, Y, workers);
        return ab - 0.5 * (aa + bb);
    }
    detail::validate_inputs(s, a, b, X, Y, "debiased_loss");
    const double ab =
        detail::incomplete_stats_impl(s, a, b, X, Y, derive_stream(s.seed, "debias", 0), workers)
            .mean;
    const double aa =
        detail::incomplete_stats_impl(s, a, a, X, X, derive_stream(s.seed, "debias", 1), workers)
            .mean;
    const double bb =
        detail::incomplete_stats_impl(s, b, b, Y, Y, derive_stream(s.seed, "debias", 2), workers)
            .mean;
    return ab - 0.5 * (aa + bb);
}

// ---- Lifted plans -----------------------------------------------------------

namespace detail {

inline void require_plan_kernel(const MinibatchSpec& s, const char* where) {
    if (s.kernel == Kernel::SinkhornDiv)
        throw ValidationError(std::string(where) +
                              ": the sinkhorn divergence involves three plans; no canonical "
                              "lifted plan");
    if (s.kernel == Kernel::GromovWasserstein)
        throw ValidationError(std::string(where) + ": no lifted plan for the GW kernel");
}

}  // namespace detail

// E_{I,J}[Q_I' Pi^m Q_J] by exact enumeration.
inline LiftedPlan averaged_plan(const MinibatchSpec& s, const Vec& a, const Vec& b,
                                const PointCloud& X, const PointCloud& Y) {
    detail::validate_inputs(s, a, b, X, Y, "averaged_plan");
    detail::require_plan_kernel(s, "averaged_plan");
    const std::size_t n1 = a.size(), n2 = b.size();
    if (static_cast<double>(n1) * static_cast<double>(n2) > 4.0e6)
        throw ValidationError("averaged_plan: dense accumulator too large; use incomplete_plan");
    std::vector<CanonicalBatch> A, B;
    detail::enumerate_sides(s, a, b, A, B);
    Matrix acc(n1, n2, 0.0);
    BatchEval ev;
    std::vector<PlanEntry> ents;
    for (std::size_t i = 0; i < A.size(); ++i)
        for (std::size_t j = 0; j < B.size(); ++j) {
            const double pw = A[i].prob * B[j].prob;
            ev.value_and_plan(s, A[i].weights, B[j].weights, X, Y, A[i].idx, B[j].idx, ents);
            for (const PlanEntry& e : ents) acc(A[i].idx[e.i], B[j].idx[e.j]) += pw * e.mass;
        }
    LiftedPlan out;
    out.n_rows = n1;
    out.n_cols = n2;
    out.batch_count = static_cast<std::uint64_t>(A.size()) * B.size();
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j)
            if (acc(i, j) > 0.0)
                out.entries.push_back({static_cast<std::uint32_t>(i),
                                       static_cast<std::uint32_t>(j), acc(i, j)});
    return out;
}

// (1/k) sum of lifted batch plans over k seeded draws, sparse.
inline LiftedPlan incomplete_plan(const MinibatchSpec& s, const Vec& a, const Vec& b,
                                  const PointCloud& X, const PointCloud& Y,
                                  unsigned workers = 1) {
    detail::validate_inputs(s, a, b, X, Y, "incomplete_plan");
    detail::require_plan_kernel(s, "incomplete_plan");
    const std::uint64_t k = s.k;
    const std::size_t n1 = a.size(), n2 = b.size();
    std::vector<std::vector<PlanEntry>> per(k);
    const unsigned W = clamp_workers(workers);
    struct Ctx {
        BatchEval ev;
        TupleSampler sa, sb;
        IndexTuple I, J;
        Vec wa, wb;
        std::vector<PlanEntry> ents;
        Ctx(const MinibatchSpec& sp, const Vec& aw, const Vec& bw)
            : sa(sp.law, aw, sp.m), sb(sp.law, bw, sp.m) {}
    };
    std::vector<Ctx> ctx;
    ctx.reserve(W);
    for (unsigned w = 0; w < W; ++w) ctx.emplace_back(s, a, b);
    parallel_for(k, W, [&](unsigned w, std::size_t idx) {
        Ctx& c = ctx[w];
        Rng rng(s.seed, "pair", idx);
        c.sa.draw(rng, c.I);
        c.sb.draw(rng, c.J);
        reweight_into(s.reweight, a, c.I, c.wa);
        reweight_into(s.reweight, b, c.J, c.wb);
        c.ev.value_and_plan(s, c.wa, c.wb, X, Y, c.I, c.J, c.ents);
        auto& dst = per[idx];
        dst.clear();
        dst.reserve(c.ents.size());
        for (const PlanEntry& e : c.ents) dst.push_back({c.I[e.i], c.J[e.j], e.mass});
    });
    // Merge sequentially in batch order so every key accumulates in the same
    // order regardless of worker count.
    std::unordered_map<std::uint64_t, double> accmap;
    accmap.reserve(static_cast<std::size_t>(
        std::min<std::uint64_t>(k * (2 * s.m), static_cast<std::uint64_t>(n1) * n2 + 1)));
    for (std::uint64_t idx = 0; idx < k; ++idx)
        for (const PlanEntry& e : per[idx])
            accmap[(static_cast<std::uint64_t>(e.i) << 32) | e.j] += e.mass;
    LiftedPlan out;
    out.n_rows = n1;
    out.n_cols = n2;
    out.batch_count = k;
    out.entries.reserve(accmap.size());
    const double inv_k = 1.0 / static_cast<double>(k);
    for (const auto& kv : accmap)
        if (kv.second > 0.0)
            out.entries.push_back({static_cast<std::uint32_t>(kv.first >> 32),
                                   static_cast<std::uint32_t>(kv.first & 0xffffffffULL),
                                   kv.second * inv_k});
    std::sort(out.entries.begin(), out.entries.end(), [](const PlanEntry& l, const PlanEntry& r) {
        return l.i != r.i ? l.i < r.i : l.j < r.j;
    });
    return out;
}

}  // namespace mbot
