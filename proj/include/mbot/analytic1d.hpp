#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstddef>
#include <vector>

#include "mbot/common.hpp"
#include "mbot/wasserstein1d.hpp"

namespace mbot {

// Closed-form 1D minibatch transport-plan coefficients for uniform weights,
// sampling without replacement, sorted distinct support points. Exact
// rational arithmetic, independent of the enumeration machinery, so it can
// serve as an oracle for averaged_plan.

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

namespace detail {

inline BigInt binom_big(long n, long k) {
    if (k < 0 || n < 0 || k > n) return 0;
    if (k > n - k) k = n - k;
    BigInt r = 1;
    for (long t = 1; t <= k; ++t) {
        r *= (n - k + t);
        r /= t;  // exact: r is C(n-k+t, t) after this step
    }
    return r;
}

}  // namespace detail

// Plan entry at sorted positions (j, k), both 1-based in [1..n]:
//   (1/m) C(n,m)^-2 sum_i C(j-1,i-1) C(k-1,i-1) C(n-j,m-i) C(n-k,m-i)
// over i from max(1, m-n+j, m-n+k) to min(j, k, m). The sum starts at i=1
// rather than 0 because the i=0 summand carries C(j-1,-1) = 0.
inline Rational mb_plan_1d_entry(std::size_t n, std::size_t m, std::size_t j, std::size_t k) {
    if (n < 1) throw ValidationError("mb_plan_1d_entry: n must be >= 1");
    if (m < 1 || m > n) throw ValidationError("mb_plan_1d_entry: need 1 <= m <= n");
    if (j < 1 || j > n || k < 1 || k > n)
        throw ValidationError("mb_plan_1d_entry: position out of range");
    const long ln = static_cast<long>(n), lm = static_cast<long>(m);
    const long lj = static_cast<long>(j), lk = static_cast<long>(k);
    long i_min = 1;
    if (lm - ln + lj > i_min) i_min = lm - ln + lj;
    if (lm - ln + lk > i_min) i_min = lm - ln + lk;
    long i_max = lj < lk ? lj : lk;
    if (lm < i_max) i_max = lm;
    BigInt sum = 0;
    for (long i = i_min; i <= i_max; ++i)
        sum += detail::binom_big(lj - 1, i - 1) * detail::binom_big(lk - 1, i - 1) *
               detail::binom_big(ln - lj, lm - i) * detail::binom_big(ln - lk, lm - i);
    const BigInt cnm = detail::binom_big(ln, lm);
    return Rational(sum, lm * cnm * cnm);
}

// Exact rational row sum; equals 1/n for every row.
inline Rational mb_plan_1d_row_sum(std::size_t n, std::size_t m, std::size_t j) {
    Rational s = 0;
    for (std::size_t k = 1; k <= n; ++k) s += mb_plan_1d_entry(n, m, j, k);
    return s;
}

// Full n x n matrix as doubles (entries computed exactly, then rounded once).
inline Matrix mb_plan_1d(std::size_t n, std::size_t m) {
    if (n > 64) throw ValidationError("mb_plan_1d: n > 64 (binomial overflow guard)");
    if (n < 1 || m < 1 || m > n) throw ValidationError("mb_plan_1d: need 1 <= m <= n <= 64");
    Matrix out(n, n, 0.0);
    for (std::size_t j = 1; j <= n; ++j)
        for (std::size_t k = j; k <= n; ++k) {
            const double v = mb_plan_1d_entry(n, m, j, k).convert_to<double>();
            out(j - 1, k - 1) = v;
            out(k - 1, j - 1) = v;
        }
    return out;
}

// Brute-force averaged 1D plan for sampling WITH replacement (uniform
// weights, uniform batch reweighting, monotone batch couplings), by direct
// enumeration over multiset pairs. No closed-form fast path exists at a
// usable cost, so this stays a small-n oracle.
inline Matrix mb_plan_1d_with_replacement(std::size_t n, std::size_t m) {
    if (n < 1 || m < 1) throw ValidationError("mb_plan_1d_with_replacement: need n, m >= 1");
    if (n > 6) throw ValidationError("mb_plan_1d_with_replacement: n > 6 (brute force only)");
    // Non-decreasing tuples over [0..n-1] with multiplicities; probability of
    // a multiset is (#orderings)/n^m.
    struct MSet {
        std::vector<std::uint32_t> idx;
        double prob;
    };
    std::vector<MSet> sets;
    std::vector<std::uint32_t> idx(m, 0);
    double fact_m = 1.0;
    for (std::size_t t = 2; t <= m; ++t) fact_m *= static_cast<double>(t);
    const double inv_nm = std::pow(static_cast<double>(n), -static_cast<double>(m));
    while (true) {
        double mult = fact_m;
        std::size_t t = 0;
        while (t < m) {
            std::size_t u = t + 1;
            while (u < m && idx[u] == idx[t]) ++u;
            double rf = 1.0;
            for (std::size_t r = 2; r <= u - t; ++r) rf *= static_cast<double>(r);
            mult /= rf;
            t = u;
        }
        sets.push_back({idx, mult * inv_nm});
        std::size_t v = m;
        while (v > 0 && idx[v - 1] == n - 1) --v;
        if (v == 0) break;
        const std::uint32_t next = idx[v - 1] + 1;
        for (std::size_t u = v - 1; u < m; ++u) idx[u] = next;
    }
    const Vec w(m, 1.0 / static_cast<double>(m));
    Matrix acc(n, n, 0.0);
    Vec xs(m), ys(m);
    std::vector<PlanEntry> ents;
    for (const MSet& A : sets)
        for (const MSet& B : sets) {
            for (std::size_t t = 0; t < m; ++t) {
                xs[t] = static_cast<double>(A.idx[t]);
                ys[t] = static_cast<double>(B.idx[t]);
            }
            monotone_coupling_1d(w, w, xs, ys, 1.0, ents);
            const double pw = A.prob * B.prob;
            for (const PlanEntry& e : ents) acc(A.idx[e.i], B.idx[e.j]) += pw * e.mass;
        }
    return acc;
}

}  // namespace mbot
