#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mbot/common.hpp"

namespace mbot {

namespace detail {
inline double pow_cost(double diff, double p) {
    const double ad = std::abs(diff);
    if (p == 1.0) return ad;
    if (p == 2.0) return ad * ad;
    return std::pow(ad, p);
}
}  // namespace detail

// Quantile (north-west / monotone) coupling of two sorted 1D supports.
// For uniform weights of equal length this is the identity matching. The
// monotone coupling is optimal for costs |x-y|^p, p >= 1.
inline KernelResult wasserstein_1d(const Vec& a, const Vec& b, const Vec& x, const Vec& y,
                                   double p) {
    if (a.size() != x.size() || b.size() != y.size())
        throw ValidationError("wasserstein_1d: weight/support length mismatch");
    if (!std::is_sorted(x.begin(), x.end()) || !std::is_sorted(y.begin(), y.end()))
        throw ValidationError("wasserstein_1d: supports must be sorted ascending");
    validate_prob(a, "a");
    validate_prob(b, "b");

    KernelResult res;
    res.has_plan = true;
    res.plan.matrix = Matrix(x.size(), y.size(), 0.0);
    res.plan.row_marginal = a;
    res.plan.col_marginal = b;

    std::size_t i = 0, j = 0;
    double ra = a[0], rb = b[0];
    double value = 0.0;
    while (true) {
        const double t = std::min(ra, rb);
        if (t > 0.0) {
            value += t * detail::pow_cost(x[i] - y[j], p);
            res.plan.matrix(i, j) += t;
        }
        ra -= t;
        rb -= t;
        if (i == x.size() - 1 && j == y.size() - 1) break;
        if (j == y.size() - 1 || (i != x.size() - 1 && ra <= rb)) {
            if (i == x.size() - 1) break;
            ++i;
            ra = a[i];
        } else {
            ++j;
            rb = b[j];
        }
    }
    res.value = value;
    return res;
}

// Monotone batch coupling for arbitrary (unsorted, possibly repeated) 1D
// batches: sort both sides stably by (value, position), couple the quantiles,
// then map entries back to the original positions. Entries land in (row, col)
// position space of the inputs. Used by the minibatch plan path for d == 1,
// where p = 1 costs admit non-monotone optimal vertices that would break the
// sorted-coupling convention of the closed form.
inline double monotone_coupling_1d(const Vec& wa, const Vec& wb, const Vec& xs, const Vec& ys,
                                   double p, std::vector<PlanEntry>& out) {
    const std::size_t m1 = xs.size(), m2 = ys.size();
    std::vector<std::uint32_t> ox(m1), oy(m2);
    std::iota(ox.begin(), ox.end(), 0u);
    std::iota(oy.begin(), oy.end(), 0u);
    std::sort(ox.begin(), ox.end(), [&](std::uint32_t l, std::uint32_t r) {
        return xs[l] != xs[r] ? xs[l] < xs[r] : l < r;
    });
    std::sort(oy.begin(), oy.end(), [&](std::uint32_t l, std::uint32_t r) {
        return ys[l] != ys[r] ? ys[l] < ys[r] : l < r;
    });

    out.clear();
    std::size_t i = 0, j = 0;
    double ra = wa[ox[0]], rb = wb[oy[0]];
    double value = 0.0;
    while (true) {
        const double t = std::min(ra, rb);
        if (t > 0.0) {
            value += t * detail::pow_cost(xs[ox[i]] - ys[oy[j]], p);
            out.push_back({ox[i], oy[j], t});
        }
        ra -= t;
        rb -= t;
        if (i == m1 - 1 && j == m2 - 1) break;
        if (j == m2 - 1 || (i != m1 - 1 && ra <= rb)) {
            if (i == m1 - 1) break;
            ++i;
            ra = wa[ox[i]];
        } else {
            ++j;
            rb = wb[oy[j]];
        }
    }
    return value;
}

}  // namespace mbot
