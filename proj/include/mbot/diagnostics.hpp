#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "mbot/common.hpp"
#include "mbot/minibatch.hpp"
#include "mbot/rng.hpp"
#include "mbot/synthetic.hpp"

namespace mbot {

// ---- Local mean conditions ---------------------------------------------------

enum class LocKind { Arithmetic, Geometric };

struct LocCondition {
    LocKind kind = LocKind::Arithmetic;
    std::size_t m = 1;
    double gamma = 1.0;  // in [0, 1]
    double D = 1.0;      // > 0
};

struct LocResult {
    bool holds = false;
    IndexTuple witness;  // the maximizing size-m subset (largest entries)
    double stat = 0.0;   // worst-case batch mean (arithmetic or geometric)
    double bound = 0.0;  // D / n^gamma
};

// The worst case over batches is attained by the m largest entries, for both
// the arithmetic and the geometric mean, so one sorted pass suffices.
inline LocResult check_loc(const Vec& a, const LocCondition& cond) {
    validate_prob(a, "a");
    const std::size_t n = a.size();
    if (cond.m < 1 || cond.m > n) throw ValidationError("check_loc: need 1 <= m <= n");
    if (cond.gamma < 0.0 || cond.gamma > 1.0)
        throw ValidationError("check_loc: gamma must lie in [0,1]");
    if (!(cond.D > 0.0)) throw ValidationError("check_loc: D must be > 0");
    std::vector<std::uint32_t> ord(n);
    std::iota(ord.begin(), ord.end(), 0u);
    std::sort(ord.begin(), ord.end(), [&](std::uint32_t l, std::uint32_t r) {
        return a[l] != a[r] ? a[l] > a[r] : l < r;
    });
    LocResult res;
    res.witness.assign(ord.begin(), ord.begin() + static_cast<std::ptrdiff_t>(cond.m));
    std::sort(res.witness.begin(), res.witness.end());
    if (cond.kind == LocKind::Arithmetic) {
        double s = 0.0;
        for (std::uint32_t i : res.witness) s += a[i];
        res.stat = s / static_cast<double>(cond.m);
    } else {
        bool zero = false;
        double lg = 0.0;
        for (std::uint32_t i : res.witness) {
            if (a[i] <= 0.0) {
                zero = true;
                break;
            }
            lg += std::log(a[i]);
        }
        res.stat = zero ? 0.0 : std::exp(lg / static_cast<double>(cond.m));
    }
    res.bound = cond.D / std::pow(static_cast<double>(n), cond.gamma);
    // fp slack only; genuine violations are factors, not epsilons
    res.holds = res.stat <= res.bound + 1e-9 * res.bound + 1e-15;
    return res;
}

// ---- Plan audits -------------------------------------------------------------

struct MarginalErrorReport {
    double row_l1 = 0.0;
    double col_l1 = 0.0;
    double max_row_dev = 0.0;
};

inline MarginalErrorReport marginal_error(const LiftedPlan& plan, const Vec& a, const Vec& b) {
    if (plan.n_rows != a.size() || plan.n_cols != b.size())
        throw ValidationError("marginal_error: shape mismatch");
    const Vec rows = plan.row_sums();
    const Vec cols = plan.col_sums();
    MarginalErrorReport rep;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::abs(rows[i] - a[i]);
        rep.row_l1 += d;
        rep.max_row_dev = std::max(rep.max_row_dev, d);
    }
    for (std::size_t j = 0; j < b.size(); ++j) rep.col_l1 += std::abs(cols[j] - b[j]);
    return rep;
}

struct SparsityReport {
    std::uint64_t nnz = 0;
    std::uint64_t bound = 0;  // k(2m-1)
    double share = 0.0;       // 1 - nnz/n^2
};

inline SparsityReport sparsity_audit(const LiftedPlan& plan, std::size_t m, std::uint64_t k) {
    if (m == 0 || k == 0) throw ValidationError("sparsity_audit: need m, k >= 1");
    SparsityReport rep;
    rep.nnz = plan.entries.size();
    rep.bound = k * (2 * static_cast<std::uint64_t>(m) - 1);
    const double cells =
        static_cast<double>(plan.n_rows) * static_cast<double>(plan.n_cols);
    rep.share = cells > 0.0 ? 1.0 - static_cast<double>(rep.nnz) / cells : 0.0;
    return rep;
}

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const Vec& xs, const Vec& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw ValidationError("loglog_slope: need at least 2 points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
            throw ValidationError("loglog_slope: data must be positive");
        const double lx = std::log(xs[i]), ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---- Marginal concentration experiment ---------------------------------------

// Lifted batch-plan row sums equal the lifted batch reweights exactly, so the
// marginal-deviation statistics need only the tuple draws, not OT solves.
struct MarginalCell {
    std::size_t n = 0, m = 0;
    std::uint64_t k = 0;
    double mean_row_l1 = 0.0;
    double mean_col_l1 = 0.0;
    double bound = 0.0;     // sqrt(2 log(2/delta) / k)
    double coverage = 0.0;  // fraction of reps whose max per-row deviation <= bound
};

struct MarginalReport {
    std::vector<MarginalCell> cells;  // m-major, then k in grid order
    std::vector<double> slopes;       // per m: log-log slope of mean_row_l1 vs k
    double delta = 0.05;
};

inline MarginalReport marginal_experiment(std::size_t n, const std::vector<std::size_t>& m_grid,
                                          const std::vector<std::uint64_t>& k_grid,
                                          std::size_t repetitions, double delta, Law law,
                                          std::uint64_t seed) {
    if (n == 0 || m_grid.empty() || k_grid.empty() || repetitions == 0)
        throw ValidationError("marginal_experiment: empty grid");
    if (!(delta > 0.0 && delta < 1.0))
        throw ValidationError("marginal_experiment: delta must lie in (0,1)");
    const Vec a = uniform_weights(n);
    MarginalReport rep;
    rep.delta = delta;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t mi = 0; mi < m_grid.size(); ++mi) {
        const std::size_t m = m_grid[mi];
        TupleSampler sampler(law, a, m);
        IndexTuple I;
        Vec count(n, 0.0);
        Vec ks, means;
        for (std::size_t ki = 0; ki < k_grid.size(); ++ki) {
            const std::uint64_t k = k_grid[ki];
            MarginalCell cell;
            cell.n = n;
            cell.m = m;
            cell.k = k;
            cell.bound = std::sqrt(2.0 * std::log(2.0 / delta) / static_cast<double>(k));
            std::size_t covered = 0;
            const double inv_km = 1.0 / (static_cast<double>(k) * static_cast<double>(m));
            for (std::size_t rep_i = 0; rep_i < repetitions; ++rep_i) {
                const std::uint64_t cell_idx =
                    (static_cast<std::uint64_t>(mi) * k_grid.size() + ki) * repetitions +
                    rep_i;
                // rows
                Rng rng(seed, "marginal", cell_idx);
                count.assign(n, 0.0);
                for (std::uint64_t bi = 0; bi < k; ++bi) {
                    sampler.draw(rng, I);
                    for (std::uint32_t idx : I) count[idx] += 1.0;
                }
                double l1 = 0.0, mx = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = std::abs(count[i] * inv_km - inv_n);
                    l1 += d;
                    mx = std::max(mx, d);
                }
                cell.mean_row_l1 += l1;
                if (mx <= cell.bound) ++covered;
                // columns (independent stream)
                Rng rng_c(seed, "marginal-col", cell_idx);
                count.assign(n, 0.0);
                for (std::uint64_t bi = 0; bi < k; ++bi) {
                    sampler.draw(rng_c, I);
                    for (std::uint32_t idx : I) count[idx] += 1.0;
                }
                double l1c = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    l1c += std::abs(count[i] * inv_km - inv_n);
                cell.mean_col_l1 += l1c;
            }
            cell.mean_row_l1 /= static_cast<double>(repetitions);
            cell.mean_col_l1 /= static_cast<double>(repetitions);
            cell.coverage = static_cast<double>(covered) / static_cast<double>(repetitions);
            rep.cells.push_back(cell);
            ks.push_back(static_cast<double>(k));
            means.push_back(cell.mean_row_l1);
        }
        rep.slopes.push_back(k_grid.size() >= 2
                                 ? loglog_slope(ks, means)
                                 : std::numeric_limits<double>::quiet_NaN());
    }
    return rep;
}

// ---- Deviation experiment (concentration of the incomplete estimator) --------

enum class DataDistribution { UniformCube, Gaussian };

struct DeviationParams {
    DataDistribution dist = DataDistribution::UniformCube;
    std::size_t d = 2;
    std::vector<std::size_t> n_grid;
    std::vector<std::uint64_t> k_grid;
    std::size_t repetitions = 100;
    double delta = 0.05;
    std::uint64_t seed = 42;
    std::uint64_t k_ref_factor = 100;  // reference uses k_ref = factor * max(k_grid)
    std::size_t ref_repeats = 16;      // independent data draws for the reference
};

struct DeviationCell {
    std::size_t n = 0;
    std::uint64_t k = 0;
    double mean_dev = 0.0;
    double quantile_dev = 0.0;  // empirical (1-delta) quantile
    double max_dev = 0.0;
    double bound = 0.0;     // 2M(2 sqrt(2m/n log(2/delta)) + sqrt(2 log(2/delta)/k))
    double coverage = 0.0;  // fraction of reps with dev <= bound
    double reference = 0.0;
    double reference_se = 0.0;
    double cost_sup = 0.0;  // observed M
};

struct DeviationReport {
    std::vector<DeviationCell> cells;  // n-major, then k in grid order
    double slope_n = 0.0;  // mean_dev vs n at the largest k
    double slope_k = 0.0;  // mean_dev vs k at the largest n
    double delta = 0.05;
    bool bounded = true;  // bound assertion meaningful (compact support)
};

namespace detail {

inline double max_cost_entry(const PointCloud& X, const PointCloud& Y, double p) {
    double mx = 0.0;
    for (std::size_t i = 0; i < X.n; ++i)
        for (std::size_t j = 0; j < Y.n; ++j)
            mx = std::max(mx, sq_dist(X.point(i), Y.point(j), X.d));
    return cost_from_sqdist(mx, p);
}

inline PointCloud draw_cloud(DataDistribution dist, std::size_t n, std::size_t d, Rng& rng) {
    return dist == DataDistribution::UniformCube ? uniform_cube(n, d, rng)
                                                 : gaussian_cloud(n, d, rng);
}

}  // namespace detail

inline DeviationReport deviation_experiment(const MinibatchSpec& spec,
                                            const DeviationParams& prm, unsigned workers = 1) {
    if (prm.n_grid.empty() || prm.k_grid.empty() || prm.repetitions == 0 || prm.d == 0)
        throw ValidationError("deviation_experiment: invalid grid");
    if (!(prm.delta > 0.0 && prm.delta < 1.0))
        throw ValidationError("deviation_experiment: delta must lie in (0,1)");
    if (prm.ref_repeats == 0 || prm.k_ref_factor == 0)
        throw ValidationError("deviation_experiment: invalid reference settings");
    const std::uint64_t k_max = *std::max_element(prm.k_grid.begin(), prm.k_grid.end());
    const std::uint64_t k_ref = prm.k_ref_factor * k_max;
    const double log_term = std::log(2.0 / prm.delta);

    DeviationReport report;
    report.delta = prm.delta;
    report.bounded = prm.dist == DataDistribution::UniformCube;

    for (std::size_t ci = 0; ci < prm.n_grid.size(); ++ci) {
        const std::size_t n = prm.n_grid[ci];
        if (spec.law == Law::WithoutReplacement && spec.m > n)
            throw ValidationError("deviation_experiment: m > n in grid");
        const std::uint64_t cell_master = derive_stream(prm.seed, "deviation", ci);
        const Vec u = uniform_weights(n);
        double cost_sup = 0.0;

        // Reference for E of the complete loss: high-k runs on independent
        // data draws; the theorems bound deviation from an expectation no
        // experiment evaluates exactly.
        Vec ref_vals(prm.ref_repeats, 0.0);
        for (std::size_t r = 0; r < prm.ref_repeats; ++r) {
            Rng data_rng(cell_master, "ref-data", r);
            const PointCloud X = detail::draw_cloud(prm.dist, n, prm.d, data_rng);
            const PointCloud Y = detail::draw_cloud(prm.dist, n, prm.d, data_rng);
            cost_sup = std::max(cost_sup, detail::max_cost_entry(X, Y, spec.p));
            MinibatchSpec sr = spec;
            sr.k = k_ref;
            sr.seed = derive_stream(cell_master, "ref-batch", r);
            ref_vals[r] = incomplete_loss(sr, u, u, X, Y, workers);
        }
        const double reference = tree_sum(ref_vals) / static_cast<double>(prm.ref_repeats);
        double ref_var = 0.0;
        for (double v : ref_vals) ref_var += (v - reference) * (v - reference);
        const double reference_se =
            prm.ref_repeats > 1
                ? std::sqrt(ref_var / (static_cast<double>(prm.ref_repeats) *
                                       static_cast<double>(prm.ref_repeats - 1)))
                : 0.0;

        // Repetition deviations per k; the M-dependent bound is applied after
        // all data draws contributed to the observed cost sup.
        std::vector<Vec> devs(prm.k_grid.size(), Vec(prm.repetitions, 0.0));
        for (std::size_t ki = 0; ki < prm.k_grid.size(); ++ki)
            for (std::size_t r = 0; r < prm.repetitions; ++r) {
                const std::uint64_t idx =
                    static_cast<std::uint64_t>(ki) * prm.repetitions + r;
                Rng data_rng(cell_master, "rep-data", idx);
                const PointCloud X = detail::draw_cloud(prm.dist, n, prm.d, data_rng);
                const PointCloud Y = detail::draw_cloud(prm.dist, n, prm.d, data_rng);
                cost_sup = std::max(cost_sup, detail::max_cost_entry(X, Y, spec.p));
                MinibatchSpec sr = spec;
                sr.k = prm.k_grid[ki];
                sr.seed = derive_stream(cell_master, "rep-batch", idx);
                devs[ki][r] = std::abs(incomplete_loss(sr, u, u, X, Y, workers) - reference);
            }

        for (std::size_t ki = 0; ki < prm.k_grid.size(); ++ki) {
            const std::uint64_t k = prm.k_grid[ki];
            DeviationCell cell;
            cell.n = n;
            cell.k = k;
            cell.reference = reference;
            cell.reference_se = reference_se;
            cell.cost_sup = cost_sup;
            cell.bound =
                2.0 * cost_sup *
                (2.0 * std::sqrt(2.0 * static_cast<double>(spec.m) /
                                 static_cast<double>(n) * log_term) +
                 std::sqrt(2.0 * log_term / static_cast<double>(k)));
            Vec sorted = devs[ki];
            std::sort(sorted.begin(), sorted.end());
            cell.mean_dev = tree_sum(sorted) / static_cast<double>(prm.repetitions);
            const std::size_t qi = std::min(
                prm.repetitions - 1,
                static_cast<std::size_t>(
                    std::ceil((1.0 - prm.delta) * static_cast<double>(prm.repetitions)) - 1));
            cell.quantile_dev = sorted[qi];
            cell.max_dev = sorted.back();
            std::size_t covered = 0;
            for (double v : sorted)
                if (v <= cell.bound) ++covered;
            cell.coverage = static_cast<double>(covered) / static_cast<double>(prm.repetitions);
            report.cells.push_back(cell);
        }
    }

    // Informational trend lines.
    const std::uint64_t k_largest = k_max;
    const std::size_t n_largest = *std::max_element(prm.n_grid.begin(), prm.n_grid.end());
    Vec xs, ys;
    for (const DeviationCell& c : report.cells)
        if (c.k == k_largest && c.mean_dev > 0.0) {
            xs.push_back(static_cast<double>(c.n));
            ys.push_back(c.mean_dev);
        }
    report.slope_n = xs.size() >= 2 ? loglog_slope(xs, ys)
                                    : std::numeric_limits<double>::quiet_NaN();
    xs.clear();
    ys.clear();
    for (const DeviationCell& c : report.cells)
        if (c.n == n_largest && c.mean_dev > 0.0) {
            xs.push_back(static_cast<double>(c.k));
            ys.push_back(c.mean_dev);
        }
    report.slope_k = xs.size() >= 2 ? loglog_slope(xs, ys)
                                    : std::numeric_limits<double>::quiet_NaN();
    return report;
}

// ---- Dimension-free sample complexity -----------------------------------------

struct ComplexityCell {
    std::size_t d = 0, n = 0;
    std::uint64_t k = 0;  // batch pairs actually drawn for this cell
    double lambda = 0.0;
};

struct ComplexityReport {
    std::vector<ComplexityCell> cells;  // d-major, then n in grid order
    std::vector<double> slopes;         // per d: log-log slope of |lambda| vs n
};

// Debiased loss between two independent samples of U[0,1]^d as n grows.
// spec.k == 0 scales the batch budget with the sample count (k = n), so the
// estimator noise decays at the same O(n^-1/2) rate as the quantity under
// study while total work stays O(n) per cell; a positive spec.k is used as a
// fixed budget for every cell. The target value is zero, so the decay fit
// runs on |lambda|.
inline ComplexityReport sample_complexity_experiment(const MinibatchSpec& spec,
                                                     const std::vector<std::size_t>& d_grid,
                                                     const std::vector<std::size_t>& n_grid,
                                                     std::uint64_t seed, unsigned workers = 1) {
    if (d_grid.empty() || n_grid.empty())
        throw ValidationError("sample_complexity_experiment: empty grid");
    ComplexityReport report;
    for (std::size_t di = 0; di < d_grid.size(); ++di) {
        Vec xs, ys;
        for (std::size_t ni = 0; ni < n_grid.size(); ++ni) {
            const std::size_t n = n_grid[ni];
            const std::uint64_t cell = static_cast<std::uint64_t>(di) * n_grid.size() + ni;
            Rng data_rng(seed, "complexity-data", cell);
            const PointCloud X = uniform_cube(n, d_grid[di], data_rng);
            const PointCloud Y = uniform_cube(n, d_grid[di], data_rng);
            MinibatchSpec sr = spec;
            sr.k = spec.k != 0 ? spec.k : static_cast<std::uint64_t>(n);
            sr.seed = derive_stream(seed, "complexity-batch", cell);
            const Vec u = uniform_weights(n);
            ComplexityCell c;
            c.d = d_grid[di];
            c.n = n;
            c.k = sr.k;
            c.lambda = debiased_loss(sr, u, u, X, Y, Estimator::Incomplete, workers);
            report.cells.push_back(c);
            if (c.lambda != 0.0) {
                xs.push_back(static_cast<double>(n));
                ys.push_back(std::abs(c.lambda));
            }
        }
        report.slopes.push_back(xs.size() >= 2 ? loglog_slope(xs, ys)
                                               : std::numeric_limits<double>::quiet_NaN());
    }
    return report;
}

// ---- Lifted-plan sparsity under a fixed batch budget ---------------------------

struct SparsityCell {
    std::size_t n = 0, m = 0;
    std::uint64_t k = 0;
    std::uint64_t nnz = 0, bound = 0;
    double share = 0.0;
};

// Incomplete lifted plans between two Gaussian clouds at a roughly constant
// total batch budget k*m, audited per batch size.
inline std::vector<SparsityCell> sparsity_experiment(std::size_t n,
                                                     const std::vector<std::size_t>& m_grid,
                                                     std::uint64_t batch_budget,
                                                     std::uint64_t seed, unsigned workers = 1) {
    if (n == 0 || m_grid.empty() || batch_budget == 0)
        throw ValidationError("sparsity_experiment: empty grid");
    Rng rx(seed, "sparsity-x", 0);
    Rng ry(seed, "sparsity-y", 0);
    const PointCloud X = gaussian_cloud(n, 2, rx);
    const PointCloud Y = gaussian_cloud(n, 2, ry);
    const Vec u = uniform_weights(n);
    std::vector<SparsityCell> cells;
    for (std::size_t mi = 0; mi < m_grid.size(); ++mi) {
        MinibatchSpec s;
        s.m = m_grid[mi];
        s.kernel = Kernel::WassersteinPow;
        s.p = 2.0;
        s.reweight = Reweight::Uniform;
        s.law = Law::WithoutReplacement;
        s.k = std::max<std::uint64_t>(1, batch_budget / m_grid[mi]);
        s.seed = derive_stream(seed, "sparsity-batch", mi);
        const LiftedPlan plan = incomplete_plan(s, u, u, X, Y, workers);
        const SparsityReport rep = sparsity_audit(plan, s.m, s.k);
        cells.push_back({n, s.m, s.k, rep.nnz, rep.bound, rep.share});
    }
    return cells;
}

// ---- Positivity sweep ---------------------------------------------------------

struct PositivityRow {
    double theta = 0.0;
    double lambda_w1 = 0.0;
    double lambda_w2 = 0.0;
};

// Debiased losses between n equally spaced unit-circle points and a rotated
// copy, complete enumeration, swept over rotation angles in [0, pi].
inline std::vector<PositivityRow> positivity_sweep(std::size_t n_points, std::size_t m,
                                                   std::size_t grid, Law law,
                                                   Kernel w2_kernel = Kernel::Wasserstein) {
    if (n_points < 2 || m < 1 || grid < 2) throw ValidationError("positivity_sweep: bad sizes");
    const PointCloud X = circle_points(n_points);
    const Vec u = uniform_weights(n_points);
    MinibatchSpec s1;
    s1.m = m;
    s1.kernel = Kernel::Wasserstein;
    s1.p = 1.0;
    s1.reweight = Reweight::Uniform;
    s1.law = law;
    MinibatchSpec s2 = s1;
    s2.kernel = w2_kernel;
    s2.p = 2.0;
    std::vector<PositivityRow> rows(grid);
    for (std::size_t g = 0; g < grid; ++g) {
        const double theta =
            0.5 * kTau * static_cast<double>(g) / static_cast<double>(grid - 1);
        const PointCloud Y = rotate2d(X, theta);
        rows[g].theta = theta;
        rows[g].lambda_w1 = debiased_loss(s1, u, u, X, Y, Estimator::Complete);
        rows[g].lambda_w2 = debiased_loss(s2, u, u, X, Y, Estimator::Complete);
    }
    return rows;
}

// ---- GW rigid-motion invariance ------------------------------------------------

struct GwInvarianceReport {
    Vec angles;
    Vec values;                      // incomplete MBGW at each rotation of Y
    double rel_std = 0.0;            // std / mean over angles
    double translation_delta = 0.0;  // |value(Y + t) - value(Y)|
};

inline GwInvarianceReport gw_invariance_experiment(std::size_t n, std::size_t m,
                                                   std::uint64_t k, std::size_t angle_count,
                                                   std::uint64_t seed, unsigned workers = 1) {
    if (n < 2 || m < 1 || k < 1 || angle_count < 2)
        throw ValidationError("gw_invariance_experiment: bad sizes");
    Rng rx(seed, "gw-x", 0);
    Rng ry(seed, "gw-y", 0);
    const PointCloud X = spiral(n, 2.0, 0.02, rx);
    const PointCloud Y = spiral(n, 3.0, 0.02, ry);
    const Vec u = uniform_weights(n);
    MinibatchSpec s;
    s.m = m;
    s.kernel = Kernel::GromovWasserstein;
    s.p = 2.0;
    s.reweight = Reweight::Uniform;
    s.law = Law::WithoutReplacement;
    s.k = k;
    s.seed = derive_stream(seed, "gw-batch", 0);
    GwInvarianceReport rep;
    rep.angles.resize(angle_count);
    rep.values.resize(angle_count);
    for (std::size_t g = 0; g < angle_count; ++g) {
        const double theta = kTau * static_cast<double>(g) / static_cast<double>(angle_count);
        rep.angles[g] = theta;
        rep.values[g] = incomplete_loss(s, u, u, X, rotate2d(Y, theta), workers);
    }
    const double mean = tree_sum(rep.values) / static_cast<double>(angle_count);
    double var = 0.0;
    for (double v : rep.values) var += (v - mean) * (v - mean);
    rep.rel_std = mean != 0.0
                      ? std::sqrt(var / static_cast<double>(angle_count)) / std::abs(mean)
                      : 0.0;
    const double base = incomplete_loss(s, u, u, X, Y, workers);
    const double shifted = incomplete_loss(s, u, u, X, translate(Y, {13.25, -7.5}), workers);
    rep.translation_delta = std::abs(shifted - base);
    return rep;
}

}  // namespace mbot
