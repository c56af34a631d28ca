#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mbot/common.hpp"

namespace mbot {

// Transportation network simplex on the full bipartite graph.
//
// Basis = spanning tree over n1 source + n2 sink nodes plus an artificial
// root. The initial basis hangs every node off the root by an artificial arc
// carrying its marginal, so the first real pivots drain the artificials. The
// entering arc is chosen by deterministic block search for the most negative
// reduced cost; the leaving arc uses Cunningham's rule (last minimum-flow
// backward arc in cycle order), which keeps the basis strongly feasible and
// prevents cycling on degenerate instances. Pivots update the tree, depths
// and potentials only on the re-hung subtree, so a pivot costs O(cycle +
// subtree) instead of O(nodes). Returns a vertex solution, so at most
// n1+n2-1 entries are nonzero.
//
// Potential convention: reduced cost of arc i->j is C[i][j] + pi[i] -
// pi[n1+j]; on the source side the basis edge stored at a node always points
// up toward its parent, on the sink side always down, so flow-update signs
// follow from which side of the bipartition a node is on.
//
// The class owns its scratch buffers so repeated small solves don't churn the
// allocator; reuse one instance per thread.
class NetworkSimplex {
  public:
    // C is row-major n1 x n2; a and b must have equal sums (tol 1e-9).
    void solve(const double* a, std::size_t n1, const double* b, std::size_t n2,
               const double* C) {
        if (n1 == 0 || n2 == 0) throw ValidationError("exact OT: empty marginal");
        n1_ = n1;
        n2_ = n2;
        N_ = n1 + n2;
        root_ = static_cast<std::uint32_t>(N_);
        n_arcs_ = n1 * n2;
        C_ = C;

        double sa = 0.0, sb = 0.0, cmax = 0.0;
        for (std::size_t i = 0; i < n1; ++i) {
            if (!(a[i] >= 0.0)) throw ValidationError("exact OT: negative row marginal");
            sa += a[i];
        }
        for (std::size_t j = 0; j < n2; ++j) {
            if (!(b[j] >= 0.0)) throw ValidationError("exact OT: negative column marginal");
            sb += b[j];
        }
        if (std::abs(sa - sb) > 1e-9)
            throw ValidationError("exact OT: marginal sums differ by more than 1e-9");
        for (std::size_t e = 0; e < n_arcs_; ++e) {
            if (!std::isfinite(C[e]))
                throw NumericalError("exact OT: non-finite cost entry");
            cmax = std::max(cmax, std::abs(C[e]));
        }
        tol_ = std::max(1e-12, 8.0 * static_cast<double>(N_) *
                                   std::numeric_limits<double>::epsilon()) *
               std::max(1.0, cmax);

        init_artificial(a, b, cmax);

        block_size_ = std::max<std::size_t>(
            64, static_cast<std::size_t>(std::sqrt(static_cast<double>(n_arcs_))));
        next_arc_ = 0;
        pivots_ = 0;
        converged_ = false;
        const long max_pivots = 200 * static_cast<long>(N_) + 10000;

        while (true) {
            const std::ptrdiff_t e = find_entering_block();
            if (e < 0) {
                converged_ = true;
                break;
            }
            if (++pivots_ > max_pivots) break;
            pivot(static_cast<std::size_t>(e));
        }

        collect_solution();
    }

    double value() const { return value_; }
    bool converged() const { return converged_; }
    long pivots() const { return pivots_; }
    // Positive-flow arcs, sorted by (row, col).
    const std::vector<PlanEntry>& plan_entries() const { return solution_; }

  private:
    static constexpr std::uint32_t kNone = 0xffffffffu;

    // Every node starts as a root child on an artificial arc. Any M above
    // half the cost range already forces the artificials out of the optimal
    // basis; keeping M near the cost scale protects the reduced costs from
    // cancellation noise.
    void init_artificial(const double* a, const double* b, double cmax) {
        parent_.assign(N_ + 1, kNone);
        arc_row_.assign(N_, kNone);  // kNone marks an artificial edge
        arc_col_.assign(N_, kNone);
        flow_.assign(N_, 0.0);
        pi_.assign(N_ + 1, 0.0);
        depth_.assign(N_ + 1, 0);
        if (kids_.size() < N_ + 1) kids_.resize(N_ + 1);
        for (std::size_t v = 0; v <= N_; ++v) kids_[v].clear();
        const double M = cmax + 1.0;
        kids_[root_].reserve(N_);
        for (std::uint32_t v = 0; v < N_; ++v) {
            parent_[v] = root_;
            flow_[v] = v < n1_ ? a[v] : b[v - n1_];
            pi_[v] = v < n1_ ? -M : M;
            depth_[v] = 1;
            kids_[root_].push_back(v);
        }
    }

    std::ptrdiff_t find_entering_block() {
        std::size_t scanned = 0;
        std::size_t e = next_arc_;
        std::size_t i = e / n2_, j = e % n2_;
        double best_rc = -tol_;
        std::ptrdiff_t best = -1;
        while (scanned < n_arcs_) {
            const std::size_t stop = std::min(n_arcs_ - scanned, block_size_);
            for (std::size_t t = 0; t < stop; ++t) {
                const double rc = C_[e] + pi_[i] - pi_[n1_ + j];
                if (rc < best_rc) {
                    best_rc = rc;
                    best = static_cast<std::ptrdiff_t>(e);
                }
                if (++j == n2_) {
                    j = 0;
                    if (++i == n1_) i = 0;
                }
                if (++e == n_arcs_) e = 0;
            }
            scanned += stop;
            if (best >= 0) {
                next_arc_ = e;
                return best;
            }
        }
        return -1;
    }

    // Lowest common ancestor of the entering arc's endpoints.
    std::uint32_t find_join(std::uint32_t u, std::uint32_t v) const {
        while (depth_[u] > depth_[v]) u = parent_[u];
        while (depth_[v] > depth_[u]) v = parent_[v];
        while (u != v) {
            u = parent_[u];
            v = parent_[v];
        }
        return u;
    }

    void child_remove(std::uint32_t p, std::uint32_t c) {
        auto& lst = kids_[p];
        for (std::size_t t = 0; t < lst.size(); ++t)
            if (lst[t] == c) {
                lst[t] = lst.back();
                lst.pop_back();
                return;
            }
    }

    // Push flow around the cycle closed by arc e, swap it against the leaving
    // arc, and re-hang the detached subtree.
    void pivot(std::size_t e) {
        const std::uint32_t first = static_cast<std::uint32_t>(e / n2_);
        const std::uint32_t second = static_cast<std::uint32_t>(n1_ + e % n2_);
        const std::uint32_t join = find_join(first, second);
        const double rc_in = C_[e] + pi_[first] - pi_[second];

        // The cycle runs first -> second through the entering arc and back up
        // the tree. Going up from `first` the cycle crosses each edge downward,
        // so source-side edges (which point up) are backward; going up from
        // `second` it crosses upward, making sink-side edges backward. The <
        // then <= asymmetry picks the last minimum in cycle order, which is
        // what keeps the basis strongly feasible.
        double theta = std::numeric_limits<double>::infinity();
        std::uint32_t u_out = kNone;
        bool out_on_first = true;
        for (std::uint32_t x = first; x != join; x = parent_[x])
            if (x < n1_ && flow_[x] < theta) {
                theta = flow_[x];
                u_out = x;
                out_on_first = true;
            }
        for (std::uint32_t x = second; x != join; x = parent_[x])
            if (x >= n1_ && flow_[x] <= theta) {
                theta = flow_[x];
                u_out = x;
                out_on_first = false;
            }
        if (u_out == kNone) throw NumericalError("exact OT: unbounded pivot");

        if (theta != 0.0) {
            for (std::uint32_t x = first; x != join; x = parent_[x])
                flow_[x] += x < n1_ ? -theta : theta;
            for (std::uint32_t x = second; x != join; x = parent_[x])
                flow_[x] += x < n1_ ? theta : -theta;
        }

        // Detach the subtree under the leaving edge; the entering arc re-hangs
        // it at the endpoint it contains.
        const std::uint32_t u_in = out_on_first ? first : second;
        const std::uint32_t v_in = out_on_first ? second : first;
        child_remove(parent_[u_out], u_out);

        // Reverse the parent chain u_in .. u_out; each edge's storage moves to
        // its former parent.
        path_.clear();
        for (std::uint32_t x = u_in; x != u_out; x = parent_[x]) path_.push_back(x);
        path_.push_back(u_out);
        for (std::size_t t = path_.size(); t-- > 1;) {
            const std::uint32_t low = path_[t - 1], high = path_[t];
            child_remove(high, low);
            kids_[low].push_back(high);
            parent_[high] = low;
            arc_row_[high] = arc_row_[low];
            arc_col_[high] = arc_col_[low];
            flow_[high] = flow_[low];
        }
        parent_[u_in] = v_in;
        arc_row_[u_in] = static_cast<std::uint32_t>(e / n2_);
        arc_col_[u_in] = static_cast<std::uint32_t>(e % n2_);
        flow_[u_in] = theta;
        kids_[v_in].push_back(u_in);

        // The whole re-hung subtree shifts by one constant, chosen to zero the
        // entering arc's reduced cost; depths refresh in the same sweep.
        const double delta = out_on_first ? -rc_in : rc_in;
        stack_.clear();
        stack_.push_back(u_in);
        depth_[u_in] = depth_[v_in] + 1;
        pi_[u_in] += delta;
        while (!stack_.empty()) {
            const std::uint32_t x = stack_.back();
            stack_.pop_back();
            for (const std::uint32_t c : kids_[x]) {
                depth_[c] = depth_[x] + 1;
                pi_[c] += delta;
                stack_.push_back(c);
            }
        }
    }

    void collect_solution() {
        solution_.clear();
        for (std::uint32_t v = 0; v < N_; ++v)
            if (flow_[v] > 0.0 && arc_row_[v] != kNone)
                solution_.push_back({arc_row_[v], arc_col_[v], flow_[v]});
        std::sort(solution_.begin(), solution_.end(), [](const PlanEntry& l, const PlanEntry& r) {
            return l.i != r.i ? l.i < r.i : l.j < r.j;
        });
        value_ = 0.0;
        for (const auto& en : solution_)
            value_ += en.mass * C_[static_cast<std::size_t>(en.i) * n2_ + en.j];
    }

    std::size_t n1_ = 0, n2_ = 0, N_ = 0, n_arcs_ = 0;
    std::uint32_t root_ = 0;
    const double* C_ = nullptr;
    double tol_ = 0.0;

    std::vector<std::uint32_t> parent_, arc_row_, arc_col_;
    std::vector<double> flow_, pi_;
    std::vector<std::uint32_t> depth_;
    std::vector<std::vector<std::uint32_t>> kids_;
    std::vector<std::uint32_t> path_, stack_;
    std::vector<PlanEntry> solution_;

    std::size_t block_size_ = 64, next_arc_ = 0;
    long pivots_ = 0;
    double value_ = 0.0;
    bool converged_ = true;
};

// Sparse solve with a caller-provided reusable solver.
inline double solve_exact_sparse(NetworkSimplex& nsx, const Vec& a, const Vec& b,
                                 const Matrix& C) {
    if (a.size() != C.rows() || b.size() != C.cols())
        throw ValidationError("exact OT: marginal lengths do not match cost shape");
    nsx.solve(a.data(), a.size(), b.data(), b.size(), C.data());
    return nsx.value();
}

inline KernelResult solve_exact_ot(const Vec& a, const Vec& b, const CostMatrix& C) {
    NetworkSimplex nsx;
    solve_exact_sparse(nsx, a, b, C.entries);
    KernelResult res;
    res.value = nsx.value();
    res.iterations = static_cast<int>(nsx.pivots());
    res.converged = nsx.converged();
    res.has_plan = true;
    res.plan.matrix = Matrix(a.size(), b.size(), 0.0);
    for (const auto& e : nsx.plan_entries()) res.plan.matrix(e.i, e.j) = e.mass;
    res.plan.row_marginal = a;
    res.plan.col_marginal = b;
    return res;
}

}  // namespace mbot
