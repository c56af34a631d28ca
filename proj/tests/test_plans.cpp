// Lifted transport plans and the 1d closed form.
#include "test_util.hpp"

#include <algorithm>
#include <cmath>

using namespace mbot;
using testutil::cloud_1d;
using testutil::max_abs_diff;
using testutil::random_cloud;
using testutil::random_simplex;
using testutil::to_dense;

namespace {

MinibatchSpec plan_spec(std::size_t m, Law law, Reweight rw, Kernel k = Kernel::WassersteinPow) {
    MinibatchSpec s;
    s.kernel = k;
    s.p = 2.0;
    if (k == Kernel::Entropic) s.eps = 1.0;
    s.m = m;
    s.law = law;
    s.reweight = rw;
    return s;
}

PointCloud grid_1d(std::size_t n) {
    Vec xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = static_cast<double>(i);
    return cloud_1d(xs);
}

}  // namespace

TEST_CASE("averaged plan marginals match under admissible pairings", "[plans]") {
    Rng rng(42);
    for (auto [law, rw] : {std::pair{Law::WithReplacement, Reweight::Uniform},
                           std::pair{Law::WithoutReplacement, Reweight::Normalized}}) {
        const std::size_t n1 = 5, n2 = 4, m = 2;
        const Vec a = random_simplex(n1, rng), b = random_simplex(n2, rng);
        const PointCloud X = random_cloud(n1, 2, rng), Y = random_cloud(n2, 2, rng);
        const LiftedPlan plan = averaged_plan(plan_spec(m, law, rw), a, b, X, Y);
        const auto err = marginal_error(plan, a, b);
        CHECK(err.row_l1 < 1e-12);
        CHECK(err.col_l1 < 1e-12);
    }
}

TEST_CASE("entropic averaged plan marginals match to solver tolerance", "[plans]") {
    Rng rng(43);
    const std::size_t n = 4, m = 2;
    const Vec a = random_simplex(n, rng), b = random_simplex(n, rng);
    const PointCloud X = random_cloud(n, 2, rng), Y = random_cloud(n, 2, rng);
    const LiftedPlan plan = averaged_plan(
        plan_spec(m, Law::WithoutReplacement, Reweight::Normalized, Kernel::Entropic), a, b, X, Y);
    const auto err = marginal_error(plan, a, b);
    CHECK(err.row_l1 < 1e-8);
    CHECK(err.col_l1 < 1e-8);
}

TEST_CASE("uniform reweighting under the subset law caps row sums at 1/m", "[plans]") {
    const Vec a = {0.6, 0.2, 0.2};
    const PointCloud X = grid_1d(3);
    const LiftedPlan plan =
        averaged_plan(plan_spec(2, Law::WithoutReplacement, Reweight::Uniform), a, a, X, X);
    const Vec rows = plan.row_sums();
    for (double r : rows) CHECK(r <= 0.5 + 1e-12);
    CHECK(std::abs(rows[0] - a[0]) > 0.05);  // not a transport plan for this a
}

TEST_CASE("averaged plan cost reproduces the complete loss and bounds exact ot", "[plans]") {
    Rng rng(7);
    for (int t = 0; t < 8; ++t) {
        const std::size_t n1 = 3 + rng.below(3), n2 = 3 + rng.below(3);
        const std::size_t m = 1 + rng.below(3);
        const Vec a = random_simplex(n1, rng), b = random_simplex(n2, rng);
        const PointCloud X = random_cloud(n1, 2, rng), Y = random_cloud(n2, 2, rng);
        const auto s = plan_spec(m, Law::WithReplacement, Reweight::Uniform);
        const LiftedPlan plan = averaged_plan(s, a, b, X, Y);
        const CostMatrix C = build_cost_matrix(X, Y, 2.0);
        double cost = 0.0;
        for (const auto& e : plan.entries) cost += e.mass * C.entries(e.i, e.j);
        const double loss = complete_loss(s, a, b, X, Y);
        CHECK(cost == Catch::Approx(loss).margin(1e-11 * (1.0 + std::abs(loss))));
        CHECK(loss >= solve_exact_ot(a, b, C).value - 1e-9);
    }
}

TEST_CASE("plans are refused for kernels without a canonical plan", "[plans]") {
    Rng rng(8);
    const Vec u = uniform_weights(4);
    const PointCloud X = random_cloud(4, 2, rng), Y = random_cloud(4, 2, rng);
    auto s = plan_spec(2, Law::WithReplacement, Reweight::Uniform, Kernel::SinkhornDiv);
    s.eps = 1.0;
    CHECK_THROWS_AS(averaged_plan(s, u, u, X, Y), ValidationError);
    CHECK_THROWS_AS(incomplete_plan(s, u, u, X, Y), ValidationError);
}

TEST_CASE("single full batch recovers the exact plan", "[plans]") {
    Rng rng(11);
    const std::size_t n = 6;
    const Vec u = uniform_weights(n);
    const PointCloud X = random_cloud(n, 2, rng), Y = random_cloud(n, 2, rng);
    auto s = plan_spec(n, Law::WithoutReplacement, Reweight::Uniform);
    s.k = 1;
    const LiftedPlan lifted = incomplete_plan(s, u, u, X, Y);
    const KernelResult exact = solve_exact_ot(u, u, build_cost_matrix(X, Y, 2.0));
    CHECK(max_abs_diff(to_dense(lifted), exact.plan.matrix) < 1e-9);
}

TEST_CASE("incomplete plan sparsity, mass, and ordering invariants", "[plans]") {
    Rng rng(12);
    const std::size_t n = 30, m = 3;
    const Vec a = random_simplex(n, rng), b = random_simplex(n, rng);
    const PointCloud X = random_cloud(n, 2, rng), Y = random_cloud(n, 2, rng);
    auto s = plan_spec(m, Law::WithoutReplacement, Reweight::Normalized);
    s.k = 50;
    const LiftedPlan plan = incomplete_plan(s, a, b, X, Y);
    CHECK(plan.entries.size() <= s.k * (2 * m - 1));
    CHECK(plan.total_mass() == Catch::Approx(1.0).margin(1e-9));
    CHECK(plan.batch_count == s.k);
    CHECK(std::is_sorted(plan.entries.begin(), plan.entries.end(),
                         [](const PlanEntry& l, const PlanEntry& r) {
                             return l.i != r.i ? l.i < r.i : l.j < r.j;
                         }));
    for (const auto& e : plan.entries) CHECK(e.mass > 0.0);

    // worker count must not change the merged plan at all
    const LiftedPlan plan4 = incomplete_plan(s, a, b, X, Y, 4);
    REQUIRE(plan4.entries.size() == plan.entries.size());
    for (std::size_t t = 0; t < plan.entries.size(); ++t) {
        CHECK(plan4.entries[t].i == plan.entries[t].i);
        CHECK(plan4.entries[t].j == plan.entries[t].j);
        CHECK(plan4.entries[t].mass == plan.entries[t].mass);
    }
}

TEST_CASE("incomplete plan marginals tighten as draws accumulate", "[plans]") {
    Rng rng(13);
    const std::size_t n = 40, m = 4;
    const Vec u = uniform_weights(n);
    const PointCloud X = random_cloud(n, 2, rng), Y = random_cloud(n, 2, rng);
    Vec errs;
    for (std::uint64_t k : {16u, 256u, 4096u}) {
        auto s = plan_spec(m, Law::WithoutReplacement, Reweight::Uniform);
        s.k = k;
        errs.push_back(marginal_error(incomplete_plan(s, u, u, X, Y), u, u).row_l1);
    }
    CHECK(errs[2] < errs[0]);  // two orders of magnitude more draws
}

TEST_CASE("1d closed form frozen values", "[plans]") {
    const Matrix P21 = mb_plan_1d(2, 1);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) CHECK(P21(i, j) == Catch::Approx(0.25).margin(1e-15));

    for (std::size_t n : {1u, 3u, 6u}) {
        const Matrix I = mb_plan_1d(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                CHECK(I(i, j) == Catch::Approx(i == j ? 1.0 / n : 0.0).margin(1e-15));
    }

    using boost::multiprecision::cpp_rational;
    CHECK(mb_plan_1d_entry(2, 1, 1, 1) == cpp_rational(1, 4));
    CHECK(mb_plan_1d_entry(5, 5, 3, 3) == cpp_rational(1, 5));
    CHECK(mb_plan_1d_entry(5, 5, 3, 4) == 0);

    CHECK_THROWS_AS(mb_plan_1d(70, 3), ValidationError);
    CHECK_THROWS_AS(mb_plan_1d_entry(4, 2, 0, 1), ValidationError);  // 1-based indices
    CHECK_THROWS_AS(mb_plan_1d_entry(4, 2, 1, 5), ValidationError);
}

TEST_CASE("1d closed form symmetry and exact rational marginals", "[plans]") {
    using boost::multiprecision::cpp_rational;
    for (std::size_t n = 1; n <= 9; ++n)
        for (std::size_t m = 1; m <= n; ++m) {
            for (std::size_t j = 1; j <= n; ++j) {
                CHECK(mb_plan_1d_row_sum(n, m, j) == cpp_rational(1, n));
                for (std::size_t k = j; k <= n; ++k)
                    CHECK(mb_plan_1d_entry(n, m, j, k) == mb_plan_1d_entry(n, m, k, j));
            }
        }
}

TEST_CASE("1d closed form matches enumeration on sorted supports", "[plans]") {
    // full n <= 8 sweep lives in the acceptance suite; spot-check here
    for (auto [n, m] : {std::pair<std::size_t, std::size_t>{5, 2},
                        std::pair<std::size_t, std::size_t>{6, 4},
                        std::pair<std::size_t, std::size_t>{7, 7}}) {
        const PointCloud X = grid_1d(n);
        const Vec u = uniform_weights(n);
        const LiftedPlan lifted =
            averaged_plan(plan_spec(m, Law::WithoutReplacement, Reweight::Uniform), u, u, X, X);
        CHECK(max_abs_diff(to_dense(lifted), mb_plan_1d(n, m)) < 1e-12);
    }
}

TEST_CASE("1d closed form densifies as the batch size grows", "[plans]") {
    const std::size_t n = 10;
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (std::size_t m = 1; m <= n; ++m) {
        const Matrix P = mb_plan_1d(n, m);
        std::size_t nnz = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) nnz += P(i, j) > 1e-15;
        CHECK(nnz <= prev);
        prev = nnz;
    }
}

TEST_CASE("1d with-replacement enumerator matches the generic machinery", "[plans]") {
    for (auto [n, m] : {std::pair<std::size_t, std::size_t>{4, 2},
                        std::pair<std::size_t, std::size_t>{5, 3},
                        std::pair<std::size_t, std::size_t>{6, 2}}) {
        const PointCloud X = grid_1d(n);
        const Vec u = uniform_weights(n);
        const LiftedPlan lifted =
            averaged_plan(plan_spec(m, Law::WithReplacement, Reweight::Uniform), u, u, X, X);
        const Matrix M = mb_plan_1d_with_replacement(n, m);
        CHECK(max_abs_diff(to_dense(lifted), M) < 1e-12);
        const Vec rows = M.row_sums();
        for (double r : rows) CHECK(r == Catch::Approx(1.0 / n).margin(1e-12));
    }
}
