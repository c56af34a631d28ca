// Loc conditions, marginal error, sparsity, and the experiment harnesses.
#include "test_util.hpp"

#include <algorithm>
#include <cmath>

using namespace mbot;
using testutil::random_cloud;
using testutil::random_simplex;

namespace {

// Exhaustive worst batch mean over all size-m index subsets.
double brute_loc_stat(const Vec& a, std::size_t m, LocKind kind) {
    const std::size_t n = a.size();
    std::vector<std::size_t> pick(m);
    for (std::size_t i = 0; i < m; ++i) pick[i] = i;
    double worst = -1.0;
    while (true) {
        double stat;
        if (kind == LocKind::Arithmetic) {
            stat = 0.0;
            for (std::size_t i : pick) stat += a[i];
            stat /= static_cast<double>(m);
        } else {
            stat = 1.0;
            for (std::size_t i : pick) stat *= a[i];
            stat = stat <= 0.0 ? 0.0 : std::pow(stat, 1.0 / static_cast<double>(m));
        }
        worst = std::max(worst, stat);
        std::size_t t = m;
        while (t > 0 && pick[t - 1] == n - m + t - 1) --t;
        if (t == 0) break;
        ++pick[t - 1];
        for (std::size_t u = t; u < m; ++u) pick[u] = pick[u - 1] + 1;
    }
    return worst;
}

}  // namespace

TEST_CASE("loc conditions frozen cases", "[diagnostics]") {
    const Vec u = uniform_weights(9);
    for (std::size_t m : {1u, 3u, 9u}) {
        const LocResult r = check_loc(u, {LocKind::Arithmetic, m, 1.0, 1.0});
        CHECK(r.holds);
        CHECK(r.stat == Catch::Approx(1.0 / 9.0).margin(1e-15));
    }

    Rng rng(17);
    for (int t = 0; t < 40; ++t) {
        const std::size_t n = 2 + rng.below(9);
        const std::size_t m = 1 + rng.below(n);
        const Vec a = random_simplex(n, rng);
        // any weight vector satisfies the gamma = 0, D = 1/m arithmetic bound
        CHECK(check_loc(a, {LocKind::Arithmetic, m, 0.0, 1.0 / static_cast<double>(m)}).holds);
    }
}

TEST_CASE("arithmetic loc implies geometric loc", "[diagnostics]") {
    Rng rng(18);
    int arithmetic_holds = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 3 + rng.below(8);
        const std::size_t m = 1 + rng.below(n);
        const Vec a = random_simplex(n, rng);
        const double gamma = rng.uniform01();
        const double D = 0.3 + 2.0 * rng.uniform01();
        const LocCondition base{LocKind::Arithmetic, m, gamma, D};
        const LocCondition geo{LocKind::Geometric, m, gamma, D};
        if (check_loc(a, base).holds) {
            ++arithmetic_holds;
            CHECK(check_loc(a, geo).holds);
        }
    }
    CHECK(arithmetic_holds > 10);  // the sweep actually exercised the implication
}

TEST_CASE("loc maximizing subset shortcut equals exhaustive search", "[diagnostics]") {
    Rng rng(19);
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = 2 + rng.below(9);  // n <= 10
        const std::size_t m = 1 + rng.below(n);
        const Vec a = random_simplex(n, rng);
        for (LocKind kind : {LocKind::Arithmetic, LocKind::Geometric}) {
            const LocResult r = check_loc(a, {kind, m, 0.5, 1.0});
            CHECK(r.stat == Catch::Approx(brute_loc_stat(a, m, kind)).margin(1e-12));
            REQUIRE(r.witness.size() == m);
            CHECK(std::is_sorted(r.witness.begin(), r.witness.end()));
        }
    }
}

TEST_CASE("loc validation and edge cases", "[diagnostics]") {
    const Vec u = uniform_weights(4);
    CHECK_NOTHROW(check_loc(u, {LocKind::Arithmetic, 2, 0.0, 1.0}));
    CHECK_NOTHROW(check_loc(u, {LocKind::Arithmetic, 2, 1.0, 1.0}));
    CHECK_THROWS_AS(check_loc(u, {LocKind::Arithmetic, 2, -0.1, 1.0}), ValidationError);
    CHECK_THROWS_AS(check_loc(u, {LocKind::Arithmetic, 2, 1.2, 1.0}), ValidationError);
    CHECK_THROWS_AS(check_loc(u, {LocKind::Arithmetic, 2, 0.5, 0.0}), ValidationError);
    CHECK_THROWS_AS(check_loc(u, {LocKind::Arithmetic, 5, 0.5, 1.0}), ValidationError);

    // zero entries wipe out the geometric mean
    const Vec z = {0.7, 0.3, 0.0, 0.0};
    const LocResult g = check_loc(z, {LocKind::Geometric, 3, 1.0, 0.1});
    CHECK(g.stat >= 0.0);
}

TEST_CASE("marginal error measures lifted plan defects", "[diagnostics]") {
    LiftedPlan plan;
    plan.n_rows = plan.n_cols = 2;
    plan.entries = {{0, 0, 0.5}, {1, 1, 0.25}};
    const Vec u = {0.5, 0.5};
    const auto rep = marginal_error(plan, u, u);
    CHECK(rep.row_l1 == Catch::Approx(0.25).margin(1e-15));
    CHECK(rep.col_l1 == Catch::Approx(0.25).margin(1e-15));
    CHECK(rep.max_row_dev == Catch::Approx(0.25).margin(1e-15));
    CHECK_THROWS_AS(marginal_error(plan, uniform_weights(3), u), ValidationError);
}

TEST_CASE("sparsity audit reports count, bound, and share", "[diagnostics]") {
    LiftedPlan plan;
    plan.n_rows = plan.n_cols = 10;
    plan.entries = {{0, 0, 0.5}, {1, 2, 0.25}, {3, 4, 0.25}};
    const auto rep = sparsity_audit(plan, 2, 5);
    CHECK(rep.nnz == 3);
    CHECK(rep.bound == 15);
    CHECK(rep.share == Catch::Approx(1.0 - 3.0 / 100.0).margin(1e-15));
    CHECK_THROWS_AS(sparsity_audit(plan, 0, 5), ValidationError);
}

TEST_CASE("loglog slope recovers exact power laws", "[diagnostics]") {
    const Vec xs = {10.0, 100.0, 1000.0, 10000.0};
    Vec ys(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = 3.0 * std::pow(xs[i], -0.5);
    CHECK(loglog_slope(xs, ys) == Catch::Approx(-0.5).margin(1e-12));
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = 0.25 * xs[i] * xs[i];
    CHECK(loglog_slope(xs, ys) == Catch::Approx(2.0).margin(1e-12));
    CHECK_THROWS_AS(loglog_slope({1.0, 2.0}, {1.0, 0.0}), ValidationError);
    CHECK_THROWS_AS(loglog_slope({1.0}, {1.0}), ValidationError);
}

TEST_CASE("marginal experiment concentrates and is deterministic", "[diagnostics]") {
    const auto run = [] {
        return marginal_experiment(50, {5}, {16, 64, 256}, 50, 0.05, Law::WithoutReplacement, 7);
    };
    const MarginalReport rep = run();
    REQUIRE(rep.cells.size() == 3);
    REQUIRE(rep.slopes.size() == 1);
    for (const auto& c : rep.cells) {
        CHECK(c.coverage >= 0.9);
        CHECK(c.bound == Catch::Approx(std::sqrt(2.0 * std::log(2.0 / 0.05) / c.k)).margin(1e-12));
        CHECK(c.mean_row_l1 > 0.0);
        CHECK(c.mean_col_l1 > 0.0);
    }
    CHECK(rep.cells[2].mean_row_l1 < rep.cells[0].mean_row_l1);
    CHECK(rep.slopes[0] > -0.75);
    CHECK(rep.slopes[0] < -0.25);

    const MarginalReport rep2 = run();
    for (std::size_t i = 0; i < rep.cells.size(); ++i) {
        CHECK(rep.cells[i].mean_row_l1 == rep2.cells[i].mean_row_l1);
        CHECK(rep.cells[i].coverage == rep2.cells[i].coverage);
    }
}

TEST_CASE("deviation experiment smoke run", "[diagnostics]") {
    MinibatchSpec s;
    s.kernel = Kernel::WassersteinPow;
    s.p = 2.0;
    s.m = 8;
    s.law = Law::WithoutReplacement;
    s.reweight = Reweight::Uniform;

    DeviationParams prm;
    prm.dist = DataDistribution::UniformCube;
    prm.d = 2;
    prm.n_grid = {32, 64};
    prm.k_grid = {8, 32};
    prm.repetitions = 10;
    prm.seed = 11;
    prm.k_ref_factor = 20;
    prm.ref_repeats = 4;

    const DeviationReport rep = deviation_experiment(s, prm);
    REQUIRE(rep.cells.size() == 4);
    CHECK(rep.bounded);
    for (const auto& c : rep.cells) {
        CHECK(c.mean_dev >= 0.0);
        CHECK(c.max_dev >= c.quantile_dev);
        CHECK(c.bound > 0.0);
        CHECK(c.coverage >= 0.0);
        CHECK(c.coverage <= 1.0);
        CHECK(c.cost_sup > 0.0);
        CHECK(c.reference > 0.0);
    }

    const DeviationReport rep2 = deviation_experiment(s, prm, 4);
    for (std::size_t i = 0; i < rep.cells.size(); ++i)
        CHECK(rep.cells[i].mean_dev == rep2.cells[i].mean_dev);

    prm.dist = DataDistribution::Gaussian;
    const DeviationReport grep = deviation_experiment(s, prm);
    CHECK_FALSE(grep.bounded);
    for (const auto& c : grep.cells) CHECK(std::isfinite(c.mean_dev));

    prm.n_grid.clear();
    CHECK_THROWS_AS(deviation_experiment(s, prm), ValidationError);
}

TEST_CASE("sample complexity experiment smoke run", "[diagnostics]") {
    MinibatchSpec s;
    s.kernel = Kernel::WassersteinPow;
    s.p = 2.0;
    s.m = 16;
    s.k = 64;
    s.law = Law::WithoutReplacement;
    s.reweight = Reweight::Uniform;
    s.seed = 5;
    const ComplexityReport rep = sample_complexity_experiment(s, {2}, {64, 128, 256}, 42);
    REQUIRE(rep.cells.size() == 3);
    REQUIRE(rep.slopes.size() == 1);
    for (const auto& c : rep.cells) {
        CHECK(std::isfinite(c.lambda));
        CHECK(c.k == 64);
    }
    const ComplexityReport rep2 = sample_complexity_experiment(s, {2}, {64, 128, 256}, 42, 4);
    CHECK(rep.cells[0].lambda == rep2.cells[0].lambda);

    s.k = 0;  // auto budget: one batch pair per sample
    const ComplexityReport rep3 = sample_complexity_experiment(s, {2}, {64, 128}, 42);
    CHECK(rep3.cells[0].k == 64);
    CHECK(rep3.cells[1].k == 128);
}

TEST_CASE("sparsity experiment obeys the batch bound at fixed budget", "[diagnostics]") {
    const auto cells = sparsity_experiment(100, {5, 10}, 100, 3);
    REQUIRE(cells.size() == 2);
    for (const auto& c : cells) {
        CHECK(c.nnz <= c.bound);
        CHECK(c.k == 100 / c.m);
        CHECK(c.share > 0.0);
    }
    CHECK(cells[1].share <= cells[0].share);  // larger batches densify the plan
}

TEST_CASE("positivity sweep shape and the W1 empirical floor", "[diagnostics]") {
    const auto rows = positivity_sweep(8, 2, 17, Law::WithoutReplacement);
    REQUIRE(rows.size() == 17);
    CHECK(rows.front().theta == 0.0);
    CHECK(rows.back().theta == Catch::Approx(3.14159265358979324).margin(1e-12));
    for (const auto& r : rows) {
        CHECK(std::isfinite(r.lambda_w1));
        CHECK(std::isfinite(r.lambda_w2));
        CHECK(r.lambda_w1 >= -1e-9);
    }
    // rotation by zero compares a cloud with itself
    CHECK(std::abs(rows.front().lambda_w1) < 1e-12);
    CHECK(std::abs(rows.front().lambda_w2) < 1e-12);
}

TEST_CASE("gw invariance experiment is flat across rotations", "[diagnostics]") {
    const GwInvarianceReport rep = gw_invariance_experiment(40, 5, 8, 5, 123);
    REQUIRE(rep.angles.size() == 5);
    REQUIRE(rep.values.size() == 5);
    CHECK(rep.rel_std < 0.02);
    CHECK(rep.translation_delta < 1e-9);
    for (double v : rep.values) CHECK(v > 0.0);
}
