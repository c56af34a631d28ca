// Euler-scheme particle descent on minibatch losses.
#include "test_util.hpp"

#include <cmath>

using namespace mbot;
using testutil::random_cloud;

namespace {

FlowConfig base_cfg(std::size_t m, std::uint64_t k, double eta, std::size_t iters) {
    FlowConfig cfg;
    cfg.spec.kernel = Kernel::WassersteinPow;
    cfg.spec.p = 2.0;
    cfg.spec.m = m;
    cfg.spec.k = k;
    cfg.spec.law = Law::WithoutReplacement;
    cfg.spec.reweight = Reweight::Uniform;
    cfg.spec.seed = 99;
    cfg.eta = eta;
    cfg.iterations = iters;
    return cfg;
}

double second_moment(const PointCloud& X) {
    double cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < X.n; ++i) {
        cx += X.point(i)[0];
        cy += X.point(i)[1];
    }
    cx /= static_cast<double>(X.n);
    cy /= static_cast<double>(X.n);
    double s = 0.0;
    for (std::size_t i = 0; i < X.n; ++i) {
        const double dx = X.point(i)[0] - cx, dy = X.point(i)[1] - cy;
        s += dx * dx + dy * dy;
    }
    return s / static_cast<double>(X.n);
}

}  // namespace

TEST_CASE("flow is stationary on identical clouds at full batches", "[flow]") {
    Rng rng(1);
    const std::size_t n = 8;
    const PointCloud X = random_cloud(n, 2, rng);
    for (FlowLoss mode : {FlowLoss::Raw, FlowLoss::Debiased}) {
        FlowConfig cfg = base_cfg(n, 4, 0.1, 12);
        cfg.loss = mode;
        cfg.snapshot_stride = 4;
        const FlowResult res = gradient_flow(X, X, cfg);
        REQUIRE(res.snapshots.size() >= 2);
        for (const PointCloud& S : res.snapshots)
            for (std::size_t t = 0; t < X.coords.size(); ++t) CHECK(S.coords[t] == X.coords[t]);
        for (double l : res.loss_trace) CHECK(std::abs(l) < 1e-12);
    }
}

TEST_CASE("flow trajectories are seeded and worker invariant", "[flow]") {
    Rng rng(4);
    const PointCloud X0 = random_cloud(20, 2, rng);
    const PointCloud Y = random_cloud(25, 2, rng);
    FlowConfig cfg = base_cfg(5, 4, 0.05, 15);
    cfg.snapshot_stride = 5;

    const FlowResult r1 = gradient_flow(X0, Y, cfg);
    const FlowResult r2 = gradient_flow(X0, Y, cfg);
    REQUIRE(r1.snapshots.size() == r2.snapshots.size());
    for (std::size_t s = 0; s < r1.snapshots.size(); ++s)
        for (std::size_t t = 0; t < r1.snapshots[s].coords.size(); ++t)
            CHECK(r1.snapshots[s].coords[t] == r2.snapshots[s].coords[t]);
    REQUIRE(r1.loss_trace.size() == r2.loss_trace.size());
    for (std::size_t t = 0; t < r1.loss_trace.size(); ++t)
        CHECK(r1.loss_trace[t] == r2.loss_trace[t]);

    FlowConfig cfg8 = cfg;
    cfg8.workers = 8;
    const FlowResult r3 = gradient_flow(X0, Y, cfg8);
    for (std::size_t s = 0; s < r1.snapshots.size(); ++s)
        for (std::size_t t = 0; t < r1.snapshots[s].coords.size(); ++t)
            CHECK(r1.snapshots[s].coords[t] == r3.snapshots[s].coords[t]);

    FlowConfig cfg_other = cfg;
    cfg_other.spec.seed = 100;
    const FlowResult r4 = gradient_flow(X0, Y, cfg_other);
    CHECK(r4.loss_trace[0] != r1.loss_trace[0]);
}

TEST_CASE("flow trajectories are translation equivariant", "[flow]") {
    Rng rng(5);
    const PointCloud X0 = random_cloud(15, 2, rng);
    const PointCloud Y = random_cloud(15, 2, rng);
    const Vec t = {13.25, -7.5};

    FlowConfig cfg = base_cfg(5, 3, 0.04, 10);
    const FlowResult base = gradient_flow(X0, Y, cfg);
    const FlowResult moved = gradient_flow(translate(X0, t), translate(Y, t), cfg);
    REQUIRE(base.snapshots.size() == moved.snapshots.size());
    const PointCloud& bf = base.snapshots.back();
    const PointCloud& mf = moved.snapshots.back();
    for (std::size_t i = 0; i < bf.n; ++i)
        for (std::size_t c = 0; c < 2; ++c)
            CHECK(mf.point(i)[c] == Catch::Approx(bf.point(i)[c] + t[c]).margin(1e-9));
}

TEST_CASE("debiased flow matches the target spread where raw flow shrinks", "[flow]") {
    Rng rng(6);
    PointCloud X0 = random_cloud(60, 2, rng, 0.3);
    const PointCloud Y = ring(60, 0.0, 0.0, 2.0, 0.02, rng);
    const double target_m2 = second_moment(Y);

    FlowConfig raw = base_cfg(16, 2, 0.05, 400);
    raw.loss = FlowLoss::Raw;
    const double raw_m2 = second_moment(gradient_flow(X0, Y, raw).snapshots.back());

    FlowConfig deb = raw;
    deb.loss = FlowLoss::Debiased;
    const double deb_m2 = second_moment(gradient_flow(X0, Y, deb).snapshots.back());

    CHECK(raw_m2 < target_m2 * 0.95);  // raw minibatch loss shrinks the cloud
    CHECK(std::abs(deb_m2 - target_m2) < 0.05 * target_m2);
}

TEST_CASE("flow snapshots are taken at the configured stride", "[flow]") {
    Rng rng(7);
    const PointCloud X0 = random_cloud(10, 2, rng);
    const PointCloud Y = random_cloud(10, 2, rng);
    FlowConfig cfg = base_cfg(4, 2, 0.02, 10);
    cfg.snapshot_stride = 3;
    const FlowResult res = gradient_flow(X0, Y, cfg);
    CHECK(res.snapshot_steps == std::vector<std::size_t>{0, 3, 6, 9, 10});
    CHECK(res.steps_run == 10);
    CHECK(res.loss_trace.size() == 10);

    cfg.snapshot_stride = 0;
    const FlowResult only_ends = gradient_flow(X0, Y, cfg);
    CHECK(only_ends.snapshot_steps == std::vector<std::size_t>{0, 10});
}

TEST_CASE("flow aborts when the loss diverges", "[flow]") {
    Rng rng(8);
    const PointCloud X0 = random_cloud(12, 2, rng);
    const PointCloud Y = random_cloud(12, 2, rng);
    FlowConfig cfg = base_cfg(4, 2, 1e4, 200);  // absurd step size
    CHECK_THROWS_AS(gradient_flow(X0, Y, cfg), NumericalError);
}

TEST_CASE("flow validates configuration", "[flow]") {
    Rng rng(9);
    const PointCloud X0 = random_cloud(5, 2, rng);
    const PointCloud Y3 = random_cloud(5, 3, rng);
    FlowConfig cfg = base_cfg(2, 2, 0.05, 5);
    CHECK_THROWS_AS(gradient_flow(X0, Y3, cfg), ValidationError);
    cfg.eta = 0.0;
    CHECK_THROWS_AS(gradient_flow(X0, random_cloud(5, 2, rng), cfg), ValidationError);
}
