// Drives a Gaussian blob onto a ring by plan-subgradient descent on the
// incomplete squared-euclidean minibatch loss.

#include <cstdio>

#include <mbot/mbot.hpp>

int main() {
    using namespace mbot;
    Rng rx(11, "demo-x", 0);
    Rng ry(11, "demo-y", 0);
    const PointCloud X0 = gaussian_cloud(60, 2, rx);
    const PointCloud target = ring(60, 0.0, 0.0, 2.0, 0.02, ry);

    FlowConfig cfg;
    cfg.spec.m = 10;
    cfg.spec.kernel = Kernel::WassersteinPow;
    cfg.spec.p = 2.0;
    cfg.spec.law = Law::WithoutReplacement;
    cfg.spec.k = 8;
    cfg.spec.seed = 99;
    cfg.eta = 0.05;
    cfg.iterations = 200;
    cfg.snapshot_stride = 50;

    const FlowResult res = gradient_flow(X0, target, cfg);
    std::printf("%8s  %12s\n", "step", "loss");
    for (std::size_t t = 0; t < res.loss_trace.size(); t += 20)
        std::printf("%8zu  %12.6f\n", t, res.loss_trace[t]);
    std::printf("%8zu  %12.6f  (final)\n", res.steps_run - 1, res.loss_trace.back());
    std::printf("snapshots kept: %zu\n", res.snapshots.size());
    return 0;
}
