#pragma once

#include <cmath>
#include <cstddef>

#include "mbot/common.hpp"
#include "mbot/rng.hpp"

namespace mbot {

constexpr double kTau = 6.283185307179586476925286766559;

inline PointCloud uniform_cube(std::size_t n, std::size_t d, Rng& rng) {
    PointCloud X(n, d);
    for (double& c : X.coords) c = rng.uniform01();
    return X;
}

inline PointCloud gaussian_cloud(std::size_t n, std::size_t d, Rng& rng) {
    PointCloud X(n, d);
    for (double& c : X.coords) c = rng.normal();
    return X;
}

// Two interleaved half-circles with Gaussian jitter.
inline PointCloud two_moons(std::size_t n, double noise, Rng& rng) {
    PointCloud X(n, 2);
    const std::size_t half = n / 2;
    for (std::size_t i = 0; i < n; ++i) {
        double* p = X.point(i);
        if (i < half) {
            const double t = 0.5 * kTau * static_cast<double>(i) / static_cast<double>(half);
            p[0] = std::cos(t);
            p[1] = std::sin(t);
        } else {
            const std::size_t j = i - half;
            const double t =
                0.5 * kTau * static_cast<double>(j) / static_cast<double>(n - half);
            p[0] = 1.0 - std::cos(t);
            p[1] = 0.5 - std::sin(t);
        }
        p[0] += noise * rng.normal();
        p[1] += noise * rng.normal();
    }
    return X;
}

inline PointCloud ring(std::size_t n, double cx, double cy, double radius, double noise,
                       Rng& rng) {
    PointCloud X(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = kTau * static_cast<double>(i) / static_cast<double>(n);
        double* p = X.point(i);
        p[0] = cx + radius * std::cos(t) + noise * rng.normal();
        p[1] = cy + radius * std::sin(t) + noise * rng.normal();
    }
    return X;
}

inline PointCloud spiral(std::size_t n, double turns, double noise, Rng& rng) {
    PointCloud X(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i + 1) / static_cast<double>(n);
        const double th = kTau * turns * t;
        double* p = X.point(i);
        p[0] = t * std::cos(th) + noise * rng.normal();
        p[1] = t * std::sin(th) + noise * rng.normal();
    }
    return X;
}

// n equally spaced points on the unit circle.
inline PointCloud circle_points(std::size_t n) {
    PointCloud X(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = kTau * static_cast<double>(i) / static_cast<double>(n);
        X.point(i)[0] = std::cos(t);
        X.point(i)[1] = std::sin(t);
    }
    return X;
}

inline PointCloud rotate2d(const PointCloud& X, double theta) {
    if (X.d != 2) throw ValidationError("rotate2d: expects 2D points");
    PointCloud out(X.n, 2);
    const double c = std::cos(theta), s = std::sin(theta);
    for (std::size_t i = 0; i < X.n; ++i) {
        const double* p = X.point(i);
        out.point(i)[0] = c * p[0] - s * p[1];
        out.point(i)[1] = s * p[0] + c * p[1];
    }
    return out;
}

inline PointCloud translate(const PointCloud& X, const Vec& t) {
    if (t.size() != X.d) throw ValidationError("translate: dimension mismatch");
    PointCloud out = X;
    for (std::size_t i = 0; i < X.n; ++i)
        for (std::size_t c = 0; c < X.d; ++c) out.point(i)[c] += t[c];
    return out;
}

}  // namespace mbot
