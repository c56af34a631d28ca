#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "mbot/common.hpp"

namespace mbot {

// All randomness flows from one 64-bit master seed through named substreams:
// stream seed = mix(master, fnv1a(label), index). Substreams indexed by batch
// number make results independent of worker count and platform.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t derive_stream(std::uint64_t master, std::string_view label,
                                   std::uint64_t index) {
    return splitmix64(splitmix64(master ^ fnv1a(label)) + index);
}

// mt19937_64 is fully specified by the standard, so sequences are portable.
// Distribution helpers are hand-rolled because std:: distributions are
// implementation-defined.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    Rng(std::uint64_t master, std::string_view label, std::uint64_t index)
        : eng_(derive_stream(master, label, index)) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw ValidationError("Rng::below(0)");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    double normal() {
        // Box-Muller with cached spare.
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double th = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(th);
        have_spare_ = true;
        return r * std::cos(th);
    }

  private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Draw one index from the distribution given by cumulative weights
// (cdf.back() == total mass). Binary search on a single uniform.
inline std::size_t sample_cdf(const Vec& cdf, Rng& rng) {
    const double total = cdf.back();
    const double u = rng.uniform01() * total;
    std::size_t lo = 0, hi = cdf.size() - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (cdf[mid] <= u)
            lo = mid + 1;
        else
            hi = mid;
    }
    return lo;
}

inline Vec cumulative(const Vec& w) {
    Vec cdf(w.size());
    double run = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        run += w[i];
        cdf[i] = run;
    }
    return cdf;
}

}  // namespace mbot
