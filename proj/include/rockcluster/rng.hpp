#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rockcluster/common.hpp"

namespace rockcluster {

// Seed mixing for derived substreams (per-restart, per-section, per-trial).
// std::mt19937_64 output is fully specified by the standard, and all
// distributions below are hand-rolled, so every seeded computation is
// bit-identical across platforms and compilers.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream ^ 0x632be59bd9b4e019ULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], inclusive, bias-free via rejection.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        require(lo <= hi, "uniform_int: empty range");
        const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1ULL;
        if (range == 0) return static_cast<std::int64_t>(next_u64());  // full 64-bit range
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        std::uint64_t draw;
        do {
            draw = next_u64();
        } while (draw >= limit);
        return lo + static_cast<std::int64_t>(draw % range);
    }

    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(n) - 1));
    }

    // Standard normal via Box-Muller; the spare value keeps draws cheap.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Skew-normal with shape alpha (alpha = 0 reduces to the standard normal).
    double skew_normal(double alpha) {
        const double delta = alpha / std::sqrt(1.0 + alpha * alpha);
        const double z0 = normal();
        const double z1 = normal();
        return delta * std::fabs(z0) + std::sqrt(1.0 - delta * delta) * z1;
    }

    // Index drawn proportionally to non-negative weights.
    std::size_t weighted_index(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        require(total > 0.0, "weighted_index: total weight must be positive");
        double target = uniform() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            target -= weights[i];
            if (target < 0.0) return i;
        }
        return weights.size() - 1;
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace rockcluster
