// Deterministic random draws. The standard <random> distributions are
// implementation-defined, so all shaping is done here on top of raw
// mt19937_64 output; identical seeds give identical streams on every
// platform.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cr {

class Rng {
  public:
    explicit Rng(std::uint64_t seed = 1) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Inclusive integer range.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(engine_() % span);
    }

    // Box-Muller; one value per call, nothing cached.
    double normal(double mean, double stddev) {
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        return mean + stddev * z;
    }

    // Normal truncated to positive values (resampled).
    double truncated_normal(double mean, double stddev) {
        for (int i = 0; i < 1024; ++i) {
            const double v = normal(mean, stddev);
            if (v > 0.0) return v;
        }
        return mean;  // degenerate parameters
    }

    // Lognormal parameterized by its arithmetic mean and coefficient of
    // variation, which is how the delay model expresses spreads.
    double lognormal_mean_cv(double mean, double cv) {
        if (cv <= 0.0) return mean;
        const double sigma2 = std::log(1.0 + cv * cv);
        const double mu = std::log(mean) - 0.5 * sigma2;
        return std::exp(normal(mu, std::sqrt(sigma2)));
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace cr
