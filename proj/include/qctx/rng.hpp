/*
 * Seeded random streams.
 *
 * One RandomStream per logical worker; streams with the same (seed, stream)
 * pair produce the same sequence on every platform (mt19937_64 plus explicit
 * bit-to-double conversion, no library distributions).
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qctx {

class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                          static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream & 0xffffffffu),
                          static_cast<std::uint32_t>(stream >> 32)};
        engine_.seed(seq);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller; the second deviate is cached.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925287 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Index in [0, n) drawn from the given (not necessarily normalized) weights.
    // The caller guarantees a strictly positive total.
    template <typename Weights>
    int discrete(const Weights& w, int n) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += w[static_cast<std::size_t>(i)];
        double x = uniform() * total;
        for (int i = 0; i < n; ++i) {
            x -= w[static_cast<std::size_t>(i)];
            if (x < 0.0) return i;
        }
        return n - 1;
    }

    std::uint64_t raw() { return engine_(); }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace qctx
