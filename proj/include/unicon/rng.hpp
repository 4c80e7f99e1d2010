#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "unicon/errors.hpp"

namespace unicon {

// Counter-based deterministic RNG.  A generator is addressed by
// (seed, stream): draw k of stream s is a pure function of (seed, s, k), so
// any worker can be handed a stream id and produce the same values
// regardless of scheduling.  The core is the splitmix64 finalizer walked
// along a golden-ratio counter.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : state_(mix64(mix64(seed + 0x9e3779b97f4a7c15ull) ^
                       mix64(stream + 0xd1b54a32d192ed03ull))) {}

    // Derive a decorrelated child stream, e.g. per epoch or per anchor.
    Rng substream(std::uint64_t id) const { return Rng(state_, id + 1); }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix64(state_);
    }

    // Uniform on [0, 1) with 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Uniform integer in [0, n); rejection keeps it unbiased.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw domain_error("next_below(0)");
        const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller; the paired value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - next_double();  // (0, 1]
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Gamma(alpha, 1) by Marsaglia-Tsang squeeze; alpha < 1 handled by the
    // boost Gamma(alpha) = Gamma(alpha+1) * U^(1/alpha).
    double gamma(double alpha) {
        if (!(alpha > 0.0)) throw domain_error("gamma shape must be > 0");
        if (alpha < 1.0) {
            const double u = 1.0 - next_double();
            return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
        }
        const double d = alpha - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = 1.0 - next_double();
            const double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
            if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Symmetric Beta(g, g) as X/(X+Y) with X, Y ~ Gamma(g).
    double beta_symmetric(double g) {
        const double x = gamma(g);
        const double y = gamma(g);
        return x / (x + y);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[next_below(i)]);
        }
    }

private:
    static std::uint64_t mix64(std::uint64_t x) {
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ull;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebull;
        x ^= x >> 31;
        return x;
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace unicon
