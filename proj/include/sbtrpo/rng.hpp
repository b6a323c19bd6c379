#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sbtrpo {

/// Deterministic RNG used everywhere in the library. Normal variates are
/// produced by an explicit Box-Muller transform instead of
/// std::normal_distribution, so identical seeds give identical streams on
/// every platform.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; generates pairs, caches the spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Uniform integer in [0, n).
    int uniform_int(int n) { return static_cast<int>(gen_() % static_cast<uint64_t>(n)); }

    uint64_t next_u64() { return gen_(); }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// splitmix64 finalizer; combines seed components into fresh stream seeds.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) {
    return mix_seed(mix_seed(a, b), c);
}

} // namespace sbtrpo
