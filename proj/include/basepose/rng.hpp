#pragma once

#include <cmath>
#include <cstdint>

namespace basepose {

// splitmix64 step; good enough statistics for scene sampling and init,
// and fully portable (no reliance on libstdc++ distribution internals).
inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Derive an independent stream for (seed, index) pairs. Used to give every
// dataset slot / episode / parameter tensor its own deterministic stream so
// results do not depend on evaluation order or worker count.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    uint64_t s = seed ^ (0x9e3779b97f4a7c15ull + (stream << 1));
    splitmix64(s);
    splitmix64(s);
    return s;
}

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x853c49e6748fea9bull) {}
    Rng(uint64_t seed, uint64_t stream) : Rng(mix_seed(seed, stream)) {}

    uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // Marsaglia polar method
        double u, v, s;
        do {
            u = uniform(-1.0, 1.0);
            v = uniform(-1.0, 1.0);
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace basepose
