#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace mtuq {

// Splitmix64 finalizer. All randomness in the framework is derived from it so
// that results are reproducible across platforms and thread counts
// (std::random distributions are implementation-defined, so we avoid them).
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Hash-combine a seed with a path of integers. Used to derive independent
// substreams: derive_key(seed, {epoch, sample_index}) etc. Keys derived with
// different paths are statistically independent for our purposes.
inline uint64_t derive_key(uint64_t seed, std::initializer_list<uint64_t> path) {
    uint64_t k = mix64(seed ^ 0x5851f42d4c957f2dULL);
    for (uint64_t p : path) k = mix64(k ^ mix64(p + 0x9e3779b97f4a7c15ULL));
    return k;
}

// Stateless per-index uniform in [0,1). Order-independent, safe to evaluate
// from any thread; this is what dropout masks are built from.
inline float hash_uniform(uint64_t key, uint64_t index) {
    return float(mix64(key ^ mix64(index)) >> 40) * (1.0f / 16777216.0f);
}

// Small sequential stream for weight init and data generation.
struct RngStream {
    uint64_t state = 0;

    explicit RngStream(uint64_t key = 0) : state(key) {}

    static RngStream derive(uint64_t seed, std::initializer_list<uint64_t> path) {
        return RngStream(derive_key(seed, path));
    }

    uint64_t next_u64() {
        state += 0x9e3779b97f4a7c15ULL;
        return mix64(state);
    }

    // [0,1)
    double uniform() { return double(next_u64() >> 11) * (1.0 / 9007199254740992.0); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n)
    int uniform_int(int n) { return int(next_u64() % uint64_t(n)); }

    // Box-Muller; explicit formula keeps it portable and reproducible.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    float normalf(float stddev) { return float(normal()) * stddev; }
};

} // namespace mtuq
