// Deterministic PCG32 random streams.
//
// Every random consumer in the project (data draws, latent prior, time draws,
// flip bits, interpolant noise, weight init, ...) gets its own named stream
// derived from (run seed, stream id, salt), so adding or removing draws in one
// consumer never shifts the sequence seen by another. Reproduction notes:
//   - uniform doubles use 53 bits: (u64 >> 11) * 2^-53, u64 from two PCG32 outputs
//     (high word first), giving values in [0, 1)
//   - each normal draw consumes exactly two uniforms u1, u2 and returns the
//     Box-Muller cosine branch sqrt(-2 ln(1 - u1)) * cos(2 pi u2); the sine
//     branch is discarded so the consumption rate is fixed
#pragma once

#include <cstdint>
#include <span>

namespace midgen {

// splitmix64 finalizer, used to mix seeds and stream ids
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct Pcg32 {
    uint64_t state = 0x853c49e6748fea9bULL;
    uint64_t inc = 0xda3e39cb94b95bdbULL;

    static Pcg32 seeded(uint64_t seed, uint64_t seq) {
        Pcg32 g;
        g.state = 0u;
        g.inc = (seq << 1u) | 1u;
        g.next_u32();
        g.state += seed;
        g.next_u32();
        return g;
    }

    uint32_t next_u32() {
        uint64_t old = state;
        state = old * 6364136223846793005ULL + inc;
        uint32_t xorshifted = uint32_t(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = uint32_t(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    uint64_t next_u64() {
        uint64_t hi = next_u32();
        uint64_t lo = next_u32();
        return (hi << 32) | lo;
    }

    // [0, 1) with 53 random bits
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    double normal();
    void fill_normal(std::span<double> out);
    void fill_uniform(std::span<double> out, double lo, double hi);
};

// Stream ids for every random consumer. Values are part of the on-disk
// reproducibility contract; append only, never renumber.
enum class Stream : uint64_t {
    data = 1,
    prior = 2,
    time = 3,
    flip = 4,
    eps = 5,
    generator_init = 6,
    critic_init = 7,
    warmup_init = 8,
    warmup_data = 9,
    warmup_tau = 10,
    warmup_eps = 11,
    eval_data = 12,
    eval_prior = 13,
    metric_proj = 14,
    estimator_p0 = 15,
    estimator_p1 = 16,
    estimator_time = 17,
    estimator_flip = 18,
    estimator_eps = 19,
    estimator_source = 20,
};

Pcg32 make_stream(uint64_t seed, Stream stream, uint64_t salt = 0);
Pcg32 make_stream(uint64_t seed, uint64_t stream_id, uint64_t salt = 0);

}  // namespace midgen
