#include "midgen/rng.hpp"

#include <cmath>

namespace midgen {

double Pcg32::normal() {
    // Box-Muller, cosine branch only. 1 - u1 lies in (0, 1] so the log is safe.
    double u1 = next_double();
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(2.0 * M_PI * u2);
}

void Pcg32::fill_normal(std::span<double> out) {
    for (double& x : out) x = normal();
}

void Pcg32::fill_uniform(std::span<double> out, double lo, double hi) {
    for (double& x : out) x = uniform(lo, hi);
}

Pcg32 make_stream(uint64_t seed, uint64_t stream_id, uint64_t salt) {
    uint64_t a = mix64(seed ^ 0x6d67656e5f726e67ULL);
    uint64_t b = mix64(a ^ mix64(stream_id));
    uint64_t c = mix64(b ^ mix64(salt));
    return Pcg32::seeded(b ^ mix64(c), c);
}

Pcg32 make_stream(uint64_t seed, Stream stream, uint64_t salt) {
    return make_stream(seed, uint64_t(stream), salt);
}

}  // namespace midgen
