// Symmetric stochastic interpolants between endpoint samples, with the
// hidden time flip used to symmetrize time-integrated objectives.
//
// The path is x_t = (1-t) x0 + t x1 + sigma_t eps with
// sigma_t = sqrt(strength * t * (1-t)), so sigma_0 = sigma_1 = 0 and the
// construction satisfies interpolate(a, b, t) == interpolate(b, a, 1-t) and
// noise_scale(t) == noise_scale(1-t). A flipped draw hides a fair coin b:
// b = 0 keeps x_t, b = 1 swaps in x_{1-t}, reusing the same eps in both
// branches; the two branches coincide at t = 1/2.
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "midgen/rng.hpp"

namespace midgen {

enum class InterpKind { linear };

struct InterpolantSpec {
    InterpKind kind = InterpKind::linear;
    double sigma_strength = 0.0;  // >= 0; 0 gives the deterministic linear path
};

// Full record of one flipped observation.
struct FlippedDraw {
    std::vector<double> x0, x1, eps;
    std::vector<double> x_tilde;
    std::vector<double> delta;  // x1 - x0
    double t = 0.0;
    int b = 0;
};

inline double noise_scale(const InterpolantSpec& spec, double t) {
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("noise_scale: t outside [0,1]");
    if (spec.sigma_strength < 0.0)
        throw std::invalid_argument("noise_scale: negative sigma_strength");
    return std::sqrt(spec.sigma_strength * t * (1.0 - t));
}

// Deterministic part only: (1-t) x0 + t x1.
void interpolate(std::span<const double> x0, std::span<const double> x1, double t,
                 std::span<double> out);

// x_t = interpolate(x0, x1, t) + noise_scale(t) * eps.
void sample_interpolant(const InterpolantSpec& spec, std::span<const double> x0,
                        std::span<const double> x1, double t, std::span<const double> eps,
                        std::span<double> out);

// Branch-selected draw: b = 0 evaluates the path at t, b = 1 at 1-t, with the
// same eps in both branches. Fills out with the selected x_tilde.
void sample_flipped(const InterpolantSpec& spec, std::span<const double> x0,
                    std::span<const double> x1, double t, int b, std::span<const double> eps,
                    std::span<double> out);

FlippedDraw sample_flipped(const InterpolantSpec& spec, std::span<const double> x0,
                           std::span<const double> x1, double t, int b,
                           std::span<const double> eps);

// Max over a [0,1] grid of |I(a,b,t) - I(b,a,1-t)| and |sigma_t - sigma_{1-t}|.
double check_symmetry(const InterpolantSpec& spec, std::span<const double> a,
                      std::span<const double> b, int grid_steps);

}  // namespace midgen
