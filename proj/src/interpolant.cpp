#include "midgen/interpolant.hpp"

#include <cmath>

namespace midgen {

namespace {

void check_dims(size_t a, size_t b, size_t out) {
    if (a != b || a != out)
        throw std::invalid_argument("interpolant: endpoint dims differ (" + std::to_string(a) +
                                    ", " + std::to_string(b) + ", out " + std::to_string(out) +
                                    ")");
}

}  // namespace

void interpolate(std::span<const double> x0, std::span<const double> x1, double t,
                 std::span<double> out) {
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("interpolate: t outside [0,1]");
    check_dims(x0.size(), x1.size(), out.size());
    double w0 = 1.0 - t;
    for (size_t i = 0; i < out.size(); ++i) out[i] = w0 * x0[i] + t * x1[i];
}

void sample_interpolant(const InterpolantSpec& spec, std::span<const double> x0,
                        std::span<const double> x1, double t, std::span<const double> eps,
                        std::span<double> out) {
    interpolate(x0, x1, t, out);
    double s = noise_scale(spec, t);
    if (s > 0.0) {
        check_dims(eps.size(), x0.size(), out.size());
        for (size_t i = 0; i < out.size(); ++i) out[i] += s * eps[i];
    }
}

void sample_flipped(const InterpolantSpec& spec, std::span<const double> x0,
                    std::span<const double> x1, double t, int b, std::span<const double> eps,
                    std::span<double> out) {
    if (b != 0 && b != 1) throw std::invalid_argument("sample_flipped: b must be 0 or 1");
    sample_interpolant(spec, x0, x1, b ? 1.0 - t : t, eps, out);
}

FlippedDraw sample_flipped(const InterpolantSpec& spec, std::span<const double> x0,
                           std::span<const double> x1, double t, int b,
                           std::span<const double> eps) {
    FlippedDraw d;
    d.t = t;
    d.b = b;
    d.x0.assign(x0.begin(), x0.end());
    d.x1.assign(x1.begin(), x1.end());
    d.eps.assign(eps.begin(), eps.end());
    d.x_tilde.resize(x0.size());
    sample_flipped(spec, x0, x1, t, b, eps, d.x_tilde);
    d.delta.resize(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) d.delta[i] = x1[i] - x0[i];
    return d;
}

double check_symmetry(const InterpolantSpec& spec, std::span<const double> a,
                      std::span<const double> b, int grid_steps) {
    if (grid_steps < 2) throw std::invalid_argument("check_symmetry: need at least 2 grid steps");
    std::vector<double> fwd(a.size()), rev(a.size());
    double worst = 0.0;
    for (int k = 0; k < grid_steps; ++k) {
        double t = double(k) / double(grid_steps - 1);
        interpolate(a, b, t, fwd);
        interpolate(b, a, 1.0 - t, rev);
        for (size_t i = 0; i < fwd.size(); ++i)
            worst = std::max(worst, std::fabs(fwd[i] - rev[i]));
        worst = std::max(worst, std::fabs(noise_scale(spec, t) - noise_scale(spec, 1.0 - t)));
    }
    return worst;
}

}  // namespace midgen
