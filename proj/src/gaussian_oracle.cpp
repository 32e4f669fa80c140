#include "midgen/gaussian_oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace midgen {

namespace {

// Regression pieces for E[x1-x0 | path at time s = x] with noise variance
// sigma * s * (1-s) added on top of the endpoint mixing.
struct BranchCoeffs {
    double coeff;                // (s s1^2 - (1-s) s0^2) / V
    std::vector<double> mu;      // (1-s) m0 + s m1
    double var;                  // V = (1-s)^2 s0^2 + s^2 s1^2 + sigma s (1-s)
};

BranchCoeffs branch_at(const GaussianEndpoints& g, double s, double sigma_strength) {
    double v0 = g.s0 * g.s0, v1 = g.s1 * g.s1;
    double w0 = 1.0 - s;
    BranchCoeffs b;
    b.var = w0 * w0 * v0 + s * s * v1 + sigma_strength * (s * w0);
    if (!(b.var > 0.0))
        throw std::invalid_argument("gaussian oracle: degenerate path variance " +
                                    std::to_string(b.var));
    b.coeff = (s * v1 - w0 * v0) / b.var;
    b.mu.resize(size_t(g.dim));
    for (int i = 0; i < g.dim; ++i) b.mu[size_t(i)] = w0 * g.m0[size_t(i)] + s * g.m1[size_t(i)];
    return b;
}

void branch_mean(const GaussianEndpoints& g, const BranchCoeffs& b, std::span<const double> x,
                 std::span<double> out) {
    for (int i = 0; i < g.dim; ++i) {
        size_t k = size_t(i);
        out[k] = (g.m1[k] - g.m0[k]) + b.coeff * (x[k] - b.mu[k]);
    }
}

double log_density(const BranchCoeffs& b, std::span<const double> x, int dim) {
    double q = 0.0;
    for (int i = 0; i < dim; ++i) {
        double d = x[size_t(i)] - b.mu[size_t(i)];
        q += d * d;
    }
    return -0.5 * (double(dim) * std::log(b.var) + q / b.var);
}

}  // namespace

void validate(const GaussianEndpoints& g) {
    if (g.dim < 1) throw std::invalid_argument("gaussian endpoints: dim must be positive");
    if (int(g.m0.size()) != g.dim || int(g.m1.size()) != g.dim)
        throw std::invalid_argument("gaussian endpoints: mean length != dim");
    if (!(g.s0 > 0.0) || !(g.s1 > 0.0))
        throw std::invalid_argument("gaussian endpoints: standard deviations must be positive");
}

Tensor velocity_field(const GaussianEndpoints& g, double t, std::span<const double> x) {
    validate(g);
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("velocity_field: t outside [0,1]");
    if (int(x.size()) != g.dim) throw std::invalid_argument("velocity_field: x length != dim");
    Tensor out = Tensor::zeros(Shape::vec(g.dim));
    BranchCoeffs b = branch_at(g, t, 0.0);
    branch_mean(g, b, x, out.data);
    return out;
}

Tensor flipped_field(const GaussianEndpoints& g, double t, std::span<const double> x,
                     double sigma_strength) {
    validate(g);
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("flipped_field: t outside [0,1]");
    if (int(x.size()) != g.dim) throw std::invalid_argument("flipped_field: x length != dim");
    if (sigma_strength < 0.0)
        throw std::invalid_argument("flipped_field: negative sigma_strength");

    BranchCoeffs b0 = branch_at(g, t, sigma_strength);
    BranchCoeffs b1 = branch_at(g, 1.0 - t, sigma_strength);

    // Posterior over the hidden flip bit given x (fair prior cancels).
    double l0 = log_density(b0, x, g.dim);
    double l1 = log_density(b1, x, g.dim);
    double w0 = 1.0 / (1.0 + std::exp(l1 - l0));
    double w1 = 1.0 - w0;

    std::vector<double> u0(size_t(g.dim)), u1(size_t(g.dim));
    branch_mean(g, b0, x, u0);
    branch_mean(g, b1, x, u1);

    Tensor out = Tensor::zeros(Shape::vec(g.dim));
    for (int i = 0; i < g.dim; ++i)
        out.data[size_t(i)] = w0 * u0[size_t(i)] + w1 * u1[size_t(i)];
    return out;
}

double midpoint_divergence_exact(const GaussianEndpoints& g) {
    validate(g);
    double v0 = g.s0 * g.s0, v1 = g.s1 * g.s1;
    double var_mid = 0.25 * (v0 + v1);          // Var of each coordinate of x_{1/2}
    double coeff = 0.5 * (v1 - v0) / var_mid;   // regression coefficient at t = 1/2
    double mean_sq = 0.0;
    for (int i = 0; i < g.dim; ++i) {
        double d = g.m1[size_t(i)] - g.m0[size_t(i)];
        mean_sq += d * d;
    }
    // E||a + c (x - mu)||^2 with x - mu centered: cross term vanishes.
    return mean_sq + coeff * coeff * double(g.dim) * var_mid;
}

std::pair<Tensor, Tensor> denoiser_pair(const GaussianEndpoints& g, double t,
                                        std::span<const double> x) {
    validate(g);
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("denoiser_pair: t outside [0,1]");
    if (int(x.size()) != g.dim) throw std::invalid_argument("denoiser_pair: x length != dim");
    double v0 = g.s0 * g.s0, v1 = g.s1 * g.s1;
    double w0 = 1.0 - t;
    double var = w0 * w0 * v0 + t * t * v1;
    Tensor e0 = Tensor::zeros(Shape::vec(g.dim));
    Tensor e1 = Tensor::zeros(Shape::vec(g.dim));
    for (int i = 0; i < g.dim; ++i) {
        size_t k = size_t(i);
        double mu = w0 * g.m0[k] + t * g.m1[k];
        double dev = x[k] - mu;
        e0.data[k] = g.m0[k] + (w0 * v0 / var) * dev;
        e1.data[k] = g.m1[k] + (t * v1 / var) * dev;
    }
    return {e0, e1};
}

}  // namespace midgen
