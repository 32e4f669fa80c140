// Closed-form conditional-expectation fields for isotropic Gaussian endpoints.
//
// With x0 ~ N(m0, s0^2 I), x1 ~ N(m1, s1^2 I) independent and the linear path
// x_t = (1-t) x0 + t x1 (+ noise), every conditional mean below follows from
// bivariate Gaussian regression per coordinate:
//
//   E[x1-x0 | x_t = x] = (m1-m0) + (t s1^2 - (1-t) s0^2) / V_t * (x - mu_t)
//   mu_t = (1-t) m0 + t m1,  V_t = (1-t)^2 s0^2 + t^2 s1^2 (+ sigma t (1-t))
//
// derived from Cov(x1-x0, x_t) = t s1^2 - (1-t) s0^2 and Var(x_t) = V_t.
// These fields are the ground truth the Monte-Carlo estimators are validated
// against; the estimator tests cross-check them with kernel regression.
#pragma once

#include <span>
#include <utility>
#include <vector>

#include "midgen/tensor.hpp"

namespace midgen {

struct GaussianEndpoints {
    int dim = 1;
    std::vector<double> m0, m1;
    double s0 = 1.0, s1 = 1.0;
};

void validate(const GaussianEndpoints& g);

// E[x1 - x0 | x_t = x] for the deterministic linear path. t in [0,1]; the
// endpoints evaluate the analytic limits (t=0 gives m1 - x, t=1 gives x - m0).
Tensor velocity_field(const GaussianEndpoints& g, double t, std::span<const double> x);

// E[x1 - x0 | x_tilde_t = x] where x_tilde hides the fair time flip and the
// path carries noise sqrt(sigma_strength t (1-t)). The flip bit is unobserved,
// so this is the density-weighted posterior mixture of the two branch means.
Tensor flipped_field(const GaussianEndpoints& g, double t, std::span<const double> x,
                     double sigma_strength);

// E || E[x1-x0 | x_{1/2}] ||^2 in closed form.
double midpoint_divergence_exact(const GaussianEndpoints& g);

// (e0, e1) = (E[x0 | x_t = x], E[x1 | x_t = x]); e1 - e0 equals the velocity.
std::pair<Tensor, Tensor> denoiser_pair(const GaussianEndpoints& g, double t,
                                        std::span<const double> x);

}  // namespace midgen
