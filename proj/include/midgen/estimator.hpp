// Monte-Carlo divergence estimators built on Nadaraya-Watson regression.
//
// The conditional mean m_t(x) = E[x1-x0 | x_tilde_t = x] is fit with a
// Gaussian kernel on one half of the pair draws and the squared norm is
// averaged over queries built from the other half (split-sample, to avoid the
// upward bias of evaluating a regressor on its own fit points). Divergence
// values are the plain average over sampled times; standard errors come from
// independent replicates combined in fixed index order, so results are
// deterministic for a given (rng state, replicate count) at any thread count.
//
// Estimator kinds:
//   midpoint        t fixed at 1/2, no flip          (single-time functional)
//   naive_timeint   t ~ U[0,1], flip bit forced to 0 (known-invalid baseline)
//   flipped_timeint t ~ U[0,1/2], fair flip bit      (deterministic path)
//   generalized     same sampling as flipped_timeint; pass a noisy
//                   interpolant spec to exercise the stochastic path
//
// Default bandwidth (pass bandwidth <= 0): Silverman-style rule
//   h = sigma_hat * (4/(d+2))^(1/(d+4)) * n^(-1/(d+4)),
// sigma_hat = sqrt(mean per-axis variance of the fit observations at that t.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "midgen/interpolant.hpp"
#include "midgen/rng.hpp"
#include "midgen/tensor.hpp"

namespace midgen {

struct SampleSource {
    std::string label;
    int dim = 0;
    // appends n * dim doubles to the buffer
    std::function<void(size_t n, Pcg32& rng, std::vector<double>& out)> draw;
};

enum class DivKind { midpoint, naive_timeint, flipped_timeint, generalized };
const char* div_kind_name(DivKind k);
DivKind div_kind_from_name(const std::string& name);

struct DivergenceEstimate {
    double value = 0.0;
    double std_error = 0.0;  // serialized as "stderr"
    int64_t n_pairs = 0;
    int n_times = 0;
    std::string estimator;
};

// --------------------------- kernel regression ---------------------------

// Weighted mean of targets with Gaussian kernel weights exp(-|q-o|^2/(2h^2)).
// Weights are used unshifted; if every weight underflows to zero the query is
// rejected as "query outside data support".
Tensor kernel_conditional_mean(const std::vector<std::pair<Tensor, Tensor>>& pairs,
                               const Tensor& query, double bandwidth);

// Same estimate plus a pointwise standard error per output coordinate from
// the weighted residual variance.
std::pair<Tensor, Tensor> kernel_conditional_mean_with_se(
    const std::vector<std::pair<Tensor, Tensor>>& pairs, const Tensor& query, double bandwidth);

// Flat-buffer batch core. obs is n x d_obs, tgt is n x d_tgt, queries is
// n_q x d_obs, out is n_q x d_tgt. The parallel version fans out over queries;
// each query is computed by the same serial routine, so the two are
// bit-identical.
void kernel_regress_batch(const double* obs, const double* tgt, size_t n, int d_obs, int d_tgt,
                          const double* queries, size_t n_q, double bandwidth, double* out);
void kernel_regress_batch_serial(const double* obs, const double* tgt, size_t n, int d_obs,
                                 int d_tgt, const double* queries, size_t n_q, double bandwidth,
                                 double* out);

double silverman_bandwidth(const double* obs, size_t n, int d);

// --------------------------- divergence estimates ---------------------------

// Split-sample plug-in estimate. n_pairs is the total pair budget, divided
// evenly across replicates; each replicate needs at least 8 fit and 8 eval
// pairs (the documented stability floor), so n_pairs >= 16 * replicates.
// bandwidth <= 0 selects the Silverman default per (replicate, time).
DivergenceEstimate estimate_divergence(DivKind kind, const SampleSource& p0,
                                       const SampleSource& p1, const InterpolantSpec& spec,
                                       int64_t n_pairs, int n_times, double bandwidth, Pcg32& rng,
                                       int replicates = 8);

// --------------------------- variational value ---------------------------

// Vector field f(x, t) evaluated into out (length = source dim).
using FieldFn = std::function<void(std::span<const double> x, double t, std::span<double> out)>;

struct VariationalEstimate {
    double value = 0.0;
    double std_error = 0.0;
    int64_t n_pairs = 0;
    int n_times = 0;
};

// Monte-Carlo average of 2 <f(x_tilde,t), x1-x0> - |f(x_tilde,t)|^2 over pair
// draws and t ~ U[0,1/2], with the fair flip hidden in x_tilde. Replicate
// structure and stderr as in estimate_divergence.
VariationalEstimate variational_estimate(const FieldFn& f, const SampleSource& p0,
                                         const SampleSource& p1, const InterpolantSpec& spec,
                                         int64_t n_pairs, int n_times, Pcg32& rng,
                                         int replicates = 8);

double variational_value(const FieldFn& f, const SampleSource& p0, const SampleSource& p1,
                         const InterpolantSpec& spec, int64_t n_pairs, int n_times, Pcg32& rng);

// --------------------------- sources ---------------------------

SampleSource gaussian_source(std::vector<double> mean, double std_dev);

struct DatasetSpec;
SampleSource dataset_source(const DatasetSpec& spec);

// Pushes standard normal latents through a generator network. Copies the
// parameters so the source outlives the caller's network.
struct MlpParams;
SampleSource generator_source(const MlpParams& gen);

}  // namespace midgen
