// Alternating minimax loop: the critic regresses its field onto the pair
// displacement, the generator maximizes the variational surrogate of the
// midpoint divergence, and both take Adam steps on fresh batches.
//
// Three objective variants:
//   full            t ~ U[0, 1/2], hidden Bernoulli branch flip
//   midpoint_only   t fixed at 1/2 (the flip bit is still drawn, but both
//                   branches coincide there)
//   naive_unflipped t ~ U[0, 1], no flip; the known-defective ablation
//
// Determinism contract: a run is a pure function of (config, seed). Batches
// are drawn serially from five named streams before any gradient work;
// gradients are computed per fixed 32-sample chunk, one tape per chunk, and
// merged in chunk order, so results are bit-identical at any OpenMP thread
// count. The *_serial twins run the same chunking without OpenMP and must
// agree bitwise with the parallel versions.
#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "midgen/autodiff.hpp"
#include "midgen/data.hpp"
#include "midgen/model.hpp"
#include "midgen/rng.hpp"

namespace midgen {

enum class Variant { full, midpoint_only, naive_unflipped };
Variant variant_from_name(const std::string& name);
const char* variant_name(Variant v);

struct TrainConfig {
    Variant variant = Variant::full;
    double sigma_generator = 0.0;  // interpolant noise for generator updates
    double sigma_critic = 0.01;    // interpolant noise for critic updates
    int64_t batch = 128;
    int64_t steps = 1000;
    int64_t critic_updates_per_generator = 1;
    uint64_t seed = 0;
    int64_t warmup_steps = 0;  // denoising warmup steps before the minimax loop
    DatasetSpec dataset;       // target distribution
    int latent_dim = 2;        // generator input dimension
    std::vector<int> hidden = {64, 64, 64};  // hidden widths, both networks
    Activation act = Activation::silu;
    AdamConfig adam;        // shared by critic, generator, and warmup
    int64_t eval_every = 0;  // eval hook cadence in steps, 0 disables
};

void validate(const TrainConfig& cfg);

struct LossRow {
    int64_t step = 0;
    double loss_critic = 0.0;  // last critic update of the step (0 if ratio is 0)
    double loss_generator = 0.0;
    double wall_ms = 0.0;  // excluded from the loss CSV so reruns match byte for byte
};

// Raised when a loss, an intermediate value, or a gradient stops being
// finite. Halting beats skipping: adversarial loops hide divergence
// otherwise.
struct TrainHalt : std::runtime_error {
    TrainHalt(int64_t step_, double lc, double lg, const std::string& why);
    int64_t step;
    double loss_critic;
    double loss_generator;
};

struct TrainState {
    MlpParams generator;
    OptState gen_opt;
    MlpParams critic;
    OptState critic_opt;
    int64_t step = 0;
    // named streams; each advances only through its own draws
    Pcg32 rng_latent, rng_data, rng_time, rng_flip, rng_noise;
    std::vector<LossRow> history;
};

// One update's inputs, row-major [n, dim] buffers drawn serially up front.
// Streams are consumed batch-at-a-time in the order latent, data, time,
// flip, noise. The time stream is untouched by midpoint_only and the flip
// stream by naive_unflipped; eps is always drawn so the noise stream layout
// does not depend on the sigma in play.
struct StepBatch {
    int64_t n = 0;
    int latent_dim = 0;
    int dim = 0;
    std::vector<double> z;    // [n, latent_dim]
    std::vector<double> x1;   // [n, dim]
    std::vector<double> t;    // [n]
    std::vector<double> b;    // [n], 0 or 1; branch 1 evaluates the path at 1-t
    std::vector<double> eps;  // [n, dim]
};

StepBatch draw_step_batch(TrainState& st, const TrainConfig& cfg);

// Whole-batch loss graphs on a single tape, exposed so the gradient routing
// can be inspected. Both return the scalar loss node.
//
// Critic loss: mean_i ||f(x_tilde_i, t_i) - (x1_i - x0_i)||^2 with
// x0 = G(z) computed on the tape and then value-detached, so the loss node
// never reaches a generator leaf. Generator loss: mean_i of
// 2 <f, x1 - x0> - ||f||^2 with gradient flowing to the generator through
// both x_tilde and the displacement; critic leaves are on the tape but their
// gradients are not applied by training.
int critic_loss_node(Tape& tape, const MlpParams& gen, const MlpParams& critic,
                     const StepBatch& batch, double sigma, MlpLeafIds* gen_ids = nullptr,
                     MlpLeafIds* critic_ids = nullptr);
int generator_loss_node(Tape& tape, const MlpParams& gen, const MlpParams& critic,
                        const StepBatch& batch, double sigma, MlpLeafIds* gen_ids = nullptr,
                        MlpLeafIds* critic_ids = nullptr);

// Chunked batch gradients used by training. Return the batch mean loss and
// add the mean-loss gradients for the updated network into `out` (which must
// be zeroed by the caller). For batches of at most 32 samples the returned
// loss equals the matching *_loss_node value bitwise.
double critic_batch_grads(const MlpParams& gen, const MlpParams& critic, const StepBatch& batch,
                          double sigma, ParamGrads& out);
double critic_batch_grads_serial(const MlpParams& gen, const MlpParams& critic,
                                 const StepBatch& batch, double sigma, ParamGrads& out);
double generator_batch_grads(const MlpParams& gen, const MlpParams& critic,
                             const StepBatch& batch, double sigma, ParamGrads& out);
double generator_batch_grads_serial(const MlpParams& gen, const MlpParams& critic,
                                    const StepBatch& batch, double sigma, ParamGrads& out);

// ---------------------------------------------------------------- warmup --

// Noise-level sampler: n ~ N(mu, sd^2) reflected about log(tau_max), then
// exponentiated. The result always lands in (0, tau_max].
double folded_lognormal_time(double mu, double sd, double tau_max, Pcg32& rng);

inline constexpr double kWarmupLogMean = -1.2;
inline constexpr double kWarmupLogSd = 1.2;
// Data here lives at unit scale, so the maximum warmup noise level is 1.
inline constexpr double kWarmupTauMax = 1.0;

struct DenoiseBatch {
    int64_t n = 0;
    int dim = 0;
    std::vector<double> noisy;  // [n, dim] = clean + tau * eps
    std::vector<double> clean;  // [n, dim]
    std::vector<double> tau;    // [n]
};

// Streams are consumed batch-at-a-time in the order data, tau, eps.
DenoiseBatch draw_denoise_batch(const DatasetSpec& dataset, int64_t n, Pcg32& data_rng,
                                Pcg32& tau_rng, Pcg32& eps_rng);

// Mean ||P(noisy, tau) - clean||^2 over the batch; plain forwards only.
double denoise_batch_loss(const MlpParams& p, const DenoiseBatch& batch);
// Same loss via tapes, chunked like the minimax gradients.
double denoise_batch_grads(const MlpParams& p, const DenoiseBatch& batch, ParamGrads& out);

// Trains a time-conditioned denoiser P on (x + tau * eps, tau) -> x pairs
// drawn from the warmup streams. steps = 0 returns the fresh init untouched.
MlpParams train_denoiser(const TrainConfig& cfg, int64_t steps);

// Folds the conditioning features at fixed tau into the first-layer bias,
// turning a conditioned net into a plain one: fold(P, tau)(x) = P(x, tau).
MlpParams fold_time_input(const MlpParams& cond, double tau);

// ------------------------------------------------------------- lifecycle --

// Initializes both networks (and runs the warmup when configured: the
// generator becomes the denoiser frozen at tau = kWarmupTauMax, the critic
// starts from the denoiser weights, which already have the right shape).
TrainState init_train_state(const TrainConfig& cfg);

// One minimax step: critic_updates_per_generator critic Adam steps on fresh
// batches, one generator Adam step on another fresh batch, EMA updates, one
// appended LossRow. Throws TrainHalt on any non-finite loss or gradient.
void train_step(TrainState& st, const TrainConfig& cfg);

using EvalHook = std::function<void(const TrainState& st)>;

// Runs steps until cfg.steps, invoking the hook every eval_every steps and
// at the final step. The hook sees a paused, fully consistent state.
void train(TrainState& st, const TrainConfig& cfg, const EvalHook& hook = {});

}  // namespace midgen
