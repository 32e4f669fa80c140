#include "midgen/trainer.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "midgen/interpolant.hpp"

namespace midgen {

namespace {

// Chunk width for batch gradient fan-out. Results merge in chunk order, so
// the value changes the arithmetic; treat it as part of the format.
constexpr int64_t kChunk = 32;

}  // namespace

// ----------------------------------------------------------------- config --

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::midpoint_only: return "midpoint_only";
        case Variant::naive_unflipped: return "naive_unflipped";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    if (name == "full") return Variant::full;
    if (name == "midpoint_only") return Variant::midpoint_only;
    if (name == "naive_unflipped") return Variant::naive_unflipped;
    throw std::invalid_argument("unknown variant '" + name +
                                "', expected full, midpoint_only, or naive_unflipped");
}

void validate(const TrainConfig& cfg) {
    validate(cfg.dataset);
    if (cfg.batch < 2) throw std::invalid_argument("train config: batch must be at least 2");
    if (cfg.steps < 1) throw std::invalid_argument("train config: steps must be at least 1");
    if (cfg.critic_updates_per_generator < 0)
        throw std::invalid_argument("train config: critic update ratio must be nonnegative");
    if (cfg.warmup_steps < 0)
        throw std::invalid_argument("train config: warmup steps must be nonnegative");
    if (cfg.eval_every < 0)
        throw std::invalid_argument("train config: eval_every must be nonnegative");
    if (!(cfg.sigma_generator >= 0.0) || !std::isfinite(cfg.sigma_generator))
        throw std::invalid_argument("train config: sigma_generator must be finite and >= 0");
    if (!(cfg.sigma_critic >= 0.0) || !std::isfinite(cfg.sigma_critic))
        throw std::invalid_argument("train config: sigma_critic must be finite and >= 0");
    if (cfg.latent_dim < 1) throw std::invalid_argument("train config: latent_dim must be >= 1");
    for (int h : cfg.hidden)
        if (h < 1) throw std::invalid_argument("train config: hidden widths must be >= 1");
    if (!(cfg.adam.lr > 0.0)) throw std::invalid_argument("train config: lr must be positive");
    if (cfg.adam.beta1 < 0.0 || cfg.adam.beta1 >= 1.0)
        throw std::invalid_argument("train config: beta1 must lie in [0,1)");
    if (cfg.adam.beta2 < 0.0 || cfg.adam.beta2 >= 1.0)
        throw std::invalid_argument("train config: beta2 must lie in [0,1)");
    if (!(cfg.adam.eps_adam > 0.0))
        throw std::invalid_argument("train config: adam epsilon must be positive");
    if (cfg.adam.ema_decay < 0.0 || cfg.adam.ema_decay >= 1.0)
        throw std::invalid_argument("train config: ema decay must lie in [0,1)");
    if (cfg.warmup_steps > 0 && cfg.latent_dim != cfg.dataset.dim())
        throw std::invalid_argument(
            "train config: warmup initializes the generator as a denoiser, which needs "
            "latent_dim == dataset dim");
}

TrainHalt::TrainHalt(int64_t step_, double lc, double lg, const std::string& why)
    : std::runtime_error("training halted at step " + std::to_string(step_) + ": " + why +
                         " (loss_critic=" + std::to_string(lc) +
                         ", loss_generator=" + std::to_string(lg) + ")"),
      step(step_),
      loss_critic(lc),
      loss_generator(lg) {}

// ---------------------------------------------------------------- batches --

StepBatch draw_step_batch(TrainState& st, const TrainConfig& cfg) {
    StepBatch b;
    b.n = cfg.batch;
    b.latent_dim = cfg.latent_dim;
    b.dim = cfg.dataset.dim();
    b.z.resize(size_t(b.n) * size_t(b.latent_dim));
    st.rng_latent.fill_normal(b.z);
    sample(cfg.dataset, size_t(b.n), st.rng_data, b.x1);
    b.t.assign(size_t(b.n), 0.5);
    b.b.assign(size_t(b.n), 0.0);
    switch (cfg.variant) {
        case Variant::full:
            for (double& t : b.t) t = st.rng_time.uniform(0.0, 0.5);
            for (double& f : b.b) f = st.rng_flip.next_double() < 0.5 ? 0.0 : 1.0;
            break;
        case Variant::midpoint_only:
            // t stays 1/2; the flip is drawn but both branches coincide there
            for (double& f : b.b) f = st.rng_flip.next_double() < 0.5 ? 0.0 : 1.0;
            break;
        case Variant::naive_unflipped:
            for (double& t : b.t) t = st.rng_time.uniform(0.0, 1.0);
            break;
    }
    b.eps.resize(size_t(b.n) * size_t(b.dim));
    st.rng_noise.fill_normal(b.eps);
    return b;
}

namespace {

void check_batch(const MlpParams& gen, const MlpParams& critic, const StepBatch& b,
                 double sigma) {
    validate(gen);
    validate(critic);
    if (gen.time_conditioned)
        throw std::invalid_argument("train loss: generator must not be time conditioned");
    if (!critic.time_conditioned)
        throw std::invalid_argument("train loss: critic must be time conditioned");
    if (b.n < 1) throw std::invalid_argument("train loss: empty batch");
    if (gen.in_dim() != b.latent_dim || gen.out_dim() != b.dim ||
        critic.data_in_dim() != b.dim || critic.out_dim() != b.dim)
        throw std::invalid_argument("train loss: network dims do not match the batch");
    size_t n = size_t(b.n), d = size_t(b.dim), ld = size_t(b.latent_dim);
    if (b.z.size() != n * ld || b.x1.size() != n * d || b.eps.size() != n * d ||
        b.t.size() != n || b.b.size() != n)
        throw std::invalid_argument("train loss: batch buffer sizes are inconsistent");
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("train loss: sigma must be finite and >= 0");
}

// x_tilde node from already-placed x0/x1/eps leaves, mirroring the plain
// sampler's arithmetic exactly: (1-te) x0 + te x1, plus s eps when s > 0.
int path_node(Tape& tape, const StepBatch& b, int64_t i, int x0, int x1, double sigma) {
    double t_eff = b.b[size_t(i)] != 0.0 ? 1.0 - b.t[size_t(i)] : b.t[size_t(i)];
    double w0 = 1.0 - t_eff;
    int xt = tape.apply(Op::add, tape.apply(Op::scale, x0, -1, w0),
                        tape.apply(Op::scale, x1, -1, t_eff));
    InterpolantSpec spec{InterpKind::linear, sigma};
    double s = noise_scale(spec, t_eff);
    if (s > 0.0) {
        int eps = tape.leaf_external(Shape::vec(b.dim), b.eps.data() + size_t(i) * size_t(b.dim));
        xt = tape.apply(Op::add, xt, tape.apply(Op::scale, eps, -1, s));
    }
    return xt;
}

// Critic residual loss for one sample given precomputed x_tilde and delta
// rows (the training path: no generator nodes needed on the tape).
int critic_sample_loss(Tape& tape, const MlpParams& critic, const MlpLeafIds& cids,
                       const double* xt_row, const double* delta_row, double t, int dim) {
    int xt = tape.leaf_external(Shape::vec(dim), xt_row);
    int f = mlp_forward_on_tape(tape, critic, cids, xt, t);
    int delta = tape.leaf_external(Shape::vec(dim), delta_row);
    return tape.apply(Op::sq_norm, tape.apply(Op::sub, f, delta));
}

// Variational integrand for one sample, everything on the tape so the
// gradient reaches the generator through x_tilde and delta.
int generator_sample_loss(Tape& tape, const MlpParams& gen, const MlpLeafIds& gids,
                          const MlpParams& critic, const MlpLeafIds& cids, const StepBatch& b,
                          int64_t i, double sigma) {
    size_t d = size_t(b.dim), ld = size_t(b.latent_dim);
    int z = tape.leaf_external(Shape::vec(b.latent_dim), b.z.data() + size_t(i) * ld);
    int x0 = mlp_forward_on_tape(tape, gen, gids, z, 0.0);
    int x1 = tape.leaf_external(Shape::vec(b.dim), b.x1.data() + size_t(i) * d);
    int delta = tape.apply(Op::sub, x1, x0);
    int xt = path_node(tape, b, i, x0, x1, sigma);
    int f = mlp_forward_on_tape(tape, critic, cids, xt, b.t[size_t(i)]);
    int twice = tape.apply(Op::scale, tape.apply(Op::dot, f, delta), -1, 2.0);
    return tape.apply(Op::sub, twice, tape.apply(Op::sq_norm, f));
}

void add_grads(ParamGrads& acc, const ParamGrads& g) {
    for (size_t li = 0; li < acc.size(); ++li) {
        for (size_t k = 0; k < acc[li].w.data.size(); ++k) acc[li].w.data[k] += g[li].w.data[k];
        for (size_t k = 0; k < acc[li].b.data.size(); ++k) acc[li].b.data[k] += g[li].b.data[k];
    }
}

void scale_grads(ParamGrads& g, double s) {
    for (auto& l : g) {
        for (double& x : l.w.data) x *= s;
        for (double& x : l.b.data) x *= s;
    }
}

// Fans the batch out over fixed 32-sample chunks. chunk_fn(lo, hi, grads)
// builds one tape for samples [lo,hi), backpropagates the chunk's loss sum,
// accumulates the trained net's raw gradient sums, and returns the loss sum.
// Chunk results merge in ascending order and are scaled by 1/n at the end,
// so the outcome is independent of the thread count.
template <class ChunkFn>
double run_chunked(int64_t n, const MlpParams& trained, ParamGrads& out, bool parallel,
                   ChunkFn chunk_fn) {
    int64_t n_chunks = (n + kChunk - 1) / kChunk;
    std::vector<double> losses(size_t(n_chunks), 0.0);
    std::vector<ParamGrads> grads;
    grads.resize(size_t(n_chunks));
    bool failed = false;
    std::string msg;
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (int64_t c = 0; c < n_chunks; ++c) {
            try {
                grads[size_t(c)] = zero_grads(trained);
                losses[size_t(c)] =
                    chunk_fn(c * kChunk, std::min(n, (c + 1) * kChunk), grads[size_t(c)]);
            } catch (const std::exception& e) {
#pragma omp critical
                {
                    if (!failed) msg = e.what();
                    failed = true;
                }
            }
        }
    } else {
        for (int64_t c = 0; c < n_chunks; ++c) {
            grads[size_t(c)] = zero_grads(trained);
            losses[size_t(c)] =
                chunk_fn(c * kChunk, std::min(n, (c + 1) * kChunk), grads[size_t(c)]);
        }
    }
    if (failed) throw std::runtime_error(msg);
    double loss_sum = 0.0;
    for (int64_t c = 0; c < n_chunks; ++c) {
        loss_sum += losses[size_t(c)];
        add_grads(out, grads[size_t(c)]);
    }
    double inv = 1.0 / double(n);
    scale_grads(out, inv);
    return loss_sum * inv;
}

double critic_grads_impl(const MlpParams& gen, const MlpParams& critic, const StepBatch& b,
                         double sigma, ParamGrads& out, bool parallel) {
    check_batch(gen, critic, b, sigma);
    size_t n = size_t(b.n), d = size_t(b.dim);
    // inputs to the regression carry no critic gradient, so they are plain
    std::vector<double> x0(n * d), delta(n * d), xt(n * d);
    InterpolantSpec spec{InterpKind::linear, sigma};
    for (size_t i = 0; i < n; ++i) {
        std::span<const double> zi(b.z.data() + i * size_t(b.latent_dim), size_t(b.latent_dim));
        std::span<double> x0i(x0.data() + i * d, d);
        mlp_forward(gen, zi, 0.0, x0i);
        std::span<const double> x1i(b.x1.data() + i * d, d);
        for (size_t k = 0; k < d; ++k) delta[i * d + k] = x1i[k] - x0i[k];
        std::span<const double> ei(b.eps.data() + i * d, d);
        sample_flipped(spec, x0i, x1i, b.t[i], b.b[i] != 0.0 ? 1 : 0, ei,
                       std::span<double>(xt.data() + i * d, d));
    }
    return run_chunked(b.n, critic, out, parallel,
                       [&](int64_t lo, int64_t hi, ParamGrads& g) {
                           Tape tape;
                           MlpLeafIds cids = mlp_leaves(tape, critic);
                           int total = -1;
                           for (int64_t i = lo; i < hi; ++i) {
                               int li = critic_sample_loss(tape, critic, cids,
                                                           xt.data() + size_t(i) * d,
                                                           delta.data() + size_t(i) * d,
                                                           b.t[size_t(i)], b.dim);
                               total = total < 0 ? li : tape.apply(Op::add, total, li);
                           }
                           tape.backward(total);
                           accumulate_grads(g, tape, cids);
                           return tape.value(total)[0];
                       });
}

double generator_grads_impl(const MlpParams& gen, const MlpParams& critic, const StepBatch& b,
                            double sigma, ParamGrads& out, bool parallel) {
    check_batch(gen, critic, b, sigma);
    return run_chunked(b.n, gen, out, parallel, [&](int64_t lo, int64_t hi, ParamGrads& g) {
        Tape tape;
        MlpLeafIds gids = mlp_leaves(tape, gen);
        MlpLeafIds cids = mlp_leaves(tape, critic);
        int total = -1;
        for (int64_t i = lo; i < hi; ++i) {
            int li = generator_sample_loss(tape, gen, gids, critic, cids, b, i, sigma);
            total = total < 0 ? li : tape.apply(Op::add, total, li);
        }
        tape.backward(total);
        // critic leaves pick up gradients too; the update ignores them
        accumulate_grads(g, tape, gids);
        return tape.value(total)[0];
    });
}

}  // namespace

// ------------------------------------------------------------ loss graphs --

int critic_loss_node(Tape& tape, const MlpParams& gen, const MlpParams& critic,
                     const StepBatch& b, double sigma, MlpLeafIds* gen_ids,
                     MlpLeafIds* critic_ids) {
    check_batch(gen, critic, b, sigma);
    MlpLeafIds gids = mlp_leaves(tape, gen);
    MlpLeafIds cids = mlp_leaves(tape, critic);
    size_t d = size_t(b.dim), ld = size_t(b.latent_dim);
    int total = -1;
    for (int64_t i = 0; i < b.n; ++i) {
        int z = tape.leaf_external(Shape::vec(b.latent_dim), b.z.data() + size_t(i) * ld);
        int x0_raw = mlp_forward_on_tape(tape, gen, gids, z, 0.0);
        // value-detach: copy into a fresh leaf so the loss cannot reach the
        // generator (the local copy matters, leaf() may grow the arena the
        // source span points into)
        std::span<const double> x0v = tape.value(x0_raw);
        std::vector<double> x0copy(x0v.begin(), x0v.end());
        int x0 = tape.leaf(Shape::vec(b.dim), x0copy);
        int x1 = tape.leaf_external(Shape::vec(b.dim), b.x1.data() + size_t(i) * d);
        int delta = tape.apply(Op::sub, x1, x0);
        int xt = path_node(tape, b, i, x0, x1, sigma);
        int f = mlp_forward_on_tape(tape, critic, cids, xt, b.t[size_t(i)]);
        int li = tape.apply(Op::sq_norm, tape.apply(Op::sub, f, delta));
        total = total < 0 ? li : tape.apply(Op::add, total, li);
    }
    if (gen_ids) *gen_ids = gids;
    if (critic_ids) *critic_ids = cids;
    return tape.apply(Op::scale, total, -1, 1.0 / double(b.n));
}

int generator_loss_node(Tape& tape, const MlpParams& gen, const MlpParams& critic,
                        const StepBatch& b, double sigma, MlpLeafIds* gen_ids,
                        MlpLeafIds* critic_ids) {
    check_batch(gen, critic, b, sigma);
    MlpLeafIds gids = mlp_leaves(tape, gen);
    MlpLeafIds cids = mlp_leaves(tape, critic);
    int total = -1;
    for (int64_t i = 0; i < b.n; ++i) {
        int li = generator_sample_loss(tape, gen, gids, critic, cids, b, i, sigma);
        total = total < 0 ? li : tape.apply(Op::add, total, li);
    }
    if (gen_ids) *gen_ids = gids;
    if (critic_ids) *critic_ids = cids;
    return tape.apply(Op::scale, total, -1, 1.0 / double(b.n));
}

double critic_batch_grads(const MlpParams& gen, const MlpParams& critic, const StepBatch& b,
                          double sigma, ParamGrads& out) {
    return critic_grads_impl(gen, critic, b, sigma, out, true);
}

double critic_batch_grads_serial(const MlpParams& gen, const MlpParams& critic,
                                 const StepBatch& b, double sigma, ParamGrads& out) {
    return critic_grads_impl(gen, critic, b, sigma, out, false);
}

double generator_batch_grads(const MlpParams& gen, const MlpParams& critic, const StepBatch& b,
                             double sigma, ParamGrads& out) {
    return generator_grads_impl(gen, critic, b, sigma, out, true);
}

double generator_batch_grads_serial(const MlpParams& gen, const MlpParams& critic,
                                    const StepBatch& b, double sigma, ParamGrads& out) {
    return generator_grads_impl(gen, critic, b, sigma, out, false);
}

// ----------------------------------------------------------------- warmup --

double folded_lognormal_time(double mu, double sd, double tau_max, Pcg32& rng) {
    if (!(tau_max > 0.0))
        throw std::invalid_argument("folded_lognormal_time: tau_max must be positive");
    if (!(sd > 0.0)) throw std::invalid_argument("folded_lognormal_time: sd must be positive");
    double n = mu + sd * rng.normal();
    double log_max = std::log(tau_max);
    double s = n <= log_max ? n : 2.0 * log_max - n;
    return std::exp(s);
}

DenoiseBatch draw_denoise_batch(const DatasetSpec& dataset, int64_t n, Pcg32& data_rng,
                                Pcg32& tau_rng, Pcg32& eps_rng) {
    if (n < 1) throw std::invalid_argument("denoise batch: need at least one sample");
    DenoiseBatch b;
    b.n = n;
    b.dim = dataset.dim();
    sample(dataset, size_t(n), data_rng, b.clean);
    b.tau.resize(size_t(n));
    for (double& t : b.tau)
        t = folded_lognormal_time(kWarmupLogMean, kWarmupLogSd, kWarmupTauMax, tau_rng);
    b.noisy.resize(size_t(n) * size_t(b.dim));
    eps_rng.fill_normal(b.noisy);
    for (size_t i = 0; i < size_t(n); ++i)
        for (size_t k = 0; k < size_t(b.dim); ++k) {
            size_t at = i * size_t(b.dim) + k;
            b.noisy[at] = b.clean[at] + b.tau[i] * b.noisy[at];
        }
    return b;
}

namespace {

void check_denoise(const MlpParams& p, const DenoiseBatch& b) {
    validate(p);
    if (!p.time_conditioned)
        throw std::invalid_argument("denoise loss: the denoiser must be time conditioned");
    if (p.data_in_dim() != b.dim || p.out_dim() != b.dim)
        throw std::invalid_argument("denoise loss: network dims do not match the batch");
    if (b.n < 1) throw std::invalid_argument("denoise loss: empty batch");
    size_t need = size_t(b.n) * size_t(b.dim);
    if (b.noisy.size() != need || b.clean.size() != need || b.tau.size() != size_t(b.n))
        throw std::invalid_argument("denoise loss: batch buffer sizes are inconsistent");
}

}  // namespace

double denoise_batch_loss(const MlpParams& p, const DenoiseBatch& b) {
    check_denoise(p, b);
    size_t d = size_t(b.dim);
    std::vector<double> out(d);
    double sum = 0.0;
    for (size_t i = 0; i < size_t(b.n); ++i) {
        mlp_forward(p, std::span<const double>(b.noisy.data() + i * d, d), b.tau[i], out);
        for (size_t k = 0; k < d; ++k) {
            double r = out[k] - b.clean[i * d + k];
            sum += r * r;
        }
    }
    return sum / double(b.n);
}

double denoise_batch_grads(const MlpParams& p, const DenoiseBatch& b, ParamGrads& out) {
    check_denoise(p, b);
    size_t d = size_t(b.dim);
    return run_chunked(b.n, p, out, true, [&](int64_t lo, int64_t hi, ParamGrads& g) {
        Tape tape;
        MlpLeafIds ids = mlp_leaves(tape, p);
        int total = -1;
        for (int64_t i = lo; i < hi; ++i) {
            int noisy = tape.leaf_external(Shape::vec(b.dim), b.noisy.data() + size_t(i) * d);
            int f = mlp_forward_on_tape(tape, p, ids, noisy, b.tau[size_t(i)]);
            int clean = tape.leaf_external(Shape::vec(b.dim), b.clean.data() + size_t(i) * d);
            int li = tape.apply(Op::sq_norm, tape.apply(Op::sub, f, clean));
            total = total < 0 ? li : tape.apply(Op::add, total, li);
        }
        tape.backward(total);
        accumulate_grads(g, tape, ids);
        return tape.value(total)[0];
    });
}

MlpParams train_denoiser(const TrainConfig& cfg, int64_t steps) {
    validate(cfg);
    if (steps < 0) throw std::invalid_argument("train_denoiser: steps must be nonnegative");
    int d = cfg.dataset.dim();
    Pcg32 init_rng = make_stream(cfg.seed, Stream::warmup_init);
    MlpParams p = init_mlp(d, cfg.hidden, d, cfg.act, true, init_rng);
    if (steps == 0) return p;
    OptState opt = OptState::init(p);
    Pcg32 data_rng = make_stream(cfg.seed, Stream::warmup_data);
    Pcg32 tau_rng = make_stream(cfg.seed, Stream::warmup_tau);
    Pcg32 eps_rng = make_stream(cfg.seed, Stream::warmup_eps);
    for (int64_t s = 0; s < steps; ++s) {
        DenoiseBatch b = draw_denoise_batch(cfg.dataset, cfg.batch, data_rng, tau_rng, eps_rng);
        ParamGrads g = zero_grads(p);
        double loss = 0.0;
        try {
            loss = denoise_batch_grads(p, b, g);
            adam_step(p, opt, g, cfg.adam);
        } catch (const std::exception& e) {
            throw TrainHalt(s + 1, loss, loss, std::string("warmup: ") + e.what());
        }
        if (!std::isfinite(loss)) throw TrainHalt(s + 1, loss, loss, "warmup: non-finite loss");
    }
    return p;
}

MlpParams fold_time_input(const MlpParams& cond, double tau) {
    validate(cond);
    if (!cond.time_conditioned)
        throw std::invalid_argument("fold_time_input: the source net must be time conditioned");
    int d = cond.data_in_dim();
    std::array<double, kTimeFeatures> feat = time_features(tau);
    MlpParams out = cond;
    out.time_conditioned = false;
    const Tensor& w = cond.layers[0].w;  // [h, d + kTimeFeatures]
    int64_t h = w.shape.d[0];
    int64_t in = w.shape.d[1];
    Tensor nw = Tensor::zeros(Shape::mat(h, d));
    for (int64_t i = 0; i < h; ++i) {
        for (int64_t j = 0; j < d; ++j) nw.data[size_t(i * d + j)] = w.data[size_t(i * in + j)];
        double acc = 0.0;
        for (int k = 0; k < kTimeFeatures; ++k)
            acc += w.data[size_t(i * in + d + k)] * feat[size_t(k)];
        out.layers[0].b.data[size_t(i)] += acc;
    }
    out.layers[0].w = std::move(nw);
    return out;
}

// -------------------------------------------------------------- lifecycle --

TrainState init_train_state(const TrainConfig& cfg) {
    validate(cfg);
    TrainState st;
    int d = cfg.dataset.dim();
    Pcg32 gen_rng = make_stream(cfg.seed, Stream::generator_init);
    st.generator = init_mlp(cfg.latent_dim, cfg.hidden, d, cfg.act, false, gen_rng);
    Pcg32 critic_rng = make_stream(cfg.seed, Stream::critic_init);
    st.critic = init_mlp(d, cfg.hidden, d, cfg.act, true, critic_rng);
    if (cfg.warmup_steps > 0) {
        MlpParams denoiser = train_denoiser(cfg, cfg.warmup_steps);
        st.generator = fold_time_input(denoiser, kWarmupTauMax);
        st.critic = denoiser;  // same input layout by construction
    }
    st.gen_opt = OptState::init(st.generator);
    st.critic_opt = OptState::init(st.critic);
    st.rng_latent = make_stream(cfg.seed, Stream::prior);
    st.rng_data = make_stream(cfg.seed, Stream::data);
    st.rng_time = make_stream(cfg.seed, Stream::time);
    st.rng_flip = make_stream(cfg.seed, Stream::flip);
    st.rng_noise = make_stream(cfg.seed, Stream::eps);
    return st;
}

void train_step(TrainState& st, const TrainConfig& cfg) {
    auto started = std::chrono::steady_clock::now();
    int64_t step = st.step + 1;
    double lc = 0.0, lg = 0.0;
    try {
        for (int64_t k = 0; k < cfg.critic_updates_per_generator; ++k) {
            StepBatch b = draw_step_batch(st, cfg);
            ParamGrads g = zero_grads(st.critic);
            lc = critic_batch_grads(st.generator, st.critic, b, cfg.sigma_critic, g);
            adam_step(st.critic, st.critic_opt, g, cfg.adam);
        }
        StepBatch b = draw_step_batch(st, cfg);
        ParamGrads g = zero_grads(st.generator);
        lg = generator_batch_grads(st.generator, st.critic, b, cfg.sigma_generator, g);
        adam_step(st.generator, st.gen_opt, g, cfg.adam);
        ema_update(st.gen_opt, st.generator, cfg.adam.ema_decay);
        ema_update(st.critic_opt, st.critic, cfg.adam.ema_decay);
    } catch (const TrainHalt&) {
        throw;
    } catch (const std::exception& e) {
        throw TrainHalt(step, lc, lg, e.what());
    }
    if (!std::isfinite(lc) || !std::isfinite(lg))
        throw TrainHalt(step, lc, lg, "non-finite loss");
    double wall =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
    st.step = step;
    st.history.push_back(LossRow{step, lc, lg, wall});
}

void train(TrainState& st, const TrainConfig& cfg, const EvalHook& hook) {
    validate(cfg);
    while (st.step < cfg.steps) {
        train_step(st, cfg);
        if (hook && cfg.eval_every > 0 &&
            (st.step % cfg.eval_every == 0 || st.step == cfg.steps))
            hook(st);
    }
}

}  // namespace midgen
