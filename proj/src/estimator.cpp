#include "midgen/estimator.hpp"

#include <cmath>
#include <stdexcept>

#include "midgen/data.hpp"
#include "midgen/model.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace midgen {

const char* div_kind_name(DivKind k) {
    switch (k) {
        case DivKind::midpoint: return "midpoint";
        case DivKind::naive_timeint: return "naive_timeint";
        case DivKind::flipped_timeint: return "flipped_timeint";
        case DivKind::generalized: return "generalized";
    }
    return "?";
}

DivKind div_kind_from_name(const std::string& name) {
    if (name == "midpoint") return DivKind::midpoint;
    if (name == "naive_timeint") return DivKind::naive_timeint;
    if (name == "flipped_timeint") return DivKind::flipped_timeint;
    if (name == "generalized") return DivKind::generalized;
    throw std::invalid_argument("unknown divergence kind: " + name);
}

// --------------------------- kernel regression ---------------------------

namespace {

// One query against the whole fit set. Unshifted Gaussian weights: if all of
// them underflow the query is outside the data's numeric support.
void nw_single(const double* obs, const double* tgt, size_t n, int d_obs, int d_tgt,
               const double* q, double inv_two_h2, double* out) {
    for (int k = 0; k < d_tgt; ++k) out[k] = 0.0;
    double wsum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double* o = obs + i * size_t(d_obs);
        double d2 = 0.0;
        for (int k = 0; k < d_obs; ++k) {
            double d = q[k] - o[k];
            d2 += d * d;
        }
        double w = std::exp(-d2 * inv_two_h2);
        wsum += w;
        const double* y = tgt + i * size_t(d_tgt);
        for (int k = 0; k < d_tgt; ++k) out[k] += w * y[k];
    }
    if (!(wsum > 0.0))
        throw std::runtime_error("query outside data support (all kernel weights underflow)");
    for (int k = 0; k < d_tgt; ++k) out[k] /= wsum;
}

void check_bandwidth(double h) {
    if (!(h > 0.0))
        throw std::invalid_argument("kernel regression: bandwidth must be positive, got " +
                                    std::to_string(h));
}

}  // namespace

void kernel_regress_batch_serial(const double* obs, const double* tgt, size_t n, int d_obs,
                                 int d_tgt, const double* queries, size_t n_q, double bandwidth,
                                 double* out) {
    check_bandwidth(bandwidth);
    double inv_two_h2 = 1.0 / (2.0 * bandwidth * bandwidth);
    for (size_t i = 0; i < n_q; ++i)
        nw_single(obs, tgt, n, d_obs, d_tgt, queries + i * size_t(d_obs), inv_two_h2,
                  out + i * size_t(d_tgt));
}

void kernel_regress_batch(const double* obs, const double* tgt, size_t n, int d_obs, int d_tgt,
                          const double* queries, size_t n_q, double bandwidth, double* out) {
    check_bandwidth(bandwidth);
    double inv_two_h2 = 1.0 / (2.0 * bandwidth * bandwidth);
    // Queries are independent, so fanning out over them is bit-identical to
    // the serial loop. Exceptions cannot cross the parallel region; collect a
    // flag and rethrow after.
    bool outside = false;
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < int64_t(n_q); ++i) {
        try {
            nw_single(obs, tgt, n, d_obs, d_tgt, queries + size_t(i) * size_t(d_obs), inv_two_h2,
                      out + size_t(i) * size_t(d_tgt));
        } catch (const std::runtime_error&) {
#pragma omp critical
            outside = true;
        }
    }
    if (outside)
        throw std::runtime_error("query outside data support (all kernel weights underflow)");
}

double silverman_bandwidth(const double* obs, size_t n, int d) {
    if (n < 2) throw std::invalid_argument("silverman_bandwidth: need at least 2 observations");
    double var_sum = 0.0;
    for (int k = 0; k < d; ++k) {
        double mean = 0.0;
        for (size_t i = 0; i < n; ++i) mean += obs[i * size_t(d) + size_t(k)];
        mean /= double(n);
        double v = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double dev = obs[i * size_t(d) + size_t(k)] - mean;
            v += dev * dev;
        }
        var_sum += v / double(n);
    }
    double sigma = std::sqrt(var_sum / double(d));
    if (!(sigma > 0.0)) sigma = 1e-12;  // degenerate cloud; keep bandwidth positive
    double dd = double(d);
    return sigma * std::pow(4.0 / (dd + 2.0), 1.0 / (dd + 4.0)) *
           std::pow(double(n), -1.0 / (dd + 4.0));
}

Tensor kernel_conditional_mean(const std::vector<std::pair<Tensor, Tensor>>& pairs,
                               const Tensor& query, double bandwidth) {
    if (pairs.empty()) throw std::invalid_argument("kernel_conditional_mean: no pairs");
    check_bandwidth(bandwidth);
    int d_obs = int(pairs[0].first.numel());
    int d_tgt = int(pairs[0].second.numel());
    std::vector<double> obs, tgt;
    obs.reserve(pairs.size() * size_t(d_obs));
    tgt.reserve(pairs.size() * size_t(d_tgt));
    for (const auto& [o, y] : pairs) {
        if (int(o.numel()) != d_obs || int(y.numel()) != d_tgt)
            throw std::invalid_argument("kernel_conditional_mean: ragged pair shapes");
        obs.insert(obs.end(), o.data.begin(), o.data.end());
        tgt.insert(tgt.end(), y.data.begin(), y.data.end());
    }
    if (int(query.numel()) != d_obs)
        throw std::invalid_argument("kernel_conditional_mean: query dim mismatch");
    Tensor out = Tensor::zeros(Shape::vec(d_tgt));
    kernel_regress_batch_serial(obs.data(), tgt.data(), pairs.size(), d_obs, d_tgt,
                                query.data.data(), 1, bandwidth, out.data.data());
    return out;
}

std::pair<Tensor, Tensor> kernel_conditional_mean_with_se(
    const std::vector<std::pair<Tensor, Tensor>>& pairs, const Tensor& query, double bandwidth) {
    Tensor mean = kernel_conditional_mean(pairs, query, bandwidth);
    int d_tgt = int(mean.numel());
    int d_obs = int(query.numel());
    double inv_two_h2 = 1.0 / (2.0 * bandwidth * bandwidth);
    double wsum = 0.0;
    Tensor var = Tensor::zeros(Shape::vec(d_tgt));
    for (const auto& [o, y] : pairs) {
        double d2 = 0.0;
        for (int k = 0; k < d_obs; ++k) {
            double d = query.data[size_t(k)] - o.data[size_t(k)];
            d2 += d * d;
        }
        double w = std::exp(-d2 * inv_two_h2);
        wsum += w;
        for (int k = 0; k < d_tgt; ++k) {
            double r = y.data[size_t(k)] - mean.data[size_t(k)];
            var.data[size_t(k)] += w * w * r * r;
        }
    }
    Tensor se = Tensor::zeros(Shape::vec(d_tgt));
    for (int k = 0; k < d_tgt; ++k) se.data[size_t(k)] = std::sqrt(var.data[size_t(k)]) / wsum;
    return {mean, se};
}

// --------------------------- divergence estimates ---------------------------

namespace {

struct DrawPlan {
    bool sample_t = false;
    double t_hi = 0.5;    // upper end of the uniform time range
    bool sample_b = false;
};

DrawPlan plan_for(DivKind kind) {
    switch (kind) {
        case DivKind::midpoint: return {false, 0.5, false};
        case DivKind::naive_timeint: return {true, 1.0, false};
        case DivKind::flipped_timeint:
        case DivKind::generalized: return {true, 0.5, true};
    }
    return {};
}

// Fills rows of flipped observations for one time draw, consuming flip bits
// and noise draws in sample order.
void build_observations(const InterpolantSpec& spec, const DrawPlan& plan, double t,
                        const std::vector<double>& x0, const std::vector<double>& x1,
                        size_t begin, size_t count, int d, Pcg32& rb, Pcg32& re,
                        std::vector<double>& eps_buf, std::vector<double>& out) {
    bool noisy = spec.sigma_strength > 0.0;
    out.resize(count * size_t(d));
    for (size_t i = 0; i < count; ++i) {
        size_t row = (begin + i) * size_t(d);
        int b = 0;
        if (plan.sample_b) b = rb.next_double() < 0.5 ? 0 : 1;
        std::span<const double> eps;
        if (noisy) {
            eps_buf.resize(size_t(d));
            re.fill_normal(eps_buf);
            eps = eps_buf;
        }
        sample_flipped(spec, {x0.data() + row, size_t(d)}, {x1.data() + row, size_t(d)}, t, b,
                       eps, {out.data() + i * size_t(d), size_t(d)});
    }
}

void check_replicate_budget(int64_t n_pairs, int replicates) {
    if (replicates < 1) throw std::invalid_argument("estimator: replicates must be >= 1");
    if (n_pairs < 16 * int64_t(replicates))
        throw std::invalid_argument(
            "estimator: n_pairs too small for the split (need >= 16 per replicate, got " +
            std::to_string(n_pairs) + " for " + std::to_string(replicates) + " replicates)");
}

}  // namespace

DivergenceEstimate estimate_divergence(DivKind kind, const SampleSource& p0,
                                       const SampleSource& p1, const InterpolantSpec& spec,
                                       int64_t n_pairs, int n_times, double bandwidth, Pcg32& rng,
                                       int replicates) {
    if (p0.dim != p1.dim)
        throw std::invalid_argument("estimate_divergence: source dims differ (" + p0.label +
                                    " vs " + p1.label + ")");
    check_replicate_budget(n_pairs, replicates);
    DrawPlan plan = plan_for(kind);
    int n_t = plan.sample_t ? n_times : 1;
    if (n_t < 1) throw std::invalid_argument("estimate_divergence: n_times must be >= 1");

    int d = p0.dim;
    int64_t n_rep = n_pairs / replicates;
    uint64_t root = rng.next_u64();

    std::vector<double> rep_values(size_t(replicates), 0.0);
    std::vector<double> x0, x1, obs, queries, means, eps_buf;

    for (int r = 0; r < replicates; ++r) {
        Pcg32 rs0 = make_stream(root, Stream::estimator_p0, uint64_t(r));
        Pcg32 rs1 = make_stream(root, Stream::estimator_p1, uint64_t(r));
        Pcg32 rt = make_stream(root, Stream::estimator_time, uint64_t(r));
        Pcg32 rb = make_stream(root, Stream::estimator_flip, uint64_t(r));
        Pcg32 re = make_stream(root, Stream::estimator_eps, uint64_t(r));

        x0.clear();
        x1.clear();
        p0.draw(size_t(n_rep), rs0, x0);
        p1.draw(size_t(n_rep), rs1, x1);
        size_t n_fit = size_t(n_rep) / 2;
        size_t n_eval = size_t(n_rep) - n_fit;

        std::vector<double> delta(n_fit * size_t(d));
        for (size_t i = 0; i < n_fit * size_t(d); ++i) delta[i] = x1[i] - x0[i];

        double time_acc = 0.0;
        for (int j = 0; j < n_t; ++j) {
            double t = plan.sample_t ? rt.uniform(0.0, plan.t_hi) : 0.5;
            build_observations(spec, plan, t, x0, x1, 0, n_fit, d, rb, re, eps_buf, obs);
            double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(obs.data(), n_fit, d);
            build_observations(spec, plan, t, x0, x1, n_fit, n_eval, d, rb, re, eps_buf, queries);
            means.resize(n_eval * size_t(d));
            kernel_regress_batch(obs.data(), delta.data(), n_fit, d, d, queries.data(), n_eval, h,
                                 means.data());
            double acc = 0.0;
            for (size_t i = 0; i < n_eval; ++i) {
                double sq = 0.0;
                for (int k = 0; k < d; ++k) {
                    double m = means[i * size_t(d) + size_t(k)];
                    sq += m * m;
                }
                acc += sq;
            }
            time_acc += acc / double(n_eval);
        }
        rep_values[size_t(r)] = time_acc / double(n_t);
    }

    DivergenceEstimate est;
    est.estimator = div_kind_name(kind);
    est.n_pairs = n_rep * replicates;
    est.n_times = n_t;
    double mean = 0.0;
    for (double v : rep_values) mean += v;
    mean /= double(replicates);
    est.value = mean;
    if (replicates > 1) {
        double ss = 0.0;
        for (double v : rep_values) ss += (v - mean) * (v - mean);
        est.std_error = std::sqrt(ss / double(replicates - 1) / double(replicates));
    }
    return est;
}

// --------------------------- variational value ---------------------------

VariationalEstimate variational_estimate(const FieldFn& f, const SampleSource& p0,
                                         const SampleSource& p1, const InterpolantSpec& spec,
                                         int64_t n_pairs, int n_times, Pcg32& rng,
                                         int replicates) {
    if (p0.dim != p1.dim)
        throw std::invalid_argument("variational_estimate: source dims differ");
    check_replicate_budget(n_pairs, replicates);
    if (n_times < 1) throw std::invalid_argument("variational_estimate: n_times must be >= 1");

    int d = p0.dim;
    int64_t n_rep = n_pairs / replicates;
    uint64_t root = rng.next_u64();

    std::vector<double> rep_values(size_t(replicates), 0.0);
    std::vector<double> x0, x1;
    std::vector<double> x_tilde(size_t(d), 0.0);
    std::vector<double> fx(size_t(d), 0.0);
    std::vector<double> eps(size_t(d), 0.0);

    for (int r = 0; r < replicates; ++r) {
        Pcg32 rs0 = make_stream(root, Stream::estimator_p0, uint64_t(r));
        Pcg32 rs1 = make_stream(root, Stream::estimator_p1, uint64_t(r));
        Pcg32 rt = make_stream(root, Stream::estimator_time, uint64_t(r));
        Pcg32 rb = make_stream(root, Stream::estimator_flip, uint64_t(r));
        Pcg32 re = make_stream(root, Stream::estimator_eps, uint64_t(r));

        x0.clear();
        x1.clear();
        p0.draw(size_t(n_rep), rs0, x0);
        p1.draw(size_t(n_rep), rs1, x1);
        bool noisy = spec.sigma_strength > 0.0;

        double time_acc = 0.0;
        for (int j = 0; j < n_times; ++j) {
            double t = rt.uniform(0.0, 0.5);
            double acc = 0.0;
            for (int64_t i = 0; i < n_rep; ++i) {
                size_t row = size_t(i) * size_t(d);
                int b = rb.next_double() < 0.5 ? 0 : 1;
                if (noisy) re.fill_normal(eps);
                sample_flipped(spec, {x0.data() + row, size_t(d)}, {x1.data() + row, size_t(d)},
                               t, b, noisy ? std::span<const double>(eps)
                                           : std::span<const double>(),
                               x_tilde);
                f(x_tilde, t, fx);
                double integrand = 0.0;
                for (int k = 0; k < d; ++k) {
                    double fk = fx[size_t(k)];
                    if (!std::isfinite(fk))
                        throw std::runtime_error(
                            "variational_estimate: non-finite critic output at t=" +
                            std::to_string(t) + ", x[0]=" + std::to_string(x_tilde[0]));
                    double dk = x1[row + size_t(k)] - x0[row + size_t(k)];
                    integrand += 2.0 * fk * dk - fk * fk;
                }
                acc += integrand;
            }
            time_acc += acc / double(n_rep);
        }
        rep_values[size_t(r)] = time_acc / double(n_times);
    }

    VariationalEstimate est;
    est.n_pairs = n_rep * replicates;
    est.n_times = n_times;
    double mean = 0.0;
    for (double v : rep_values) mean += v;
    mean /= double(replicates);
    est.value = mean;
    if (replicates > 1) {
        double ss = 0.0;
        for (double v : rep_values) ss += (v - mean) * (v - mean);
        est.std_error = std::sqrt(ss / double(replicates - 1) / double(replicates));
    }
    return est;
}

double variational_value(const FieldFn& f, const SampleSource& p0, const SampleSource& p1,
                         const InterpolantSpec& spec, int64_t n_pairs, int n_times, Pcg32& rng) {
    return variational_estimate(f, p0, p1, spec, n_pairs, n_times, rng).value;
}

// --------------------------- sources ---------------------------

SampleSource gaussian_source(std::vector<double> mean, double std_dev) {
    if (mean.empty()) throw std::invalid_argument("gaussian_source: empty mean");
    if (!(std_dev > 0.0)) throw std::invalid_argument("gaussian_source: std must be positive");
    SampleSource s;
    s.dim = int(mean.size());
    s.label = "gaussian(d=" + std::to_string(mean.size()) + ")";
    s.draw = [mean = std::move(mean), std_dev](size_t n, Pcg32& rng, std::vector<double>& out) {
        out.reserve(out.size() + n * mean.size());
        for (size_t i = 0; i < n; ++i)
            for (double m : mean) out.push_back(m + std_dev * rng.normal());
    };
    return s;
}

SampleSource dataset_source(const DatasetSpec& spec) {
    validate(spec);
    SampleSource s;
    s.dim = spec.dim();
    s.label = kind_name(spec.kind);
    s.draw = [spec](size_t n, Pcg32& rng, std::vector<double>& out) {
        sample(spec, n, rng, out);
    };
    return s;
}

SampleSource generator_source(const MlpParams& gen) {
    validate(gen);
    if (gen.time_conditioned)
        throw std::invalid_argument("generator_source: generator must not be time conditioned");
    SampleSource s;
    s.dim = gen.out_dim();
    s.label = "generator(d=" + std::to_string(gen.out_dim()) + ")";
    s.draw = [gen](size_t n, Pcg32& rng, std::vector<double>& out) {
        size_t in = size_t(gen.in_dim()), od = size_t(gen.out_dim());
        std::vector<double> z(in), y(od);
        out.reserve(out.size() + n * od);
        for (size_t i = 0; i < n; ++i) {
            for (double& v : z) v = rng.normal();
            mlp_forward(gen, z, 0.0, y);
            out.insert(out.end(), y.begin(), y.end());
        }
    };
    return s;
}

}  // namespace midgen
