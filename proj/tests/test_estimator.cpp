#include "doctest.h"
#include "midgen/data.hpp"
#include "midgen/estimator.hpp"
#include "midgen/gaussian_oracle.hpp"
#include "midgen/model.hpp"
#include "midgen/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace midgen;

namespace {

InterpolantSpec noiseless{InterpKind::linear, 0.0};

SampleSource std_normal_1d() { return gaussian_source({0.0}, 1.0); }

FieldFn oracle_flipped(const GaussianEndpoints& g, double sigma) {
    return [g, sigma](std::span<const double> x, double t, std::span<double> out) {
        Tensor f = flipped_field(g, t, x, sigma);
        for (size_t i = 0; i < out.size(); ++i) out[i] = f.data[i];
    };
}

}  // namespace

// ---------------------------------------------------------------------------
// kernel regression
// ---------------------------------------------------------------------------

TEST_CASE("single pair: query at the observation returns its target") {
    std::vector<std::pair<Tensor, Tensor>> pairs;
    pairs.push_back({Tensor::vec({1.0, 2.0}), Tensor::vec({5.0, -3.0})});
    Tensor m = kernel_conditional_mean(pairs, Tensor::vec({1.0, 2.0}), 0.7);
    CHECK(m[0] == 5.0);
    CHECK(m[1] == -3.0);
}

TEST_CASE("constant targets come back exactly for any query") {
    std::vector<std::pair<Tensor, Tensor>> pairs;
    Pcg32 rng = Pcg32::seeded(3, 3);
    for (int i = 0; i < 50; ++i) {
        Tensor o = Tensor::zeros(Shape::vec(2));
        rng.fill_uniform(o.data, -1.0, 1.0);
        pairs.push_back({o, Tensor::vec({4.25, -1.5})});
    }
    for (double qx : {-0.9, 0.0, 0.8}) {
        Tensor m = kernel_conditional_mean(pairs, Tensor::vec({qx, 0.1}), 0.4);
        CHECK(m[0] == doctest::Approx(4.25).epsilon(1e-12));
        CHECK(m[1] == doctest::Approx(-1.5).epsilon(1e-12));
    }
}

TEST_CASE("two-point case matches the hand-evaluated weighted mean") {
    std::vector<std::pair<Tensor, Tensor>> pairs;
    pairs.push_back({Tensor::vec({0.0}), Tensor::vec({0.0})});
    pairs.push_back({Tensor::vec({1.0}), Tensor::vec({1.0})});
    double h = 0.5;
    double q = 0.25;
    double w0 = std::exp(-(q - 0.0) * (q - 0.0) / (2 * h * h));
    double w1 = std::exp(-(q - 1.0) * (q - 1.0) / (2 * h * h));
    Tensor m = kernel_conditional_mean(pairs, Tensor::vec({q}), h);
    CHECK(m[0] == doctest::Approx(w1 / (w0 + w1)).epsilon(1e-14));
}

TEST_CASE("far-off query with narrow kernel reports no support") {
    std::vector<std::pair<Tensor, Tensor>> pairs;
    pairs.push_back({Tensor::vec({0.0}), Tensor::vec({1.0})});
    pairs.push_back({Tensor::vec({0.1}), Tensor::vec({2.0})});
    CHECK_THROWS_WITH_AS(kernel_conditional_mean(pairs, Tensor::vec({100.0}), 1.0),
                         doctest::Contains("query outside data support"), std::runtime_error);
}

TEST_CASE("kernel regression rejects bad inputs") {
    std::vector<std::pair<Tensor, Tensor>> pairs;
    CHECK_THROWS_AS(kernel_conditional_mean(pairs, Tensor::vec({0.0}), 1.0),
                    std::invalid_argument);
    pairs.push_back({Tensor::vec({0.0}), Tensor::vec({1.0})});
    CHECK_THROWS_AS(kernel_conditional_mean(pairs, Tensor::vec({0.0}), 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(kernel_conditional_mean(pairs, Tensor::vec({0.0, 1.0}), 1.0),
                    std::invalid_argument);
}

TEST_CASE("parallel and serial batch regressions are bit-identical") {
    Pcg32 rng = Pcg32::seeded(11, 13);
    const size_t n = 3000, n_q = 500;
    const int d = 2;
    std::vector<double> obs(n * d), tgt(n * d), q(n_q * d);
    rng.fill_uniform(obs, -2.0, 2.0);
    rng.fill_uniform(tgt, -1.0, 1.0);
    rng.fill_uniform(q, -1.5, 1.5);
    std::vector<double> out_par(n_q * d), out_ser(n_q * d);
    kernel_regress_batch(obs.data(), tgt.data(), n, d, d, q.data(), n_q, 0.3, out_par.data());
    kernel_regress_batch_serial(obs.data(), tgt.data(), n, d, d, q.data(), n_q, 0.3,
                                out_ser.data());
    CHECK(out_par == out_ser);
#ifdef _OPENMP
    int saved = omp_get_max_threads();
    omp_set_num_threads(4);
    std::vector<double> out_par4(n_q * d);
    kernel_regress_batch(obs.data(), tgt.data(), n, d, d, q.data(), n_q, 0.3, out_par4.data());
    omp_set_num_threads(saved);
    CHECK(out_par4 == out_ser);
#endif
}

TEST_CASE("silverman bandwidth matches its definition recomputed by hand") {
    Pcg32 rng = Pcg32::seeded(5, 5);
    const size_t n = 400;
    const int d = 2;
    std::vector<double> obs(n * d);
    rng.fill_normal(obs);
    for (size_t i = 0; i < n; ++i) obs[i * 2 + 1] *= 3.0;

    double var_sum = 0.0;
    for (int k = 0; k < d; ++k) {
        double mean = 0.0;
        for (size_t i = 0; i < n; ++i) mean += obs[i * 2 + size_t(k)];
        mean /= double(n);
        double v = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double dev = obs[i * 2 + size_t(k)] - mean;
            v += dev * dev;
        }
        var_sum += v / double(n);
    }
    double sigma = std::sqrt(var_sum / d);
    double want = sigma * std::pow(4.0 / (d + 2.0), 1.0 / (d + 4.0)) *
                  std::pow(double(n), -1.0 / (d + 4.0));
    CHECK(silverman_bandwidth(obs.data(), n, d) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("pointwise standard error: zero for exact fits, honest for noise") {
    std::vector<std::pair<Tensor, Tensor>> flat;
    for (int i = 0; i < 30; ++i)
        flat.push_back({Tensor::vec({0.1 * i}), Tensor::vec({2.0})});
    auto [m0, s0] = kernel_conditional_mean_with_se(flat, Tensor::vec({1.5}), 0.5);
    CHECK(m0[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(s0[0] == doctest::Approx(0.0).epsilon(1e-12));

    // targets = x + noise; the estimate at a bulk query should sit within
    // 5 standard errors of the true conditional mean
    Pcg32 rng = Pcg32::seeded(7, 2);
    std::vector<std::pair<Tensor, Tensor>> noisy;
    for (int i = 0; i < 4000; ++i) {
        double x = rng.uniform(-2.0, 2.0);
        noisy.push_back({Tensor::vec({x}), Tensor::vec({x + 0.3 * rng.normal()})});
    }
    auto [m1, s1] = kernel_conditional_mean_with_se(noisy, Tensor::vec({0.5}), 0.1);
    CHECK(s1[0] > 0.0);
    CHECK(std::abs(m1[0] - 0.5) < 5.0 * s1[0] + 0.01);
}

TEST_CASE("million-pair regression at t=1/4 recovers the closed-form field value") {
    // endpoints N(0,1) and N(0,1); the conditional-mean field at t=1/4 is
    // -0.8 x, so the query x=1 wants -0.8 (cross-checked against the oracle)
    GaussianEndpoints g{1, {0.0}, {0.0}, 1.0, 1.0};
    double t = 0.25;
    Pcg32 rng = Pcg32::seeded(90210, 4);
    const int n = 1000000;
    std::vector<std::pair<Tensor, Tensor>> pairs;
    pairs.reserve(n);
    for (int i = 0; i < n; ++i) {
        double x0 = rng.normal();
        double x1 = rng.normal();
        pairs.push_back({Tensor::vec({(1 - t) * x0 + t * x1}), Tensor::vec({x1 - x0})});
    }
    // undersmoothed bandwidth keeps the smoothing bias well under the noise
    auto [m, se] = kernel_conditional_mean_with_se(pairs, Tensor::vec({1.0}), 0.05);
    double want = velocity_field(g, t, std::vector<double>{1.0})[0];
    CHECK(want == doctest::Approx(-0.8).epsilon(1e-14));
    CHECK(std::abs(m[0] - want) <= 3.0 * se[0]);
}

// ---------------------------------------------------------------------------
// divergence estimates against the Gaussian oracle
// ---------------------------------------------------------------------------

TEST_CASE("midpoint estimate of identical standard normals is below 0.01") {
    Pcg32 rng = Pcg32::seeded(101, 1);
    auto est = estimate_divergence(DivKind::midpoint, std_normal_1d(), std_normal_1d(),
                                   noiseless, 100000, 1, -1.0, rng);
    CHECK(est.estimator == "midpoint");
    CHECK(est.n_times == 1);
    CHECK(est.value >= 0.0);
    CHECK(est.value <= 0.01);
}

TEST_CASE("midpoint estimate of N(0,1) vs N(2,1) lands on 4 within 0.2") {
    Pcg32 rng = Pcg32::seeded(102, 1);
    auto est = estimate_divergence(DivKind::midpoint, std_normal_1d(),
                                   gaussian_source({2.0}, 1.0), noiseless, 100000, 1, -1.0, rng);
    GaussianEndpoints g{1, {0.0}, {2.0}, 1.0, 1.0};
    CHECK(midpoint_divergence_exact(g) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(est.value == doctest::Approx(4.0).epsilon(0.05));  // 0.2 absolute
    CHECK(std::abs(est.value - 4.0) <= 0.2);
}

TEST_CASE("flipped estimate on one swiss roll stays under 0.02 x scale") {
    DatasetSpec roll;
    roll.kind = DatasetSpec::Kind::swiss_roll;
    SampleSource src = dataset_source(roll);

    // scale = mean squared data norm, measured on a fresh draw
    std::vector<double> probe;
    Pcg32 pr = make_stream(977, Stream::data);
    sample(roll, 10000, pr, probe);
    double scale = 0.0;
    for (size_t i = 0; i < probe.size() / 2; ++i)
        scale += probe[2 * i] * probe[2 * i] + probe[2 * i + 1] * probe[2 * i + 1];
    scale /= double(probe.size() / 2);
    CHECK(scale == doctest::Approx(2.0).epsilon(0.05));  // standardized 2d data

    Pcg32 rng = Pcg32::seeded(103, 1);
    auto est = estimate_divergence(DivKind::flipped_timeint, src, src, noiseless, 100000, 4,
                                   -1.0, rng);
    CHECK(est.value >= 0.0);
    CHECK(est.value <= 0.02 * scale);
}

TEST_CASE("naive time-integrated value stays away from zero for matched normals") {
    // over t ~ U[0,1], E|E[delta | x_t]|^2 integrates to 2 - pi/2 ~ 0.43 for
    // standard normals on both ends; the functional never sees zero
    Pcg32 rng = Pcg32::seeded(104, 1);
    auto est = estimate_divergence(DivKind::naive_timeint, std_normal_1d(), std_normal_1d(),
                                   noiseless, 100000, 2, -1.0, rng);
    CHECK(est.value >= 0.1);
    CHECK(est.value == doctest::Approx(2.0 - M_PI / 2.0).epsilon(0.6));
}

TEST_CASE("midpoint estimates increase monotonically in the mean gap") {
    std::vector<double> mus = {0.0, 0.5, 1.0, 2.0};
    std::vector<DivergenceEstimate> ests;
    for (double mu : mus) {
        Pcg32 rng = Pcg32::seeded(105, uint64_t(10 * mu) + 1);
        ests.push_back(estimate_divergence(DivKind::midpoint, std_normal_1d(),
                                           gaussian_source({mu}, 1.0), noiseless, 20000, 1, -1.0,
                                           rng));
    }
    for (size_t i = 0; i + 1 < ests.size(); ++i) {
        CHECK(ests[i + 1].value - ests[i].value >
              ests[i + 1].std_error + ests[i].std_error);
    }
    // and each tracks mu^2 loosely
    for (size_t i = 0; i < mus.size(); ++i)
        CHECK(std::abs(ests[i].value - mus[i] * mus[i]) < 0.15 + 0.05 * mus[i] * mus[i]);
}

TEST_CASE("common translation of both sources leaves the estimate unchanged") {
    Pcg32 rng = Pcg32::seeded(106, 1);
    Pcg32 rng2 = rng;  // identical draw history for both runs
    auto base = estimate_divergence(DivKind::midpoint, std_normal_1d(),
                                    gaussian_source({1.0}, 1.0), noiseless, 20000, 1, -1.0, rng);
    auto moved = estimate_divergence(DivKind::midpoint, gaussian_source({7.0}, 1.0),
                                     gaussian_source({8.0}, 1.0), noiseless, 20000, 1, -1.0,
                                     rng2);
    CHECK(std::abs(base.value - moved.value) <= 3.0 * (base.std_error + moved.std_error));
    CHECK(base.value == doctest::Approx(moved.value).epsilon(1e-6));
}

TEST_CASE("estimates are deterministic given the seed") {
    Pcg32 a = Pcg32::seeded(107, 1);
    Pcg32 b = Pcg32::seeded(107, 1);
    auto e1 = estimate_divergence(DivKind::flipped_timeint, std_normal_1d(),
                                  gaussian_source({1.0}, 1.0), noiseless, 4000, 3, -1.0, a);
    auto e2 = estimate_divergence(DivKind::flipped_timeint, std_normal_1d(),
                                  gaussian_source({1.0}, 1.0), noiseless, 4000, 3, -1.0, b);
    CHECK(e1.value == e2.value);
    CHECK(e1.std_error == e2.std_error);
#ifdef _OPENMP
    int saved = omp_get_max_threads();
    omp_set_num_threads(3);
    Pcg32 c = Pcg32::seeded(107, 1);
    auto e3 = estimate_divergence(DivKind::flipped_timeint, std_normal_1d(),
                                  gaussian_source({1.0}, 1.0), noiseless, 4000, 3, -1.0, c);
    omp_set_num_threads(saved);
    CHECK(e3.value == e1.value);
#endif
}

TEST_CASE("pair budgets below the split floor are rejected") {
    Pcg32 rng = Pcg32::seeded(108, 1);
    CHECK_THROWS_AS(estimate_divergence(DivKind::midpoint, std_normal_1d(), std_normal_1d(),
                                        noiseless, 100, 1, -1.0, rng, 8),
                    std::invalid_argument);
    CHECK_THROWS_AS(estimate_divergence(DivKind::midpoint, std_normal_1d(), std_normal_1d(),
                                        noiseless, 1000, 1, -1.0, rng, 0),
                    std::invalid_argument);
    SampleSource d2 = gaussian_source({0.0, 0.0}, 1.0);
    CHECK_THROWS_AS(estimate_divergence(DivKind::midpoint, std_normal_1d(), d2, noiseless, 1000,
                                        1, -1.0, rng),
                    std::invalid_argument);
}

TEST_CASE("generalized estimate with noise still vanishes for matched endpoints") {
    InterpolantSpec noisy{InterpKind::linear, 0.25};
    Pcg32 rng = Pcg32::seeded(109, 1);
    auto est = estimate_divergence(DivKind::generalized, std_normal_1d(), std_normal_1d(), noisy,
                                   40000, 3, -1.0, rng);
    CHECK(est.value >= 0.0);
    CHECK(est.value <= 0.02);
    CHECK(est.estimator == "generalized");
}

// ---------------------------------------------------------------------------
// variational value
// ---------------------------------------------------------------------------

TEST_CASE("zero critic gives exactly zero variational value") {
    FieldFn zero = [](std::span<const double>, double, std::span<double> out) {
        for (double& v : out) v = 0.0;
    };
    Pcg32 rng = Pcg32::seeded(110, 1);
    double v = variational_value(zero, std_normal_1d(), gaussian_source({1.0}, 1.0), noiseless,
                                 2000, 2, rng);
    CHECK(v == 0.0);
}

TEST_CASE("oracle critic attains the generalized divergence estimate") {
    GaussianEndpoints g{1, {0.0}, {1.0}, 1.0, 1.0};
    Pcg32 r1 = Pcg32::seeded(111, 1);
    auto gen = estimate_divergence(DivKind::generalized, std_normal_1d(),
                                   gaussian_source({1.0}, 1.0), noiseless, 40000, 4, -1.0, r1);
    Pcg32 r2 = Pcg32::seeded(111, 2);
    auto var = variational_estimate(oracle_flipped(g, 0.0), std_normal_1d(),
                                    gaussian_source({1.0}, 1.0), noiseless, 40000, 4, r2);
    CHECK(std::abs(var.value - gen.value) <= 3.0 * (var.std_error + gen.std_error));
}

TEST_CASE("doubled oracle critic scores zero by completing the square") {
    GaussianEndpoints g{1, {0.0}, {1.0}, 1.0, 1.0};
    FieldFn twice = [g](std::span<const double> x, double t, std::span<double> out) {
        Tensor f = flipped_field(g, t, x, 0.0);
        for (size_t i = 0; i < out.size(); ++i) out[i] = 2.0 * f.data[i];
    };
    Pcg32 rng = Pcg32::seeded(112, 1);
    auto est = variational_estimate(twice, std_normal_1d(), gaussian_source({1.0}, 1.0),
                                    noiseless, 40000, 4, rng);
    CHECK(std::abs(est.value) <= std::max(3.0 * est.std_error, 2e-2));
}

TEST_CASE("no tested critic beats the generalized divergence estimate") {
    GaussianEndpoints g{1, {0.0}, {1.0}, 1.0, 1.0};
    SampleSource p1 = gaussian_source({1.0}, 1.0);
    Pcg32 r0 = Pcg32::seeded(113, 99);
    auto gen = estimate_divergence(DivKind::generalized, std_normal_1d(), p1, noiseless, 20000,
                                   4, -1.0, r0);

    std::vector<FieldFn> critics;
    critics.push_back(oracle_flipped(g, 0.0));
    critics.push_back([g](std::span<const double> x, double t, std::span<double> out) {
        Tensor f = flipped_field(g, t, x, 0.0);
        for (size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * f.data[i];
    });
    critics.push_back([](std::span<const double>, double, std::span<double> out) {
        for (double& v : out) v = 0.3;
    });
    critics.push_back([](std::span<const double> x, double, std::span<double> out) {
        for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
    });

    for (size_t c = 0; c < critics.size(); ++c) {
        Pcg32 rng = Pcg32::seeded(113, c);
        auto var = variational_estimate(critics[c], std_normal_1d(), p1, noiseless, 20000, 4,
                                        rng);
        CHECK(var.value <= gen.value + 3.0 * (gen.std_error + var.std_error));
    }
}

TEST_CASE("non-finite critic output is rejected with location info") {
    FieldFn bad = [](std::span<const double>, double, std::span<double> out) {
        for (double& v : out) v = std::nan("");
    };
    Pcg32 rng = Pcg32::seeded(114, 1);
    CHECK_THROWS_WITH_AS(variational_value(bad, std_normal_1d(), std_normal_1d(), noiseless,
                                           2000, 1, rng),
                         doctest::Contains("t="), std::runtime_error);
}

// ---------------------------------------------------------------------------
// sources
// ---------------------------------------------------------------------------

TEST_CASE("gaussian source draws mean + std * z in stream order") {
    SampleSource s = gaussian_source({1.0, -2.0}, 0.5);
    CHECK(s.dim == 2);
    Pcg32 a = make_stream(1, Stream::estimator_p0);
    Pcg32 b = a;
    std::vector<double> out;
    s.draw(5, a, out);
    CHECK(out.size() == 10);
    for (int i = 0; i < 5; ++i) {
        CHECK(out[size_t(2 * i)] == 1.0 + 0.5 * b.normal());
        CHECK(out[size_t(2 * i + 1)] == -2.0 + 0.5 * b.normal());
    }
}

TEST_CASE("dataset source wraps the named dataset") {
    DatasetSpec roll;
    roll.kind = DatasetSpec::Kind::swiss_roll;
    SampleSource s = dataset_source(roll);
    CHECK(s.dim == 2);
    CHECK(s.label == std::string("swiss_roll"));
    Pcg32 a = make_stream(2, Stream::data);
    Pcg32 b = a;
    std::vector<double> via_source, direct;
    s.draw(100, a, via_source);
    sample(roll, 100, b, direct);
    CHECK(via_source == direct);
}

TEST_CASE("generator source pushes latents through the network") {
    Pcg32 init = make_stream(3, Stream::generator_init);
    MlpParams gen = init_mlp(2, {8}, 2, Activation::silu, false, init);
    SampleSource s = generator_source(gen);
    CHECK(s.dim == 2);

    Pcg32 a = make_stream(3, Stream::prior);
    Pcg32 b = a;
    std::vector<double> out;
    s.draw(7, a, out);
    CHECK(out.size() == 14);
    std::vector<double> z(2), y(2);
    for (int i = 0; i < 7; ++i) {
        z[0] = b.normal();
        z[1] = b.normal();
        mlp_forward(gen, z, 0.0, y);
        CHECK(out[size_t(2 * i)] == y[0]);
        CHECK(out[size_t(2 * i + 1)] == y[1]);
    }

    // a freshly initialized generator is far from the swiss roll, and the
    // midpoint estimate says so
    DatasetSpec roll;
    roll.kind = DatasetSpec::Kind::swiss_roll;
    Pcg32 rng = Pcg32::seeded(115, 1);
    auto est = estimate_divergence(DivKind::midpoint, generator_source(gen),
                                   dataset_source(roll), noiseless, 4000, 1, -1.0, rng);
    CHECK(est.value > 0.05);
}

TEST_CASE("time-conditioned networks are rejected as generator sources") {
    Pcg32 init = make_stream(4, Stream::generator_init);
    MlpParams crit = init_mlp(2, {8}, 2, Activation::silu, true, init);
    CHECK_THROWS_AS(generator_source(crit), std::invalid_argument);
}
