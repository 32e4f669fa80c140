// Timing comparison between the OpenMP kernels and their serial reference
// twins. The twins must agree bitwise, so each row also reports that check;
// speedups hover near 1.0 on a single-core host.
#include <omp.h>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "midgen/data.hpp"
#include "midgen/estimator.hpp"
#include "midgen/metrics.hpp"
#include "midgen/model.hpp"
#include "midgen/rng.hpp"
#include "midgen/trainer.hpp"

using namespace midgen;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm caches, fault pages
    auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms, bool same) {
    std::printf("%-28s serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx   %s\n", name,
                serial_ms, parallel_ms, serial_ms / parallel_ms,
                same ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main() {
    std::printf("threads available: %d\n\n", omp_get_max_threads());
    int reps = 3;

    {  // kernel regression, the estimator hot loop
        Pcg32 rng = make_stream(2024, Stream::estimator_p0);
        size_t n = 4000, n_q = 2000;
        int d = 2;
        std::vector<double> obs(n * size_t(d)), tgt(n * size_t(d)), q(n_q * size_t(d));
        rng.fill_normal(obs);
        rng.fill_normal(tgt);
        rng.fill_normal(q);
        std::vector<double> out_s(n_q * size_t(d)), out_p(n_q * size_t(d));
        double serial = time_ms(
            [&] { kernel_regress_batch_serial(obs.data(), tgt.data(), n, d, d, q.data(), n_q,
                                              0.3, out_s.data()); },
            reps);
        double parallel = time_ms(
            [&] { kernel_regress_batch(obs.data(), tgt.data(), n, d, d, q.data(), n_q, 0.3,
                                       out_p.data()); },
            reps);
        report("kernel_regress_batch", serial, parallel, out_s == out_p);
    }

    {  // energy distance pair sums
        Pcg32 rng = make_stream(2025, Stream::eval_data);
        int64_t n = 3000;
        std::vector<double> a(size_t(n) * 2), b(size_t(n) * 2);
        rng.fill_normal(a);
        rng.fill_normal(b);
        double vs = 0.0, vp = 0.0;
        double serial =
            time_ms([&] { vs = energy_distance_serial(a.data(), n, b.data(), n, 2); }, reps);
        double parallel =
            time_ms([&] { vp = energy_distance(a.data(), n, b.data(), n, 2); }, reps);
        report("energy_distance", serial, parallel, vs == vp);
    }

    {  // sliced Wasserstein projections
        Pcg32 rng = make_stream(2026, Stream::eval_data);
        int64_t n = 20000;
        std::vector<double> a(size_t(n) * 2), b(size_t(n) * 2);
        rng.fill_normal(a);
        rng.fill_normal(b);
        double vs = 0.0, vp = 0.0;
        double serial = time_ms(
            [&] {
                Pcg32 r = make_stream(7, Stream::metric_proj);
                vs = sliced_wasserstein_serial(a.data(), n, b.data(), n, 2, 32, r);
            },
            reps);
        double parallel = time_ms(
            [&] {
                Pcg32 r = make_stream(7, Stream::metric_proj);
                vp = sliced_wasserstein(a.data(), n, b.data(), n, 2, 32, r);
            },
            reps);
        report("sliced_wasserstein", serial, parallel, vs == vp);
    }

    {  // chunked training gradients
        TrainConfig cfg;
        cfg.dataset.kind = DatasetSpec::Kind::swiss_roll;
        cfg.batch = 512;
        cfg.hidden = {64, 64, 64};
        cfg.seed = 99;
        TrainState st = init_train_state(cfg);
        StepBatch batch = draw_step_batch(st, cfg);
        ParamGrads gs = zero_grads(st.critic), gp = zero_grads(st.critic);
        double ls = 0.0, lp = 0.0;
        double serial = time_ms(
            [&] {
                gs = zero_grads(st.critic);
                ls = critic_batch_grads_serial(st.generator, st.critic, batch, cfg.sigma_critic,
                                               gs);
            },
            reps);
        double parallel = time_ms(
            [&] {
                gp = zero_grads(st.critic);
                lp = critic_batch_grads(st.generator, st.critic, batch, cfg.sigma_critic, gp);
            },
            reps);
        bool same = ls == lp;
        for (size_t k = 0; same && k < gs.size(); ++k)
            same = gs[k].w.data == gp[k].w.data && gs[k].b.data == gp[k].b.data;
        report("critic_batch_grads", serial, parallel, same);
    }

    return 0;
}
