#include "midgen/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <span>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "midgen/data.hpp"
#include "midgen/estimator.hpp"
#include "midgen/gaussian_oracle.hpp"
#include "midgen/io.hpp"
#include "midgen/metrics.hpp"
#include "midgen/model.hpp"
#include "midgen/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace midgen {

namespace {

// eval-time constants; training behavior itself is fully config-driven
constexpr int64_t kEvalSamples = 4096;
constexpr int kMetricProjections = 64;
constexpr double kFieldTimes[] = {0.1, 0.25, 0.4, 0.5};

FieldFn network_field(MlpParams net) {
    return [net = std::move(net)](std::span<const double> x, double t, std::span<double> out) {
        Tensor xt = Tensor::vec(std::vector<double>(x.begin(), x.end()));
        Tensor v = critic_forward(net, xt, t);
        std::copy(v.data.begin(), v.data.end(), out.begin());
    };
}

// ------------------------------------------------------------------ train --

struct TrainArgs {
    std::string config_path;
    std::string out_dir;
    uint64_t seed = 0;
    bool seed_set = false;
    std::string variant;
};

int cmd_train(const TrainArgs& a) {
    TrainConfig cfg = config_from_json_text(read_text(a.config_path));
    if (a.seed_set) cfg.seed = a.seed;
    if (!a.variant.empty()) cfg.variant = variant_from_name(a.variant);

    fs::path out = a.out_dir;
    fs::create_directories(out / "checkpoints");
    write_text_atomic(out / "config.json", config_to_json_text(cfg));

    TrainState st;
    auto save_tables = [&]() {
        write_losses_csv(out / "losses.csv", st.history);
        write_timings_csv(out / "timings.csv", st.history);
    };
    auto save_ckpt = [&](const TrainState& s) {
        std::string base = "step_" + std::to_string(s.step);
        save_checkpoint(out / "checkpoints" / (base + ".json"), s.generator, s.gen_opt);
        save_checkpoint(out / "checkpoints" / (base + ".critic.json"), s.critic, s.critic_opt);
    };
    try {
        st = init_train_state(cfg);
        train(st, cfg, [&](const TrainState& s) {
            save_ckpt(s);
            save_tables();
        });
    } catch (const TrainHalt& h) {
        save_tables();
        std::cerr << "midgen train: " << h.what() << "\n";
        return 2;
    }
    save_tables();
    save_ckpt(st);

    // evaluation artifacts come from the EMA shadows and eval-only streams
    MlpParams gen_ema = with_params(st.generator, st.gen_opt.ema);
    MlpParams critic_ema = with_params(st.critic, st.critic_opt.ema);
    int dim = cfg.dataset.dim();

    std::vector<double> generated;
    Pcg32 rng_prior = make_stream(cfg.seed, Stream::eval_prior);
    generator_source(gen_ema).draw(size_t(kEvalSamples), rng_prior, generated);
    write_samples_csv(out / "samples.csv", generated, dim);

    std::vector<double> held_out;
    Pcg32 rng_data = make_stream(cfg.seed, Stream::eval_data);
    sample(cfg.dataset, size_t(kEvalSamples), rng_data, held_out);
    MetricReport report =
        compute_metrics(generated, held_out, dim, kMetricProjections, cfg.seed);
    write_text_atomic(out / "metrics.json", metric_report_json(report));

    if (dim == 2) {
        fs::create_directories(out / "fields");
        FieldFn f = network_field(critic_ema);
        for (double t : kFieldTimes)
            write_field_csv(out / "fields" / ("t_" + format_double(t) + ".csv"),
                            field_grid(f, t, GridSpec{}));
    }

    std::cout << "trained " << variant_name(cfg.variant) << " for " << st.step
              << " steps; energy_distance=" << format_double(report.energy_distance)
              << " sliced_wasserstein=" << format_double(report.sliced_wasserstein) << "\n";
    return 0;
}

// ------------------------------------------------------------- divergence --

struct DivArgs {
    std::string kind;
    std::string p0, p1;
    int64_t n_pairs = 100000;
    int n_times = 4;
    int replicates = 8;
    double sigma = 0.0;
    double bandwidth = -1.0;
    uint64_t seed = 0;
    std::string out;
};

SampleSource source_from_spec(const std::string& text, const std::string& label) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(label + ": " + e.what());
    }
    if (j.is_object() && j.contains("checkpoint")) {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (it.key() != "checkpoint")
                throw std::runtime_error(label + ": unknown key \"" + it.key() + "\"");
        const json& p = j.at("checkpoint");
        if (!p.is_string())
            throw std::runtime_error(label + ".checkpoint: expected a file path");
        Checkpoint ck = load_checkpoint(p.get<std::string>());
        return generator_source(with_params(ck.params, ck.opt.ema));
    }
    return dataset_source(dataset_spec_from_json_text(text, label));
}

int cmd_divergence(const DivArgs& a) {
    DivKind kind = div_kind_from_name(a.kind);
    SampleSource p0 = source_from_spec(a.p0, "--p0");
    SampleSource p1 = source_from_spec(a.p1, "--p1");
    InterpolantSpec spec{InterpKind::linear, a.sigma};
    Pcg32 rng = make_stream(a.seed, Stream::estimator_source);
    DivergenceEstimate est = estimate_divergence(kind, p0, p1, spec, a.n_pairs, a.n_times,
                                                 a.bandwidth, rng, a.replicates);
    std::string text = divergence_json(est, a.seed);
    std::cout << text;
    if (!a.out.empty()) write_text_atomic(a.out, text);
    return 0;
}

// ------------------------------------------------------------------ field --

struct FieldArgs {
    std::string checkpoint;
    std::string oracle;
    std::vector<double> ts;
    std::string out_dir;
    double grid_min = -3.0;
    double grid_max = 3.0;
    int grid_steps = 25;
};

FieldFn oracle_field(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("--oracle: ") + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("--oracle: expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        std::string k = it.key();
        if (k != "m0" && k != "m1" && k != "s0" && k != "s1" && k != "field" && k != "sigma")
            throw std::runtime_error("--oracle: unknown key \"" + k + "\"");
    }
    GaussianEndpoints g;
    g.dim = 2;
    if (!j.contains("m0")) throw std::runtime_error("--oracle.m0: missing");
    g.m0 = j.at("m0").get<std::vector<double>>();
    g.m1 = j.contains("m1") ? j.at("m1").get<std::vector<double>>() : g.m0;
    g.s0 = j.value("s0", 1.0);
    g.s1 = j.value("s1", 1.0);
    if (g.m0.size() != 2 || g.m1.size() != 2)
        throw std::runtime_error("--oracle: grids are 2-D, means need 2 entries");
    validate(g);
    std::string field = j.value("field", std::string("flipped"));
    double sigma = j.value("sigma", 0.0);
    if (field == "velocity")
        return [g](std::span<const double> x, double t, std::span<double> out) {
            Tensor v = velocity_field(g, t, x);
            std::copy(v.data.begin(), v.data.end(), out.begin());
        };
    if (field == "flipped")
        return [g, sigma](std::span<const double> x, double t, std::span<double> out) {
            Tensor v = flipped_field(g, t, x, sigma);
            std::copy(v.data.begin(), v.data.end(), out.begin());
        };
    throw std::runtime_error("--oracle.field: expected \"velocity\" or \"flipped\"");
}

int cmd_field(const FieldArgs& a) {
    FieldFn f;
    if (!a.checkpoint.empty()) {
        Checkpoint ck = load_checkpoint(a.checkpoint);
        if (!ck.params.time_conditioned || ck.params.data_in_dim() != 2 ||
            ck.params.out_dim() != 2)
            throw std::runtime_error(
                "field: checkpoint must hold a time-conditioned 2-D field network");
        f = network_field(with_params(ck.params, ck.opt.ema));
    } else {
        f = oracle_field(a.oracle);
    }
    fs::path out = a.out_dir;
    fs::create_directories(out);
    GridSpec grid{a.grid_min, a.grid_max, a.grid_steps};
    for (double t : a.ts) {
        if (!(t >= 0.0 && t <= 1.0))
            throw std::runtime_error("field: t must lie in [0,1], got " + format_double(t));
        auto rows = field_grid(f, t, grid);
        fs::path file = out / ("t_" + format_double(t) + ".csv");
        write_field_csv(file, rows);
        double max_norm = 0.0;
        int64_t bad = 0;
        for (const auto& r : rows) {
            if (!r.finite) {
                ++bad;
                continue;
            }
            max_norm = std::max(max_norm, std::hypot(r.vx, r.vy));
        }
        std::cout << "t=" << format_double(t) << " -> " << file.string() << " rows=" << rows.size()
                  << " max|v|=" << format_double(max_norm);
        if (bad > 0) std::cout << " non_finite_rows=" << bad;
        std::cout << "\n";
    }
    return 0;
}

// ------------------------------------------------------------------- eval --

struct EvalArgs {
    std::string samples;
    std::string reference;
    int projections = kMetricProjections;
    uint64_t seed = 0;
    std::string out;
};

int cmd_eval(const EvalArgs& a) {
    SampleTable s = read_samples_csv(a.samples);
    SampleTable r = read_samples_csv(a.reference);
    if (s.dim != r.dim)
        throw std::runtime_error("eval: dim mismatch: " + a.samples + " has " +
                                 std::to_string(s.dim) + " columns, " + a.reference + " has " +
                                 std::to_string(r.dim));
    MetricReport report = compute_metrics(s.flat, r.flat, s.dim, a.projections, a.seed);
    std::string text = metric_report_json(report);
    std::cout << text;
    if (!a.out.empty()) write_text_atomic(a.out, text);
    return 0;
}

// --------------------------------------------------------------- datasets --

struct DataArgs {
    std::string spec_text;
    std::string kind;
    int64_t n = 1000;
    uint64_t seed = 0;
    std::string out;
};

int cmd_datasets(const DataArgs& a) {
    DatasetSpec spec;
    if (!a.spec_text.empty()) {
        spec = dataset_spec_from_json_text(a.spec_text, "--spec");
    } else {
        spec.kind = kind_from_name(a.kind);
        validate(spec);
    }
    if (a.n < 1) throw std::runtime_error("datasets: --n must be at least 1");
    Pcg32 rng = make_stream(a.seed, Stream::data);
    std::vector<double> buf;
    sample(spec, size_t(a.n), rng, buf);
    write_samples_csv(a.out, buf, spec.dim());
    std::cout << "wrote " << a.n << " " << kind_name(spec.kind) << " samples (dim "
              << spec.dim() << ") to " << a.out << "\n";
    return 0;
}

}  // namespace

// -------------------------------------------------------------- dispatcher --

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"midpoint generative models: training, estimation, and export tools"};
    app.require_subcommand(1);

    TrainArgs ta;
    CLI::App* t = app.add_subcommand("train", "run the minimax training loop");
    t->add_option("--config", ta.config_path, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    t->add_option("--out", ta.out_dir, "output directory")->required();
    CLI::Option* seed_opt = t->add_option("--seed", ta.seed, "override the config seed");
    t->add_option("--variant", ta.variant, "override the objective variant")
        ->check(CLI::IsMember({"full", "midpoint_only", "naive_unflipped"}));

    DivArgs da;
    CLI::App* d = app.add_subcommand("divergence", "estimate a divergence between two sources");
    d->add_option("--kind", da.kind, "estimator kind")
        ->required()
        ->check(CLI::IsMember({"midpoint", "naive_timeint", "flipped_timeint", "generalized"}));
    d->add_option("--p0", da.p0, "source spec JSON (dataset spec or {\"checkpoint\": path})")
        ->required();
    d->add_option("--p1", da.p1, "source spec JSON")->required();
    d->add_option("--n", da.n_pairs, "total pair budget");
    d->add_option("--times", da.n_times, "time draws per replicate");
    d->add_option("--replicates", da.replicates, "independent replicates");
    d->add_option("--sigma", da.sigma, "interpolant noise strength");
    d->add_option("--bandwidth", da.bandwidth, "kernel bandwidth (<= 0 selects automatically)");
    d->add_option("--seed", da.seed, "random seed");
    d->add_option("--out", da.out, "also write the JSON result here");

    FieldArgs fa;
    CLI::App* f = app.add_subcommand("field", "evaluate a field on a 2-D grid");
    CLI::Option* ck = f->add_option("--checkpoint", fa.checkpoint, "field network checkpoint")
                          ->check(CLI::ExistingFile);
    f->add_option("--oracle", fa.oracle,
                  "gaussian endpoints JSON {m0, m1, s0, s1, field, sigma}")
        ->excludes(ck);
    f->add_option("--t", fa.ts, "time values, one CSV per value")->required()->expected(-1);
    f->add_option("--out", fa.out_dir, "output directory")->required();
    f->add_option("--grid-min", fa.grid_min, "grid lower corner");
    f->add_option("--grid-max", fa.grid_max, "grid upper corner");
    f->add_option("--grid-steps", fa.grid_steps, "points per axis");

    EvalArgs ea;
    CLI::App* e = app.add_subcommand("eval", "two-sample metrics between sample CSVs");
    e->add_option("--samples", ea.samples, "generated samples CSV")
        ->required()
        ->check(CLI::ExistingFile);
    e->add_option("--reference", ea.reference, "reference samples CSV")
        ->required()
        ->check(CLI::ExistingFile);
    e->add_option("--projections", ea.projections, "sliced Wasserstein directions");
    e->add_option("--seed", ea.seed, "projection seed");
    e->add_option("--out", ea.out, "also write metrics JSON here");

    DataArgs ga;
    CLI::App* g = app.add_subcommand("datasets", "draw target samples to a CSV");
    CLI::Option* spec_opt = g->add_option("--spec", ga.spec_text, "dataset spec JSON");
    g->add_option("--kind", ga.kind, "dataset kind with default parameters")
        ->check(CLI::IsMember({"gaussian", "gaussian_mixture", "swiss_roll", "checkerboard"}))
        ->excludes(spec_opt);
    g->add_option("--n", ga.n, "sample count");
    g->add_option("--seed", ga.seed, "random seed");
    g->add_option("--out", ga.out, "output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err);
    }

    try {
        if (app.got_subcommand(t)) {
            ta.seed_set = seed_opt->count() > 0;
            return cmd_train(ta);
        }
        if (app.got_subcommand(d)) return cmd_divergence(da);
        if (app.got_subcommand(f)) {
            if (fa.checkpoint.empty() && fa.oracle.empty())
                throw std::runtime_error("field: pass --checkpoint or --oracle");
            return cmd_field(fa);
        }
        if (app.got_subcommand(e)) return cmd_eval(ea);
        if (app.got_subcommand(g)) {
            if (ga.spec_text.empty() && ga.kind.empty())
                throw std::runtime_error("datasets: pass --spec or --kind");
            return cmd_datasets(ga);
        }
    } catch (const TrainHalt& h) {
        std::cerr << "midgen: " << h.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "midgen: " << err.what() << "\n";
        return 1;
    }
    return 1;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("midgen");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(int(argv.size()), argv.data());
}

}  // namespace midgen
