#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "midgen/cli.hpp"
#include "midgen/io.hpp"
#include "midgen/metrics.hpp"
#include "midgen/rng.hpp"

using namespace midgen;
namespace fs = std::filesystem;

namespace {

struct TmpDir {
    fs::path path;
    TmpDir() {
        path = fs::temp_directory_path() /
               ("midgen_cli_" + std::to_string(getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TmpDir() { fs::remove_all(path); }
    static inline int counter = 0;
};

// keeps doctest output clean and lets tests assert on messages
struct CaptureStreams {
    std::ostringstream out, err;
    std::streambuf* old_out;
    std::streambuf* old_err;
    CaptureStreams() {
        old_out = std::cout.rdbuf(out.rdbuf());
        old_err = std::cerr.rdbuf(err.rdbuf());
    }
    ~CaptureStreams() {
        std::cout.rdbuf(old_out);
        std::cerr.rdbuf(old_err);
    }
};

int run_quiet(const std::vector<std::string>& args, std::string* err_text = nullptr) {
    CaptureStreams cap;
    int rc = run_cli(args);
    if (err_text) *err_text = cap.err.str();
    return rc;
}

const char* kSmokeConfig = R"({
  "steps": 1, "batch": 4, "hidden": [6], "seed": 17,
  "dataset": {"kind": "gaussian", "mean": [1.0, 0.0], "std": 0.8}
})";

fs::path write_config(const TmpDir& tmp, const char* text, const char* name = "cfg.json") {
    fs::path p = tmp.path / name;
    write_text_atomic(p, text);
    return p;
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

}  // namespace

TEST_CASE("train smoke run writes the full artifact set") {
    TmpDir tmp;
    fs::path cfg = write_config(tmp, kSmokeConfig);
    fs::path out = tmp.path / "run";
    CHECK(run_quiet({"train", "--config", cfg.string(), "--out", out.string()}) == 0);

    std::string losses = read_text(out / "losses.csv");
    CHECK(count_lines(losses) == 2);  // header + one step
    CHECK(losses.substr(0, losses.find('\n')) == "step,loss_critic,loss_generator");
    CHECK(fs::exists(out / "config.json"));
    CHECK(fs::exists(out / "timings.csv"));
    CHECK(fs::exists(out / "checkpoints/step_1.json"));
    CHECK(fs::exists(out / "checkpoints/step_1.critic.json"));
    CHECK(fs::exists(out / "samples.csv"));
    CHECK(fs::exists(out / "metrics.json"));
    CHECK(fs::exists(out / "fields/t_0.5.csv"));

    SampleTable samples = read_samples_csv(out / "samples.csv");
    CHECK(samples.dim == 2);
    CHECK(samples.n == 4096);

    nlohmann::json m = nlohmann::json::parse(read_text(out / "metrics.json"));
    CHECK(m.at("n_a").get<int64_t>() == 4096);
    CHECK(std::isfinite(m.at("energy_distance").get<double>()));
}

TEST_CASE("train runs are reproducible and the echo re-runs identically") {
    TmpDir tmp;
    fs::path cfg = write_config(tmp, kSmokeConfig);
    fs::path a = tmp.path / "a", b = tmp.path / "b", c = tmp.path / "c";
    REQUIRE(run_quiet({"train", "--config", cfg.string(), "--out", a.string()}) == 0);
    REQUIRE(run_quiet({"train", "--config", cfg.string(), "--out", b.string()}) == 0);
    CHECK(read_text(a / "losses.csv") == read_text(b / "losses.csv"));
    CHECK(read_text(a / "checkpoints/step_1.json") == read_text(b / "checkpoints/step_1.json"));
    CHECK(read_text(a / "samples.csv") == read_text(b / "samples.csv"));

    // the resolved echo is a complete config: re-running it reproduces the run
    REQUIRE(run_quiet({"train", "--config", (a / "config.json").string(), "--out",
                       c.string()}) == 0);
    CHECK(read_text(a / "losses.csv") == read_text(c / "losses.csv"));
    CHECK(read_text(a / "checkpoints/step_1.critic.json") ==
          read_text(c / "checkpoints/step_1.critic.json"));
}

TEST_CASE("train records cli overrides in the config echo") {
    TmpDir tmp;
    fs::path cfg = write_config(tmp, kSmokeConfig);
    fs::path out = tmp.path / "run";
    REQUIRE(run_quiet({"train", "--config", cfg.string(), "--out", out.string(), "--variant",
                       "midpoint_only", "--seed", "99"}) == 0);
    TrainConfig echoed = config_from_json_text(read_text(out / "config.json"));
    CHECK(echoed.variant == Variant::midpoint_only);
    CHECK(echoed.seed == 99);
}

TEST_CASE("train rejects bad configs and halts with exit 2 on blowup") {
    TmpDir tmp;
    std::string err;
    fs::path bad = write_config(tmp, R"({"stepz": 3})", "bad.json");
    CHECK(run_quiet({"train", "--config", bad.string(), "--out", (tmp.path / "x").string()},
                    &err) == 1);
    CHECK(err.find("config: unknown key \"stepz\"") != std::string::npos);

    CHECK(run_quiet({"train", "--config", (tmp.path / "missing.json").string(), "--out",
                     (tmp.path / "x").string()}) != 0);

    fs::path halt = write_config(tmp, R"({
        "steps": 5, "batch": 16, "hidden": [8], "critic_updates_per_generator": 0,
        "adam": {"lr": 1e308},
        "dataset": {"kind": "gaussian", "mean": [1.0, 0.0], "std": 0.8}
    })", "halt.json");
    fs::path out = tmp.path / "halted";
    CHECK(run_quiet({"train", "--config", halt.string(), "--out", out.string()}, &err) == 2);
    CHECK(err.find("halted at step") != std::string::npos);
    // the completed steps are still on disk
    CHECK(count_lines(read_text(out / "losses.csv")) == 2);
}

TEST_CASE("divergence command matches the closed-form gaussian values") {
    TmpDir tmp;
    fs::path out = tmp.path / "div.json";
    std::string same = R"({"kind": "gaussian", "mean": [0.0], "std": 1.0})";
    REQUIRE(run_quiet({"divergence", "--kind", "midpoint", "--p0", same, "--p1", same, "--n",
                       "100000", "--times", "1", "--seed", "5", "--out", out.string()}) == 0);
    nlohmann::json j = nlohmann::json::parse(read_text(out));
    CHECK(j.at("value").get<double>() <= 0.01);
    CHECK(j.at("estimator").get<std::string>() == "midpoint");
    CHECK(j.at("n_pairs").get<int64_t>() == 100000);

    std::string shifted = R"({"kind": "gaussian", "mean": [2.0], "std": 1.0})";
    REQUIRE(run_quiet({"divergence", "--kind", "midpoint", "--p0", same, "--p1", shifted, "--n",
                       "30000", "--times", "1", "--seed", "6", "--out", out.string()}) == 0);
    j = nlohmann::json::parse(read_text(out));
    CHECK(std::fabs(j.at("value").get<double>() - 4.0) <= 0.2);

    CHECK(run_quiet({"divergence", "--kind", "bogus", "--p0", same, "--p1", same}) != 0);
    CHECK(run_quiet({"divergence", "--kind", "midpoint", "--p0", "{nope", "--p1", same}) == 1);
}

TEST_CASE("divergence accepts checkpoint-backed generator sources") {
    TmpDir tmp;
    fs::path cfg = write_config(tmp, kSmokeConfig);
    fs::path run = tmp.path / "run";
    REQUIRE(run_quiet({"train", "--config", cfg.string(), "--out", run.string()}) == 0);
    std::string ck_spec =
        std::string(R"({"checkpoint": ")") + (run / "checkpoints/step_1.json").string() + "\"}";
    fs::path out = tmp.path / "div.json";
    REQUIRE(run_quiet({"divergence", "--kind", "midpoint", "--p0", ck_spec, "--p1",
                       R"({"kind": "gaussian", "mean": [1.0, 0.0], "std": 0.8})", "--n", "3200",
                       "--seed", "7", "--out", out.string()}) == 0);
    nlohmann::json j = nlohmann::json::parse(read_text(out));
    CHECK(std::isfinite(j.at("value").get<double>()));

    // critic checkpoints are time conditioned and rejected as sample sources
    std::string bad_spec = std::string(R"({"checkpoint": ")") +
                           (run / "checkpoints/step_1.critic.json").string() + "\"}";
    CHECK(run_quiet({"divergence", "--kind", "midpoint", "--p0", bad_spec, "--p1", ck_spec}) ==
          1);
}

TEST_CASE("field command exports oracle grids with a vanishing matched field") {
    TmpDir tmp;
    fs::path out = tmp.path / "fields";
    REQUIRE(run_quiet({"field", "--oracle", R"({"m0": [0.5, -0.5], "sigma": 0.25})", "--t",
                       "0.1", "0.25", "0.5", "--out", out.string()}) == 0);
    CHECK(fs::exists(out / "t_0.1.csv"));
    CHECK(fs::exists(out / "t_0.25.csv"));
    CHECK(fs::exists(out / "t_0.5.csv"));

    // matched endpoints: the flip-symmetrized field vanishes on the grid
    std::string text = read_text(out / "t_0.5.csv");
    std::istringstream lines(text);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "x,y,vx,vy,finite");
    int rows = 0;
    while (std::getline(lines, line)) {
        size_t c1 = line.find(','), c2 = line.find(',', c1 + 1);
        size_t c3 = line.find(',', c2 + 1), c4 = line.find(',', c3 + 1);
        double vx = parse_double(line.substr(c2 + 1, c3 - c2 - 1));
        double vy = parse_double(line.substr(c3 + 1, c4 - c3 - 1));
        CHECK(std::hypot(vx, vy) <= 1e-12);
        CHECK(line.substr(c4 + 1) == "1");
        ++rows;
    }
    CHECK(rows == 625);

    // mismatched endpoints: velocity field is visibly nonzero away from t=1/2
    fs::path out2 = tmp.path / "fields2";
    REQUIRE(run_quiet({"field", "--oracle",
                       R"({"m0": [0.0, 0.0], "m1": [2.0, 0.0], "field": "velocity"})", "--t",
                       "0.25", "--out", out2.string()}) == 0);
    CHECK(fs::exists(out2 / "t_0.25.csv"));

    CHECK(run_quiet({"field", "--oracle", R"({"m0": [0.0, 0.0]})", "--t", "0.5", "--out",
                     out.string(), "--grid-steps", "1"}) == 1);
    CHECK(run_quiet({"field", "--t", "0.5", "--out", out.string()}) == 1);
    CHECK(run_quiet({"field", "--oracle", R"({"m0": [0.0, 0.0], "field": "spin"})", "--t",
                     "0.5", "--out", out.string()}) == 1);
}

TEST_CASE("field command round-trips checkpoints exactly") {
    TmpDir tmp;
    fs::path cfg = write_config(tmp, kSmokeConfig);
    fs::path run = tmp.path / "run";
    REQUIRE(run_quiet({"train", "--config", cfg.string(), "--out", run.string()}) == 0);
    fs::path ck = run / "checkpoints/step_1.critic.json";

    fs::path f1 = tmp.path / "f1";
    REQUIRE(run_quiet({"field", "--checkpoint", ck.string(), "--t", "0.5", "--out",
                       f1.string()}) == 0);

    // load, save to a new file, and export again: the CSV must not move
    Checkpoint loaded = load_checkpoint(ck);
    fs::path ck2 = tmp.path / "resaved.json";
    save_checkpoint(ck2, loaded.params, loaded.opt);
    fs::path f2 = tmp.path / "f2";
    REQUIRE(run_quiet({"field", "--checkpoint", ck2.string(), "--t", "0.5", "--out",
                       f2.string()}) == 0);
    CHECK(read_text(f1 / "t_0.5.csv") == read_text(f2 / "t_0.5.csv"));

    // generator checkpoints carry no time conditioning and are rejected
    CHECK(run_quiet({"field", "--checkpoint", (run / "checkpoints/step_1.json").string(), "--t",
                     "0.5", "--out", (tmp.path / "f3").string()}) == 1);
}

TEST_CASE("eval command reports metrics and rejects mismatched tables") {
    TmpDir tmp;
    Pcg32 rng = make_stream(92000, Stream::eval_data);
    std::vector<double> a(200);
    rng.fill_normal(a);
    std::vector<double> b = a;
    for (double& x : b) x += 0.7;
    fs::path fa = tmp.path / "a.csv", fb = tmp.path / "b.csv";
    write_samples_csv(fa, a, 1);
    write_samples_csv(fb, b, 1);

    fs::path out = tmp.path / "m.json";
    REQUIRE(run_quiet({"eval", "--samples", fa.string(), "--reference", fa.string(), "--seed",
                       "3", "--out", out.string()}) == 0);
    nlohmann::json j = nlohmann::json::parse(read_text(out));
    CHECK(j.at("energy_distance").get<double>() == 0.0);
    CHECK(j.at("sliced_wasserstein").get<double>() == 0.0);

    // a 1-D translation shows up in the sliced distance at exactly the shift
    REQUIRE(run_quiet({"eval", "--samples", fa.string(), "--reference", fb.string(), "--seed",
                       "3", "--out", out.string()}) == 0);
    j = nlohmann::json::parse(read_text(out));
    CHECK(j.at("sliced_wasserstein").get<double>() == doctest::Approx(0.7).epsilon(1e-12));

    // deterministic given the seed: identical bytes on a re-run
    fs::path out2 = tmp.path / "m2.json";
    REQUIRE(run_quiet({"eval", "--samples", fa.string(), "--reference", fb.string(), "--seed",
                       "3", "--out", out2.string()}) == 0);
    CHECK(read_text(out) == read_text(out2));

    std::vector<double> two(100);
    rng.fill_normal(two);
    fs::path fc = tmp.path / "c.csv";
    write_samples_csv(fc, two, 2);
    std::string err;
    CHECK(run_quiet({"eval", "--samples", fa.string(), "--reference", fc.string()}, &err) == 1);
    CHECK(err.find("dim mismatch") != std::string::npos);
}

TEST_CASE("datasets command writes sample tables for every kind") {
    TmpDir tmp;
    fs::path out = tmp.path / "s.csv";
    REQUIRE(run_quiet({"datasets", "--kind", "checkerboard", "--n", "100", "--seed", "4",
                       "--out", out.string()}) == 0);
    SampleTable t = read_samples_csv(out);
    CHECK(t.n == 100);
    CHECK(t.dim == 2);

    REQUIRE(run_quiet({"datasets", "--spec", R"({"kind": "gaussian", "mean": [3.0], "std": 2.0})",
                       "--n", "50", "--seed", "4", "--out", out.string()}) == 0);
    t = read_samples_csv(out);
    CHECK(t.n == 50);
    CHECK(t.dim == 1);

    CHECK(run_quiet({"datasets", "--kind", "nope", "--out", out.string()}) != 0);
    CHECK(run_quiet({"datasets", "--out", out.string()}) == 1);
    CHECK(run_quiet({"datasets", "--kind", "gaussian", "--n", "0", "--out", out.string()}) == 1);
}
