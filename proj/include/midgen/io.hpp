// On-disk formats: JSON configs and checkpoints, CSV tables, JSON reports.
//
// CSV files use a header row, comma separators, '.' decimal, LF endings, and
// shortest round-trip doubles. Every file write goes to "<name>.tmp" in the
// target directory and is renamed into place, so readers never see a partial
// file. Config parsing is strict: unknown keys are rejected with their full
// path so typos fail loudly instead of silently using a default.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "midgen/estimator.hpp"
#include "midgen/metrics.hpp"
#include "midgen/model.hpp"
#include "midgen/trainer.hpp"

namespace midgen {

// shortest decimal string that parses back to the same double
std::string format_double(double v);
// strict full-string parse, accepts inf/nan spellings
double parse_double(const std::string& s);

void write_text_atomic(const std::filesystem::path& path, const std::string& body);
std::string read_text(const std::filesystem::path& path);

// ------------------------------------------------------------------ config --

// Strict parse + semantic validation. Errors name the failing key as
// "config.<path>: <what>".
TrainConfig config_from_json_text(const std::string& text);
// Resolved echo with every field explicit; reparsing it reproduces the
// config bit for bit.
std::string config_to_json_text(const TrainConfig& cfg);

// Standalone dataset spec, same schema as config.dataset. label names the
// source in error messages (e.g. "--p0").
DatasetSpec dataset_spec_from_json_text(const std::string& text, const std::string& label);

// ------------------------------------------------------------- checkpoints --

inline constexpr int64_t kCheckpointFormat = 1;

struct Checkpoint {
    MlpParams params;
    OptState opt;
};

// One network per file: weights, Adam moments, EMA shadow.
void save_checkpoint(const std::filesystem::path& path, const MlpParams& p, const OptState& opt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ------------------------------------------------------------------- CSV --

// step,loss_critic,loss_generator. Wall times go to the separate timings
// table so reruns of the same config + seed match byte for byte.
void write_losses_csv(const std::filesystem::path& path, const std::vector<LossRow>& rows);
// step,wall_ms
void write_timings_csv(const std::filesystem::path& path, const std::vector<LossRow>& rows);

// header x0..x{dim-1}, one row per sample
void write_samples_csv(const std::filesystem::path& path, const std::vector<double>& flat,
                       int dim);

struct SampleTable {
    std::vector<double> flat;  // row-major [n, dim]
    int dim = 0;
    int64_t n = 0;
};
SampleTable read_samples_csv(const std::filesystem::path& path);

// x,y,vx,vy,finite with finite as 0/1; non-finite values are written as-is
void write_field_csv(const std::filesystem::path& path, const std::vector<FieldGridRow>& rows);

// ---------------------------------------------------------------- reports --

std::string metric_report_json(const MetricReport& r);
std::string divergence_json(const DivergenceEstimate& e, uint64_t seed);

}  // namespace midgen
