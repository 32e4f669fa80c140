#include "midgen/io.hpp"

#include <charconv>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace midgen {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const char* end = s.data() + s.size();
    auto res = std::from_chars(s.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end)
        throw std::runtime_error("bad number: \"" + s + "\"");
    return v;
}

void write_text_atomic(const fs::path& path, const std::string& body) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open for writing: " + tmp.string());
        f.write(body.data(), std::streamsize(body.size()));
        f.flush();
        if (!f) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read: " + path.string());
    std::string body((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) throw std::runtime_error("read failed: " + path.string());
    return body;
}

// ------------------------------------------------------------ json helpers --

namespace {

// label is the full path of the object, e.g. "config" or "config.adam"
void check_keys(const json& j, const std::string& label,
                std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) throw std::runtime_error(label + ": unknown key \"" + it.key() + "\"");
    }
}

const json* maybe(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

double get_num(const json& j, const std::string& label, const char* key, double dflt) {
    const json* v = maybe(j, key);
    if (!v) return dflt;
    if (!v->is_number()) throw std::runtime_error(label + "." + key + ": expected a number");
    return v->get<double>();
}

int64_t get_int(const json& j, const std::string& label, const char* key, int64_t dflt) {
    const json* v = maybe(j, key);
    if (!v) return dflt;
    if (!v->is_number_integer())
        throw std::runtime_error(label + "." + key + ": expected an integer");
    return v->get<int64_t>();
}

uint64_t get_u64(const json& j, const std::string& label, const char* key, uint64_t dflt) {
    const json* v = maybe(j, key);
    if (!v) return dflt;
    if (!v->is_number_unsigned())
        throw std::runtime_error(label + "." + key + ": expected a nonnegative integer");
    return v->get<uint64_t>();
}

std::string get_str(const json& j, const std::string& label, const char* key,
                    const std::string& dflt) {
    const json* v = maybe(j, key);
    if (!v) return dflt;
    if (!v->is_string()) throw std::runtime_error(label + "." + key + ": expected a string");
    return v->get<std::string>();
}

bool get_bool(const json& j, const std::string& label, const char* key) {
    const json* v = maybe(j, key);
    if (!v || !v->is_boolean())
        throw std::runtime_error(label + "." + key + ": expected a boolean");
    return v->get<bool>();
}

std::vector<double> num_array(const json& v, const std::string& label) {
    if (!v.is_array()) throw std::runtime_error(label + ": expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& el : v) {
        if (!el.is_number()) throw std::runtime_error(label + ": expected an array of numbers");
        out.push_back(el.get<double>());
    }
    return out;
}

std::vector<int> int_array(const json& v, const std::string& label) {
    if (!v.is_array()) throw std::runtime_error(label + ": expected an array of integers");
    std::vector<int> out;
    out.reserve(v.size());
    for (const auto& el : v) {
        if (!el.is_number_integer())
            throw std::runtime_error(label + ": expected an array of integers");
        out.push_back(el.get<int>());
    }
    return out;
}

}  // namespace

// ------------------------------------------------------------------ config --

namespace {

DatasetSpec dataset_from_json(const json& j, const std::string& label) {
    if (!j.is_object()) throw std::runtime_error(label + ": expected an object");
    DatasetSpec spec;
    std::string kind = get_str(j, label, "kind", kind_name(spec.kind));
    try {
        spec.kind = kind_from_name(kind);
    } catch (const std::exception& e) {
        throw std::runtime_error(label + ".kind: " + e.what());
    }
    switch (spec.kind) {
        case DatasetSpec::Kind::gaussian:
            check_keys(j, label, {"kind", "mean", "std"});
            if (const json* v = maybe(j, "mean")) spec.mean = num_array(*v, label + ".mean");
            spec.std_dev = get_num(j, label, "std", spec.std_dev);
            break;
        case DatasetSpec::Kind::gaussian_mixture: {
            check_keys(j, label, {"kind", "means", "weights", "std"});
            if (const json* v = maybe(j, "means")) {
                if (!v->is_array())
                    throw std::runtime_error(label + ".means: expected an array of points");
                spec.mix_means.clear();
                for (size_t i = 0; i < v->size(); ++i)
                    spec.mix_means.push_back(num_array((*v)[i], label + ".means"));
            }
            if (const json* v = maybe(j, "weights"))
                spec.mix_weights = num_array(*v, label + ".weights");
            spec.mix_std = get_num(j, label, "std", spec.mix_std);
            break;
        }
        case DatasetSpec::Kind::swiss_roll:
            check_keys(j, label, {"kind", "noise"});
            spec.roll_noise = get_num(j, label, "noise", spec.roll_noise);
            break;
        case DatasetSpec::Kind::checkerboard:
            check_keys(j, label, {"kind", "cells"});
            spec.board_cells = int(get_int(j, label, "cells", spec.board_cells));
            break;
    }
    return spec;
}

json dataset_to_json(const DatasetSpec& d) {
    json j;
    j["kind"] = kind_name(d.kind);
    switch (d.kind) {
        case DatasetSpec::Kind::gaussian:
            j["mean"] = d.mean;
            j["std"] = d.std_dev;
            break;
        case DatasetSpec::Kind::gaussian_mixture:
            j["means"] = d.mix_means;
            j["weights"] = d.mix_weights;
            j["std"] = d.mix_std;
            break;
        case DatasetSpec::Kind::swiss_roll:
            j["noise"] = d.roll_noise;
            break;
        case DatasetSpec::Kind::checkerboard:
            j["cells"] = d.board_cells;
            break;
    }
    return j;
}

}  // namespace

TrainConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("config: expected a JSON object");
    check_keys(j, "config",
               {"variant", "seed", "steps", "batch", "critic_updates_per_generator",
                "sigma_generator", "sigma_critic", "warmup_steps", "latent_dim", "hidden",
                "activation", "eval_every", "adam", "dataset"});
    TrainConfig cfg;
    try {
        cfg.variant = variant_from_name(get_str(j, "config", "variant", variant_name(cfg.variant)));
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("config.variant: ") + e.what());
    }
    cfg.seed = get_u64(j, "config", "seed", cfg.seed);
    cfg.steps = get_int(j, "config", "steps", cfg.steps);
    cfg.batch = get_int(j, "config", "batch", cfg.batch);
    cfg.critic_updates_per_generator =
        get_int(j, "config", "critic_updates_per_generator", cfg.critic_updates_per_generator);
    cfg.sigma_generator = get_num(j, "config", "sigma_generator", cfg.sigma_generator);
    cfg.sigma_critic = get_num(j, "config", "sigma_critic", cfg.sigma_critic);
    cfg.warmup_steps = get_int(j, "config", "warmup_steps", cfg.warmup_steps);
    cfg.latent_dim = int(get_int(j, "config", "latent_dim", cfg.latent_dim));
    if (const json* v = maybe(j, "hidden")) cfg.hidden = int_array(*v, "config.hidden");
    try {
        cfg.act = activation_from_name(get_str(j, "config", "activation", activation_name(cfg.act)));
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("config.activation: ") + e.what());
    }
    cfg.eval_every = get_int(j, "config", "eval_every", cfg.eval_every);
    if (const json* a = maybe(j, "adam")) {
        if (!a->is_object()) throw std::runtime_error("config.adam: expected an object");
        check_keys(*a, "config.adam", {"lr", "beta1", "beta2", "eps", "ema"});
        cfg.adam.lr = get_num(*a, "config.adam", "lr", cfg.adam.lr);
        cfg.adam.beta1 = get_num(*a, "config.adam", "beta1", cfg.adam.beta1);
        cfg.adam.beta2 = get_num(*a, "config.adam", "beta2", cfg.adam.beta2);
        cfg.adam.eps_adam = get_num(*a, "config.adam", "eps", cfg.adam.eps_adam);
        cfg.adam.ema_decay = get_num(*a, "config.adam", "ema", cfg.adam.ema_decay);
    }
    if (const json* d = maybe(j, "dataset")) cfg.dataset = dataset_from_json(*d, "config.dataset");
    validate(cfg);
    return cfg;
}

DatasetSpec dataset_spec_from_json_text(const std::string& text, const std::string& label) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(label + ": " + e.what());
    }
    DatasetSpec spec = dataset_from_json(j, label);
    validate(spec);
    return spec;
}

std::string config_to_json_text(const TrainConfig& cfg) {
    json j;
    j["variant"] = variant_name(cfg.variant);
    j["seed"] = cfg.seed;
    j["steps"] = cfg.steps;
    j["batch"] = cfg.batch;
    j["critic_updates_per_generator"] = cfg.critic_updates_per_generator;
    j["sigma_generator"] = cfg.sigma_generator;
    j["sigma_critic"] = cfg.sigma_critic;
    j["warmup_steps"] = cfg.warmup_steps;
    j["latent_dim"] = cfg.latent_dim;
    j["hidden"] = cfg.hidden;
    j["activation"] = activation_name(cfg.act);
    j["eval_every"] = cfg.eval_every;
    j["adam"] = {{"lr", cfg.adam.lr},
                 {"beta1", cfg.adam.beta1},
                 {"beta2", cfg.adam.beta2},
                 {"eps", cfg.adam.eps_adam},
                 {"ema", cfg.adam.ema_decay}};
    j["dataset"] = dataset_to_json(cfg.dataset);
    return j.dump(2) + "\n";
}

// ------------------------------------------------------------- checkpoints --

namespace {

json layers_to_json(const std::vector<LayerParams>& layers) {
    json arr = json::array();
    for (const auto& l : layers) {
        json o;
        o["w"] = l.w.data;
        o["b"] = l.b.data;
        arr.push_back(std::move(o));
    }
    return arr;
}

std::vector<LayerParams> layers_from_json(const json& arr, const std::vector<int64_t>& dims,
                                          const std::string& label) {
    if (!arr.is_array() || arr.size() != dims.size() - 1)
        throw std::runtime_error(label + ": expected " + std::to_string(dims.size() - 1) +
                                 " layer objects");
    std::vector<LayerParams> out;
    for (size_t k = 0; k + 1 < dims.size(); ++k) {
        const json& o = arr[k];
        std::string at = label + "[" + std::to_string(k) + "]";
        if (!o.is_object()) throw std::runtime_error(at + ": expected an object");
        check_keys(o, at, {"w", "b"});
        const json* w = maybe(o, "w");
        const json* b = maybe(o, "b");
        if (!w || !b) throw std::runtime_error(at + ": needs both \"w\" and \"b\"");
        int64_t rows = dims[k + 1], cols = dims[k];
        std::vector<double> wv = num_array(*w, at + ".w");
        std::vector<double> bv = num_array(*b, at + ".b");
        if (int64_t(wv.size()) != rows * cols)
            throw std::runtime_error(at + ".w: expected " + std::to_string(rows * cols) +
                                     " entries");
        if (int64_t(bv.size()) != rows)
            throw std::runtime_error(at + ".b: expected " + std::to_string(rows) + " entries");
        LayerParams l;
        l.w = Tensor::mat(rows, cols, std::move(wv));
        l.b = Tensor::vec(std::move(bv));
        out.push_back(std::move(l));
    }
    return out;
}

}  // namespace

void save_checkpoint(const fs::path& path, const MlpParams& p, const OptState& opt) {
    validate(p);
    size_t n = p.layers.size();
    if (opt.m.size() != n || opt.v.size() != n || opt.ema.size() != n)
        throw std::runtime_error("checkpoint save: optimizer state does not match the network");
    std::vector<int64_t> dims;
    dims.push_back(p.layers.front().w.shape.d[1]);
    for (const auto& l : p.layers) dims.push_back(l.w.shape.d[0]);
    json j;
    j["format_version"] = kCheckpointFormat;
    j["model"] = {{"dims", dims},
                  {"activation", activation_name(p.act)},
                  {"time_conditioned", p.time_conditioned}};
    j["layers"] = layers_to_json(p.layers);
    j["opt"] = {{"step", opt.step}, {"m", layers_to_json(opt.m)}, {"v", layers_to_json(opt.v)}};
    j["ema"] = layers_to_json(opt.ema);
    write_text_atomic(path, j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& path) {
    const std::string label = "checkpoint " + path.string();
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw std::runtime_error(label + ": " + e.what());
    }
    if (!j.is_object()) throw std::runtime_error(label + ": expected a JSON object");
    check_keys(j, label, {"format_version", "model", "layers", "opt", "ema"});
    if (!maybe(j, "format_version"))
        throw std::runtime_error(label + ": missing format_version");
    int64_t version = get_int(j, label, "format_version", -1);
    if (version != kCheckpointFormat)
        throw std::runtime_error(label + ": unsupported format_version " +
                                 std::to_string(version));

    const json* model = maybe(j, "model");
    if (!model || !model->is_object())
        throw std::runtime_error(label + ".model: expected an object");
    check_keys(*model, label + ".model", {"dims", "activation", "time_conditioned"});
    const json* dims_j = maybe(*model, "dims");
    if (!dims_j) throw std::runtime_error(label + ".model.dims: missing");
    std::vector<int> dims_i = int_array(*dims_j, label + ".model.dims");
    if (dims_i.size() < 2) throw std::runtime_error(label + ".model.dims: need at least 2");
    std::vector<int64_t> dims(dims_i.begin(), dims_i.end());

    MlpParams p;
    try {
        p.act = activation_from_name(get_str(*model, label + ".model", "activation", ""));
    } catch (const std::exception& e) {
        throw std::runtime_error(label + ".model.activation: " + e.what());
    }
    p.time_conditioned = get_bool(*model, label + ".model", "time_conditioned");
    const json* layers = maybe(j, "layers");
    if (!layers) throw std::runtime_error(label + ".layers: missing");
    p.layers = layers_from_json(*layers, dims, label + ".layers");
    validate(p);

    const json* opt = maybe(j, "opt");
    if (!opt || !opt->is_object()) throw std::runtime_error(label + ".opt: expected an object");
    check_keys(*opt, label + ".opt", {"step", "m", "v"});
    OptState s;
    s.step = get_int(*opt, label + ".opt", "step", -1);
    if (s.step < 0) throw std::runtime_error(label + ".opt.step: expected a count");
    const json* m = maybe(*opt, "m");
    const json* v = maybe(*opt, "v");
    const json* ema = maybe(j, "ema");
    if (!m || !v || !ema)
        throw std::runtime_error(label + ": needs opt.m, opt.v, and ema arrays");
    s.m = layers_from_json(*m, dims, label + ".opt.m");
    s.v = layers_from_json(*v, dims, label + ".opt.v");
    s.ema = layers_from_json(*ema, dims, label + ".ema");
    return Checkpoint{std::move(p), std::move(s)};
}

// ------------------------------------------------------------------- CSV --

void write_losses_csv(const fs::path& path, const std::vector<LossRow>& rows) {
    std::string out = "step,loss_critic,loss_generator\n";
    for (const auto& r : rows) {
        out += std::to_string(r.step);
        out += ',';
        out += format_double(r.loss_critic);
        out += ',';
        out += format_double(r.loss_generator);
        out += '\n';
    }
    write_text_atomic(path, out);
}

void write_timings_csv(const fs::path& path, const std::vector<LossRow>& rows) {
    std::string out = "step,wall_ms\n";
    for (const auto& r : rows) {
        out += std::to_string(r.step);
        out += ',';
        out += format_double(r.wall_ms);
        out += '\n';
    }
    write_text_atomic(path, out);
}

void write_samples_csv(const fs::path& path, const std::vector<double>& flat, int dim) {
    if (dim < 1 || flat.size() % size_t(dim) != 0)
        throw std::invalid_argument("samples csv: buffer is not n x dim");
    std::string out;
    for (int k = 0; k < dim; ++k) {
        if (k) out += ',';
        out += "x" + std::to_string(k);
    }
    out += '\n';
    size_t n = flat.size() / size_t(dim);
    for (size_t i = 0; i < n; ++i) {
        for (int k = 0; k < dim; ++k) {
            if (k) out += ',';
            out += format_double(flat[i * size_t(dim) + size_t(k)]);
        }
        out += '\n';
    }
    write_text_atomic(path, out);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    size_t start = 0;
    while (true) {
        size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            cells.push_back(line.substr(start));
            return cells;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

}  // namespace

SampleTable read_samples_csv(const fs::path& path) {
    std::string text = read_text(path);
    SampleTable table;
    size_t pos = 0;
    int64_t line_no = 0;
    while (pos < text.size()) {
        size_t nl = text.find('\n', pos);
        size_t end = nl == std::string::npos ? text.size() : nl;
        std::string line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pos = nl == std::string::npos ? text.size() : nl + 1;
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (line_no == 1) {
            table.dim = int(cells.size());
            continue;
        }
        if (int(cells.size()) != table.dim)
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": expected " + std::to_string(table.dim) + " columns");
        for (const auto& c : cells) {
            try {
                table.flat.push_back(parse_double(c));
            } catch (const std::exception& e) {
                throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " +
                                         e.what());
            }
        }
        ++table.n;
    }
    if (table.dim == 0) throw std::runtime_error(path.string() + ": missing header row");
    return table;
}

void write_field_csv(const fs::path& path, const std::vector<FieldGridRow>& rows) {
    std::string out = "x,y,vx,vy,finite\n";
    for (const auto& r : rows) {
        out += format_double(r.x);
        out += ',';
        out += format_double(r.y);
        out += ',';
        out += format_double(r.vx);
        out += ',';
        out += format_double(r.vy);
        out += ',';
        out += r.finite ? '1' : '0';
        out += '\n';
    }
    write_text_atomic(path, out);
}

// ---------------------------------------------------------------- reports --

std::string metric_report_json(const MetricReport& r) {
    json j;
    j["energy_distance"] = r.energy_distance;
    j["sliced_wasserstein"] = r.sliced_wasserstein;
    j["n_a"] = r.n_a;
    j["n_b"] = r.n_b;
    j["seed"] = r.seed;
    return j.dump(2) + "\n";
}

std::string divergence_json(const DivergenceEstimate& e, uint64_t seed) {
    json j;
    j["value"] = e.value;
    j["stderr"] = e.std_error;
    j["n_pairs"] = e.n_pairs;
    j["n_times"] = e.n_times;
    j["estimator"] = e.estimator;
    j["seed"] = seed;
    return j.dump(2) + "\n";
}

}  // namespace midgen
