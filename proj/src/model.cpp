#include "midgen/model.hpp"

#include <cmath>
#include <stdexcept>

namespace midgen {

std::array<double, kTimeFeatures> time_features(double t) {
    return {t, std::sin(2.0 * M_PI * t), std::cos(2.0 * M_PI * t)};
}

Activation activation_from_name(const std::string& name) {
    if (name == "silu") return Activation::silu;
    if (name == "tanh") return Activation::tanh;
    throw std::invalid_argument("unknown activation: " + name);
}

const char* activation_name(Activation a) {
    return a == Activation::silu ? "silu" : "tanh";
}

size_t MlpParams::param_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += size_t(l.w.numel() + l.b.numel());
    return n;
}

void validate(const MlpParams& p) {
    if (p.layers.empty()) throw std::invalid_argument("mlp: no layers");
    for (size_t i = 0; i < p.layers.size(); ++i) {
        const auto& l = p.layers[i];
        if (l.w.shape.ndim != 2 || l.b.shape.ndim != 1)
            throw std::invalid_argument("mlp: layer " + std::to_string(i) + " has bad ranks");
        if (l.w.shape.d[0] != l.b.shape.d[0])
            throw std::invalid_argument("mlp: layer " + std::to_string(i) +
                                        " weight/bias rows differ");
        if (i > 0 && l.w.shape.d[1] != p.layers[i - 1].w.shape.d[0])
            throw std::invalid_argument("mlp: layer " + std::to_string(i) +
                                        " input dim breaks the chain");
    }
}

MlpParams init_mlp(int in_dim, const std::vector<int>& hidden, int out_dim, Activation act,
                   bool time_conditioned, Pcg32& rng) {
    if (in_dim < 1 || out_dim < 1) throw std::invalid_argument("init_mlp: dims must be >= 1");
    for (int h : hidden)
        if (h < 1) throw std::invalid_argument("init_mlp: hidden dims must be >= 1");
    MlpParams p;
    p.act = act;
    p.time_conditioned = time_conditioned;
    int prev = in_dim + (time_conditioned ? kTimeFeatures : 0);
    std::vector<int> dims(hidden);
    dims.push_back(out_dim);
    for (int d : dims) {
        LayerParams l;
        l.w = Tensor::zeros(Shape::mat(d, prev));
        l.b = Tensor::zeros(Shape::vec(d));
        double bound = 1.0 / std::sqrt(double(prev));
        for (double& x : l.w.data) x = rng.uniform(-bound, bound);
        p.layers.push_back(std::move(l));
        prev = d;
    }
    return p;
}

namespace {

void apply_activation(Activation act, std::span<double> h) {
    if (act == Activation::silu) {
        // same operation order as the tape kernel so both forwards agree bitwise
        for (double& x : h) {
            double s = 1.0 / (1.0 + std::exp(-x));
            x = x * s;
        }
    } else {
        for (double& x : h) x = std::tanh(x);
    }
}

}  // namespace

void mlp_forward(const MlpParams& p, std::span<const double> x, double t, std::span<double> out) {
    int data_dim = p.data_in_dim();
    if (int(x.size()) != data_dim)
        throw std::invalid_argument("mlp_forward: input length " + std::to_string(x.size()) +
                                    " != " + std::to_string(data_dim));
    if (int(out.size()) != p.out_dim())
        throw std::invalid_argument("mlp_forward: output length mismatch");

    std::vector<double> cur(x.begin(), x.end());
    if (p.time_conditioned) {
        auto tf = time_features(t);
        cur.insert(cur.end(), tf.begin(), tf.end());
    }
    std::vector<double> next;
    for (size_t li = 0; li < p.layers.size(); ++li) {
        const auto& l = p.layers[li];
        int64_t rows = l.w.shape.d[0], cols = l.w.shape.d[1];
        next.assign(size_t(rows), 0.0);
        for (int64_t i = 0; i < rows; ++i) {
            double acc = 0.0;
            const double* wrow = l.w.data.data() + i * cols;
            for (int64_t j = 0; j < cols; ++j) acc += wrow[j] * cur[size_t(j)];
            next[size_t(i)] = acc + l.b.data[size_t(i)];
        }
        if (li + 1 < p.layers.size()) apply_activation(p.act, next);
        cur.swap(next);
    }
    for (size_t i = 0; i < out.size(); ++i) out[i] = cur[i];
}

Tensor generator_forward(const MlpParams& g, const Tensor& z) {
    if (g.time_conditioned)
        throw std::invalid_argument("generator_forward: generator must not be time conditioned");
    Tensor out = Tensor::zeros(Shape::vec(g.out_dim()));
    mlp_forward(g, z.view(), 0.0, out.data);
    return out;
}

Tensor critic_forward(const MlpParams& c, const Tensor& x, double t) {
    if (!c.time_conditioned)
        throw std::invalid_argument("critic_forward: critic must be time conditioned");
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("critic_forward: t outside [0,1]");
    Tensor out = Tensor::zeros(Shape::vec(c.out_dim()));
    mlp_forward(c, x.view(), t, out.data);
    return out;
}

MlpLeafIds mlp_leaves(Tape& tape, const MlpParams& p) {
    MlpLeafIds ids;
    ids.layers.reserve(p.layers.size());
    for (const auto& l : p.layers)
        ids.layers.push_back({tape.leaf_external(l.w.shape, l.w.data.data()),
                              tape.leaf_external(l.b.shape, l.b.data.data())});
    return ids;
}

int mlp_forward_on_tape(Tape& tape, const MlpParams& p, const MlpLeafIds& ids, int x_node,
                        double t) {
    if (ids.layers.size() != p.layers.size())
        throw std::invalid_argument("mlp_forward_on_tape: leaf ids do not match layers");
    int cur = x_node;
    if (p.time_conditioned) {
        auto tf = time_features(t);
        int tf_leaf = tape.leaf(Shape::vec(kTimeFeatures), tf);
        cur = tape.apply(Op::concat, cur, tf_leaf);
    }
    for (size_t li = 0; li < p.layers.size(); ++li) {
        cur = tape.apply(Op::matmul, ids.layers[li][0], cur);
        cur = tape.apply(Op::add, cur, ids.layers[li][1]);
        if (li + 1 < p.layers.size())
            cur = tape.apply(p.act == Activation::silu ? Op::silu : Op::tanh, cur);
    }
    return cur;
}

ParamGrads zero_grads(const MlpParams& p) {
    ParamGrads g;
    g.reserve(p.layers.size());
    for (const auto& l : p.layers)
        g.push_back({Tensor::zeros(l.w.shape), Tensor::zeros(l.b.shape)});
    return g;
}

void accumulate_grads(ParamGrads& acc, const Tape& tape, const MlpLeafIds& ids) {
    for (size_t li = 0; li < ids.layers.size(); ++li) {
        auto gw = tape.grad(ids.layers[li][0]);
        auto gb = tape.grad(ids.layers[li][1]);
        double* aw = acc[li].w.data.data();
        double* ab = acc[li].b.data.data();
        for (size_t i = 0; i < gw.size(); ++i) aw[i] += gw[i];
        for (size_t i = 0; i < gb.size(); ++i) ab[i] += gb[i];
    }
}

OptState OptState::init(const MlpParams& p) {
    OptState s;
    s.m = zero_grads(p);
    s.v = zero_grads(p);
    s.ema = p.layers;
    return s;
}

namespace {

void adam_tensor(std::vector<double>& param, std::vector<double>& m, std::vector<double>& v,
                 const std::vector<double>& g, const AdamConfig& c, double bc1, double bc2,
                 const std::string& path) {
    if (param.size() != g.size())
        throw std::invalid_argument("adam_step: gradient shape mismatch at " + path);
    for (size_t i = 0; i < param.size(); ++i) {
        if (!std::isfinite(g[i]))
            throw std::runtime_error("adam_step: non-finite gradient at " + path + "[" +
                                     std::to_string(i) + "]");
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
        double mh = m[i] / bc1;
        double vh = v[i] / bc2;
        param[i] -= c.lr * mh / (std::sqrt(vh) + c.eps_adam);
    }
}

}  // namespace

void adam_step(MlpParams& p, OptState& s, const ParamGrads& grads, const AdamConfig& cfg) {
    if (grads.size() != p.layers.size())
        throw std::invalid_argument("adam_step: gradient layer count mismatch");
    s.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, double(s.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, double(s.step));
    for (size_t li = 0; li < p.layers.size(); ++li) {
        std::string base = "layers[" + std::to_string(li) + "]";
        adam_tensor(p.layers[li].w.data, s.m[li].w.data, s.v[li].w.data, grads[li].w.data, cfg,
                    bc1, bc2, base + ".w");
        adam_tensor(p.layers[li].b.data, s.m[li].b.data, s.v[li].b.data, grads[li].b.data, cfg,
                    bc1, bc2, base + ".b");
    }
}

void ema_update(OptState& s, const MlpParams& p, double decay) {
    for (size_t li = 0; li < p.layers.size(); ++li) {
        auto blend = [&](std::vector<double>& e, const std::vector<double>& q) {
            for (size_t i = 0; i < e.size(); ++i) e[i] = decay * e[i] + (1.0 - decay) * q[i];
        };
        blend(s.ema[li].w.data, p.layers[li].w.data);
        blend(s.ema[li].b.data, p.layers[li].b.data);
    }
}

MlpParams with_params(const MlpParams& like, const std::vector<LayerParams>& layers) {
    MlpParams p = like;
    p.layers = layers;
    return p;
}

}  // namespace midgen
