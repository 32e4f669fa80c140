// MLP generator and time-conditioned critic, Adam, and EMA shadows.
//
// The critic sees [x, t, sin(2 pi t), cos(2 pi t)]: the three time features
// are appended to the data vector, so a conditioned net's first layer takes
// data dim + 3 inputs. Weights start scaled-uniform U(-1/sqrt(fan_in),
// +1/sqrt(fan_in)), biases start at zero. Hidden may be empty (affine map).
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "midgen/autodiff.hpp"
#include "midgen/rng.hpp"
#include "midgen/tensor.hpp"

namespace midgen {

inline constexpr int kTimeFeatures = 3;

std::array<double, kTimeFeatures> time_features(double t);

enum class Activation { silu, tanh };
Activation activation_from_name(const std::string& name);
const char* activation_name(Activation a);

struct LayerParams {
    Tensor w;  // [out, in]
    Tensor b;  // [out]
};

struct MlpParams {
    std::vector<LayerParams> layers;
    Activation act = Activation::silu;
    bool time_conditioned = false;

    int in_dim() const { return int(layers.front().w.shape.d[1]); }
    int out_dim() const { return int(layers.back().w.shape.d[0]); }
    int data_in_dim() const { return in_dim() - (time_conditioned ? kTimeFeatures : 0); }
    size_t param_count() const;
};

void validate(const MlpParams& p);

MlpParams init_mlp(int in_dim, const std::vector<int>& hidden, int out_dim, Activation act,
                   bool time_conditioned, Pcg32& rng);

// Plain forward pass, no tape. For conditioned nets x is the data vector and
// t supplies the appended features; unconditioned nets ignore t.
void mlp_forward(const MlpParams& p, std::span<const double> x, double t, std::span<double> out);
Tensor generator_forward(const MlpParams& g, const Tensor& z);
Tensor critic_forward(const MlpParams& c, const Tensor& x, double t);

// Tape forward. Parameters enter as borrowing leaves (no copy), so the
// MlpParams object must outlive the tape use. Gradients for layer k live at
// ids.layers[k] after backward.
struct MlpLeafIds {
    std::vector<std::array<int, 2>> layers;  // (w, b) leaf ids
};
MlpLeafIds mlp_leaves(Tape& tape, const MlpParams& p);
int mlp_forward_on_tape(Tape& tape, const MlpParams& p, const MlpLeafIds& ids, int x_node,
                        double t);

// Gradient container mirroring MlpParams layer shapes.
using ParamGrads = std::vector<LayerParams>;
ParamGrads zero_grads(const MlpParams& p);
void accumulate_grads(ParamGrads& acc, const Tape& tape, const MlpLeafIds& ids);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.0;   // first-moment decay; 0 makes the update RMSProp-like
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    double ema_decay = 0.999;
};

struct OptState {
    int64_t step = 0;
    ParamGrads m, v;
    std::vector<LayerParams> ema;
    static OptState init(const MlpParams& p);
};

// Standard Adam with bias correction, in place. Rejects non-finite gradient
// entries naming the parameter path (e.g. "layers[2].w").
void adam_step(MlpParams& p, OptState& s, const ParamGrads& grads, const AdamConfig& cfg);

// ema <- decay * ema + (1 - decay) * params
void ema_update(OptState& s, const MlpParams& p, double decay);

MlpParams with_params(const MlpParams& like, const std::vector<LayerParams>& layers);

}  // namespace midgen
