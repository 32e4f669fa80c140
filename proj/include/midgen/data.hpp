// Toy target distributions and the latent prior, all seeded and reproducible.
//
// Draw order per sample is part of the reproducibility contract:
//   gaussian       dim normals
//   mixture        1 uniform (component pick), then dim normals
//   swiss_roll     1 uniform (angle), then 2 normals (isotropic noise)
//   checkerboard   4 uniforms (column, row half-index, two in-cell offsets)
//   prior          dim normals
// Samples are packed row-major into flat double buffers (n x dim).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "midgen/rng.hpp"

namespace midgen {

struct DatasetSpec {
    enum class Kind { gaussian, gaussian_mixture, swiss_roll, checkerboard };
    Kind kind = Kind::swiss_roll;

    // gaussian: isotropic N(mean, std_dev^2), dim 1 or 2 from mean length
    std::vector<double> mean{0.0, 0.0};
    double std_dev = 1.0;

    // gaussian_mixture: component means (each length 2), positive weights
    // summing to 1, shared isotropic component std
    std::vector<std::vector<double>> mix_means;
    std::vector<double> mix_weights;
    double mix_std = 0.5;

    // swiss_roll: isotropic noise std in raw spiral units, added before the
    // frozen normalization
    double roll_noise = 0.4;

    // checkerboard: even number of cells per side on [-2,2]^2
    int board_cells = 4;

    int dim() const;
};

void validate(const DatasetSpec& spec);

const char* kind_name(DatasetSpec::Kind k);
DatasetSpec::Kind kind_from_name(const std::string& name);

// Appends n samples (n * dim doubles) to out.
void sample(const DatasetSpec& spec, size_t n, Pcg32& rng, std::vector<double>& out);

// Standard normal latent draws, dim matching the data space.
void sample_prior(int dim, size_t n, Pcg32& rng, std::vector<double>& out);

// Swiss-roll spiral before normalization: angle u ~ U[1.5 pi, 4.5 pi], point
// (u cos u, u sin u) plus isotropic noise. Exposed for the calibration test.
void swiss_roll_raw(double noise_std, size_t n, Pcg32& rng, std::vector<double>& out);

// Frozen affine normalization constants: mean and per-axis std of 10^5 raw
// draws at the default noise (seed kSwissCalibrationSeed, data stream). The
// normalization is this fixed map regardless of the configured noise.
inline constexpr uint64_t kSwissCalibrationSeed = 1905;
extern const double kSwissMean[2];
extern const double kSwissStd[2];

}  // namespace midgen
