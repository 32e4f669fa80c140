// Two-sample quality metrics and field-grid exports.
//
// energy_distance is the V-statistic form 2 mean|a-b| - mean|a-a'| -
// mean|b-b'| over all pairs including self-pairs, so it is exactly zero on
// identical sample sets. sliced_wasserstein averages exact 1-D Wasserstein-1
// distances over random unit directions. Both have OpenMP row fan-outs with
// fixed-order chunk merging (bit-identical at any thread count), serial
// twins for testing, and a brute-force reference for the energy distance.
#pragma once

#include <cstdint>
#include <vector>

#include "midgen/estimator.hpp"
#include "midgen/rng.hpp"

namespace midgen {

struct MetricReport {
    double energy_distance = 0.0;
    double sliced_wasserstein = 0.0;
    int64_t n_a = 0;
    int64_t n_b = 0;
    uint64_t seed = 0;
};

// Row-major flat buffers: a is n_a x dim, b is n_b x dim.
double energy_distance(const double* a, int64_t n_a, const double* b, int64_t n_b, int dim);
double energy_distance_serial(const double* a, int64_t n_a, const double* b, int64_t n_b,
                              int dim);
// Textbook nested loop, kept as the oracle the fast paths are tested against.
double energy_distance_reference(const double* a, int64_t n_a, const double* b, int64_t n_b,
                                 int dim);

// Exact W1 between two 1-D empirical distributions (any sizes): sorts both
// and integrates the quantile difference; equal sizes reduce to the mean
// absolute sorted difference.
double wasserstein1(std::vector<double> a, std::vector<double> b);

// Mean W1 over n_projections random unit directions (dim normals per
// direction, normalized, drawn serially before the fan-out).
double sliced_wasserstein(const double* a, int64_t n_a, const double* b, int64_t n_b, int dim,
                          int n_projections, Pcg32& rng);
double sliced_wasserstein_serial(const double* a, int64_t n_a, const double* b, int64_t n_b,
                                 int dim, int n_projections, Pcg32& rng);

// Both metrics with the projection stream derived from the seed.
MetricReport compute_metrics(const std::vector<double>& a, const std::vector<double>& b, int dim,
                             int n_projections, uint64_t seed);

// ------------------------------------------------------------- field grid --

struct GridSpec {
    double min = -3.0;
    double max = 3.0;
    int steps = 25;  // per axis, >= 2
};

struct FieldGridRow {
    double x = 0.0, y = 0.0;    // grid point
    double vx = 0.0, vy = 0.0;  // field value
    bool finite = true;         // non-finite values are flagged, never fatal
};

// Evaluates a 2-D field on the square grid at fixed t, outer loop over x,
// inner over y. steps x steps rows.
std::vector<FieldGridRow> field_grid(const FieldFn& f, double t, const GridSpec& grid);

}  // namespace midgen
