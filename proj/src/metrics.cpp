#include "midgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace midgen {

namespace {

double pair_dist(const double* p, const double* q, int dim) {
    double s = 0.0;
    for (int k = 0; k < dim; ++k) {
        double d = p[k] - q[k];
        s += d * d;
    }
    return std::sqrt(s);
}

void check_sets(const double* a, int64_t n_a, const double* b, int64_t n_b, int dim) {
    if (!a || !b || n_a < 1 || n_b < 1)
        throw std::invalid_argument("metrics: both sample sets must be nonempty");
    if (dim < 1) throw std::invalid_argument("metrics: dim must be >= 1");
}

// Sum of |rows of p - all rows of q|, one partial per p-row, merged in row
// order. Each row is owned by exactly one thread, so the result does not
// depend on the thread count.
double cross_sum(const double* p, int64_t n_p, const double* q, int64_t n_q, int dim,
                 bool parallel) {
    std::vector<double> row(size_t(n_p), 0.0);
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n_p; ++i) {
            double s = 0.0;
            const double* pi = p + i * dim;
            for (int64_t j = 0; j < n_q; ++j) s += pair_dist(pi, q + j * dim, dim);
            row[size_t(i)] = s;
        }
    } else {
        for (int64_t i = 0; i < n_p; ++i) {
            double s = 0.0;
            const double* pi = p + i * dim;
            for (int64_t j = 0; j < n_q; ++j) s += pair_dist(pi, q + j * dim, dim);
            row[size_t(i)] = s;
        }
    }
    double total = 0.0;
    for (double s : row) total += s;
    return total;
}

double energy_impl(const double* a, int64_t n_a, const double* b, int64_t n_b, int dim,
                   bool parallel) {
    check_sets(a, n_a, b, n_b, dim);
    double ab = cross_sum(a, n_a, b, n_b, dim, parallel) / (double(n_a) * double(n_b));
    double aa = cross_sum(a, n_a, a, n_a, dim, parallel) / (double(n_a) * double(n_a));
    double bb = cross_sum(b, n_b, b, n_b, dim, parallel) / (double(n_b) * double(n_b));
    return 2.0 * ab - aa - bb;
}

}  // namespace

double energy_distance(const double* a, int64_t n_a, const double* b, int64_t n_b, int dim) {
    return energy_impl(a, n_a, b, n_b, dim, true);
}

double energy_distance_serial(const double* a, int64_t n_a, const double* b, int64_t n_b,
                              int dim) {
    return energy_impl(a, n_a, b, n_b, dim, false);
}

double energy_distance_reference(const double* a, int64_t n_a, const double* b, int64_t n_b,
                                 int dim) {
    check_sets(a, n_a, b, n_b, dim);
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (int64_t i = 0; i < n_a; ++i)
        for (int64_t j = 0; j < n_b; ++j) ab += pair_dist(a + i * dim, b + j * dim, dim);
    for (int64_t i = 0; i < n_a; ++i)
        for (int64_t j = 0; j < n_a; ++j) aa += pair_dist(a + i * dim, a + j * dim, dim);
    for (int64_t i = 0; i < n_b; ++i)
        for (int64_t j = 0; j < n_b; ++j) bb += pair_dist(b + i * dim, b + j * dim, dim);
    return 2.0 * ab / (double(n_a) * double(n_b)) - aa / (double(n_a) * double(n_a)) -
           bb / (double(n_b) * double(n_b));
}

double wasserstein1(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("wasserstein1: both samples must be nonempty");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    size_t n_a = a.size(), n_b = b.size();
    if (n_a == n_b) {
        double s = 0.0;
        for (size_t i = 0; i < n_a; ++i) s += std::fabs(a[i] - b[i]);
        return s / double(n_a);
    }
    // integrate |F_a^{-1}(u) - F_b^{-1}(u)| over the merged quantile segments
    double total = 0.0, u = 0.0;
    size_t i = 0, j = 0;
    while (i < n_a && j < n_b) {
        double next_a = double(i + 1) / double(n_a);
        double next_b = double(j + 1) / double(n_b);
        double next = std::min(next_a, next_b);
        total += (next - u) * std::fabs(a[i] - b[j]);
        u = next;
        if (next_a <= next) ++i;
        if (next_b <= next) ++j;
    }
    return total;
}

namespace {

double sliced_impl(const double* a, int64_t n_a, const double* b, int64_t n_b, int dim,
                   int n_projections, Pcg32& rng, bool parallel) {
    check_sets(a, n_a, b, n_b, dim);
    if (n_projections < 1)
        throw std::invalid_argument("sliced_wasserstein: need at least one projection");
    // directions come off the stream before the fan-out, dim normals each
    std::vector<double> dirs(size_t(n_projections) * size_t(dim));
    for (int p = 0; p < n_projections; ++p) {
        double* u = dirs.data() + size_t(p) * size_t(dim);
        double norm2 = 0.0;
        for (int k = 0; k < dim; ++k) {
            u[k] = rng.normal();
            norm2 += u[k] * u[k];
        }
        if (norm2 > 0.0) {
            double inv = 1.0 / std::sqrt(norm2);
            for (int k = 0; k < dim; ++k) u[k] *= inv;
        } else {
            u[0] = 1.0;  // unreachable in practice; keep the direction valid
        }
    }
    std::vector<double> w1s(size_t(n_projections), 0.0);
    auto one = [&](int p) {
        const double* u = dirs.data() + size_t(p) * size_t(dim);
        std::vector<double> pa, pb;
        pa.resize(size_t(n_a));
        pb.resize(size_t(n_b));
        for (int64_t i = 0; i < n_a; ++i) {
            double s = 0.0;
            for (int k = 0; k < dim; ++k) s += u[k] * a[i * dim + k];
            pa[size_t(i)] = s;
        }
        for (int64_t i = 0; i < n_b; ++i) {
            double s = 0.0;
            for (int k = 0; k < dim; ++k) s += u[k] * b[i * dim + k];
            pb[size_t(i)] = s;
        }
        w1s[size_t(p)] = wasserstein1(std::move(pa), std::move(pb));
    };
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (int p = 0; p < n_projections; ++p) one(p);
    } else {
        for (int p = 0; p < n_projections; ++p) one(p);
    }
    double total = 0.0;
    for (double w : w1s) total += w;
    return total / double(n_projections);
}

}  // namespace

double sliced_wasserstein(const double* a, int64_t n_a, const double* b, int64_t n_b, int dim,
                          int n_projections, Pcg32& rng) {
    return sliced_impl(a, n_a, b, n_b, dim, n_projections, rng, true);
}

double sliced_wasserstein_serial(const double* a, int64_t n_a, const double* b, int64_t n_b,
                                 int dim, int n_projections, Pcg32& rng) {
    return sliced_impl(a, n_a, b, n_b, dim, n_projections, rng, false);
}

MetricReport compute_metrics(const std::vector<double>& a, const std::vector<double>& b, int dim,
                             int n_projections, uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("compute_metrics: dim must be >= 1");
    if (a.size() % size_t(dim) != 0 || b.size() % size_t(dim) != 0)
        throw std::invalid_argument("compute_metrics: buffer sizes are not multiples of dim");
    MetricReport r;
    r.n_a = int64_t(a.size()) / dim;
    r.n_b = int64_t(b.size()) / dim;
    r.seed = seed;
    r.energy_distance = energy_distance(a.data(), r.n_a, b.data(), r.n_b, dim);
    Pcg32 rng = make_stream(seed, Stream::metric_proj);
    r.sliced_wasserstein =
        sliced_wasserstein(a.data(), r.n_a, b.data(), r.n_b, dim, n_projections, rng);
    return r;
}

std::vector<FieldGridRow> field_grid(const FieldFn& f, double t, const GridSpec& grid) {
    if (grid.steps < 2) throw std::invalid_argument("field_grid: steps must be >= 2");
    if (!(grid.max > grid.min)) throw std::invalid_argument("field_grid: max must exceed min");
    std::vector<FieldGridRow> rows;
    rows.reserve(size_t(grid.steps) * size_t(grid.steps));
    double span = (grid.max - grid.min) / double(grid.steps - 1);
    std::vector<double> x(2), v(2);
    for (int ix = 0; ix < grid.steps; ++ix) {
        x[0] = grid.min + double(ix) * span;
        for (int iy = 0; iy < grid.steps; ++iy) {
            x[1] = grid.min + double(iy) * span;
            f(x, t, v);
            FieldGridRow row;
            row.x = x[0];
            row.y = x[1];
            row.vx = v[0];
            row.vy = v[1];
            row.finite = std::isfinite(v[0]) && std::isfinite(v[1]);
            rows.push_back(row);
        }
    }
    return rows;
}

}  // namespace midgen
