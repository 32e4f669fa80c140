#include "doctest.h"
#include "midgen/interpolant.hpp"
#include "midgen/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace midgen;

TEST_CASE("noise scale vanishes at the endpoints and peaks at the middle") {
    InterpolantSpec spec{InterpKind::linear, 1.0};
    CHECK(noise_scale(spec, 0.0) == 0.0);
    CHECK(noise_scale(spec, 1.0) == 0.0);
    CHECK(noise_scale(spec, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
    // strength 0.04 at t=0.5 gives sqrt(0.04 * 0.25) = 0.1
    InterpolantSpec weak{InterpKind::linear, 0.04};
    CHECK(noise_scale(weak, 0.5) == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("noise scale validates its arguments") {
    InterpolantSpec spec{InterpKind::linear, 1.0};
    CHECK_THROWS_AS(noise_scale(spec, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(noise_scale(spec, 1.1), std::invalid_argument);
    InterpolantSpec bad{InterpKind::linear, -1.0};
    CHECK_THROWS_AS(noise_scale(bad, 0.5), std::invalid_argument);
}

TEST_CASE("interpolate hits the endpoints exactly and the midpoint average") {
    std::vector<double> a = {1.0, -2.0};
    std::vector<double> b = {3.0, 4.0};
    std::vector<double> out(2);
    interpolate(a, b, 0.0, out);
    CHECK(out[0] == 1.0);
    CHECK(out[1] == -2.0);
    interpolate(a, b, 1.0, out);
    CHECK(out[0] == 3.0);
    CHECK(out[1] == 4.0);
    interpolate(a, b, 0.5, out);
    CHECK(out[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("interpolate rejects mismatched lengths") {
    std::vector<double> a = {1.0, 2.0};
    std::vector<double> b = {1.0};
    std::vector<double> out(2);
    CHECK_THROWS_AS(interpolate(a, b, 0.5, out), std::invalid_argument);
}

TEST_CASE("path symmetry holds to 1e-12 on a dense grid") {
    Pcg32 rng = Pcg32::seeded(21, 5);
    for (double strength : {0.0, 0.04, 1.0, 3.0}) {
        InterpolantSpec spec{InterpKind::linear, strength};
        for (int rep = 0; rep < 5; ++rep) {
            std::vector<double> a(3), b(3);
            rng.fill_uniform(a, -5.0, 5.0);
            rng.fill_uniform(b, -5.0, 5.0);
            CHECK(check_symmetry(spec, a, b, 1000) <= 1e-12);
        }
    }
}

TEST_CASE("noisy sample adds exactly noise_scale(t) * eps") {
    InterpolantSpec spec{InterpKind::linear, 0.5};
    std::vector<double> a = {1.0, 2.0}, b = {-1.0, 0.0}, eps = {0.3, -0.7};
    std::vector<double> base(2), noisy(2);
    double t = 0.3;
    interpolate(a, b, t, base);
    sample_interpolant(spec, a, b, t, eps, noisy);
    double s = noise_scale(spec, t);
    CHECK(noisy[0] == base[0] + s * eps[0]);
    CHECK(noisy[1] == base[1] + s * eps[1]);
}

TEST_CASE("flip branch b=1 equals the unflipped path at 1-t with the same eps") {
    InterpolantSpec spec{InterpKind::linear, 0.8};
    Pcg32 rng = Pcg32::seeded(33, 2);
    std::vector<double> a(4), b(4), eps(4), flipped(4), direct(4);
    for (int rep = 0; rep < 20; ++rep) {
        rng.fill_uniform(a, -2.0, 2.0);
        rng.fill_uniform(b, -2.0, 2.0);
        rng.fill_normal(eps);
        double t = rng.next_double();
        sample_flipped(spec, a, b, t, 1, eps, flipped);
        sample_interpolant(spec, a, b, 1.0 - t, eps, direct);
        for (int i = 0; i < 4; ++i) CHECK(flipped[i] == direct[i]);

        sample_flipped(spec, a, b, t, 0, eps, flipped);
        sample_interpolant(spec, a, b, t, eps, direct);
        for (int i = 0; i < 4; ++i) CHECK(flipped[i] == direct[i]);
    }
}

TEST_CASE("both flip branches coincide at t = 1/2") {
    InterpolantSpec spec{InterpKind::linear, 1.3};
    Pcg32 rng = Pcg32::seeded(44, 2);
    std::vector<double> a(3), b(3), eps(3), x0(3), x1(3);
    for (int rep = 0; rep < 20; ++rep) {
        rng.fill_uniform(a, -3.0, 3.0);
        rng.fill_uniform(b, -3.0, 3.0);
        rng.fill_normal(eps);
        sample_flipped(spec, a, b, 0.5, 0, eps, x0);
        sample_flipped(spec, a, b, 0.5, 1, eps, x1);
        for (int i = 0; i < 3; ++i) CHECK(std::abs(x0[i] - x1[i]) <= 1e-12);
    }
}

TEST_CASE("flipped draw record carries all fields consistently") {
    InterpolantSpec spec{InterpKind::linear, 0.2};
    std::vector<double> a = {1.0, 0.0}, b = {0.0, 2.0}, eps = {0.1, 0.2};
    FlippedDraw d = sample_flipped(spec, a, b, 0.25, 1, eps);
    CHECK(d.t == 0.25);
    CHECK(d.b == 1);
    CHECK(d.x0 == a);
    CHECK(d.x1 == b);
    CHECK(d.eps == eps);
    CHECK(d.delta[0] == -1.0);
    CHECK(d.delta[1] == 2.0);
    std::vector<double> direct(2);
    sample_flipped(spec, a, b, 0.25, 1, eps, direct);
    CHECK(d.x_tilde == direct);
}

TEST_CASE("flip bit outside {0,1} is rejected") {
    InterpolantSpec spec{InterpKind::linear, 0.2};
    std::vector<double> a = {1.0}, b = {0.0}, eps = {0.1}, out(1);
    CHECK_THROWS_AS(sample_flipped(spec, a, b, 0.5, 2, eps, out), std::invalid_argument);
    CHECK_THROWS_AS(sample_flipped(spec, a, b, 0.5, -1, eps, out), std::invalid_argument);
}

TEST_CASE("matched endpoint distributions make the flip invisible in law") {
    // When x0 and x1 come from the same distribution, swapping the roles of the
    // endpoints is a relabeling, so the two branches have equal distribution.
    // Spot check: first two moments of x_tilde agree between branches.
    InterpolantSpec spec{InterpKind::linear, 0.5};
    Pcg32 rng = Pcg32::seeded(55, 3);
    const int n = 40000;
    double m[2] = {0, 0}, m2[2] = {0, 0};
    std::vector<double> a(1), b(1), eps(1), out(1);
    for (int i = 0; i < n; ++i) {
        a[0] = rng.normal();
        b[0] = rng.normal();
        eps[0] = rng.normal();
        double t = 0.3;
        for (int bit = 0; bit < 2; ++bit) {
            sample_flipped(spec, a, b, t, bit, eps, out);
            m[bit] += out[0];
            m2[bit] += out[0] * out[0];
        }
    }
    for (int bit = 0; bit < 2; ++bit) {
        m[bit] /= n;
        m2[bit] /= n;
    }
    CHECK(std::abs(m[0] - m[1]) < 0.02);
    CHECK(std::abs(m2[0] - m2[1]) < 0.04);
    // variance of x_t at t=0.3: (1-t)^2 + t^2 + 0.5 * t(1-t) = 0.49+0.09+0.105
    CHECK(m2[0] - m[0] * m[0] == doctest::Approx(0.685).epsilon(0.05));
}
