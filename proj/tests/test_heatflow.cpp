#include "doctest.h"
#include "support.hpp"

#include "hflab/heatflow.hpp"

#include <algorithm>
#include <cmath>

using namespace hflab;
using namespace hflab::testing;

namespace {

double uniform_heat(double y, double s) { return 0.5 * (normal_cdf((y + 1) / std::sqrt(s)) - normal_cdf((y - 1) / std::sqrt(s))); }

double sup_norm(const GridDensity& gd) { return *std::max_element(gd.values.begin(), gd.values.end()); }

}  // namespace

TEST_CASE("heat_convolve closed forms") {
    const GridDensity g = evaluate_density(DensitySpec::gaussian(1.0), make_grid(-8.0, 8.0, 1601));
    CHECK(std::abs(value_at(heat_convolve(g, 1.0), 0.0) - 1.0 / std::sqrt(4.0 * std::numbers::pi)) <= 1e-5);

    const GridDensity u = discretize(DensitySpec::uniform(-1.0, 1.0), 2049);
    const GridDensity u1 = heat_convolve(u, 1.0);
    CHECK(std::abs(value_at(u1, 0.0) - 0.341344746) <= 1e-5);
    double worst = 0.0;
    for (std::size_t i = 0; i < u1.grid.n; ++i) worst = std::max(worst, std::abs(u1.values[i] - uniform_heat(u1.grid.node(i), 1.0)));
    CHECK(worst <= 1e-5);
}

TEST_CASE("heat_convolve at s = 0 is the identity") {
    const GridDensity q = discretize(DensitySpec::quartic(1.0), 513);
    const GridDensity q0 = heat_convolve(q, 0.0);
    CHECK(q0.grid.n == q.grid.n);
    CHECK(q0.values == q.values);
    CHECK_THROWS(heat_convolve(q, -0.1));
}

TEST_CASE("heat_convolve widens the grid and conserves mass") {
    for (const auto& spec : {DensitySpec::gaussian(1.0), DensitySpec::uniform(-1.0, 1.0), DensitySpec::exponential(1.0),
                             DensitySpec::quartic(1.0), DensitySpec::laplace(1.0)}) {
        CAPTURE(spec.name());
        const GridDensity gd = discretize(spec, 1025);
        for (double s : {0.25, 1.0, 3.0}) {
            double defect = 1.0;
            const GridDensity out = heat_convolve(gd, s, defect);
            CHECK(defect <= 1e-6);
            CHECK(out.grid.x_min <= gd.grid.x_min - 8.0 * std::sqrt(s) + out.grid.h);
            CHECK(out.grid.x_max >= gd.grid.x_max + 8.0 * std::sqrt(s) - out.grid.h);
            CHECK(std::abs(trapezoid(out.grid, out.values) - 1.0) <= 1e-8);
        }
    }
}

TEST_CASE("heat flow preserves log-concavity and smooths monotonically") {
    for (const auto& spec : {DensitySpec::gaussian(1.0), DensitySpec::uniform(-1.0, 1.0), DensitySpec::exponential(1.0),
                             DensitySpec::quartic(1.0), DensitySpec::laplace(1.0)}) {
        CAPTURE(spec.name());
        const GridDensity gd = discretize(spec, 1025);
        double previous = sup_norm(gd);
        for (double s : {0.01, 0.25, 0.5, 1.0, 2.0}) {
            const GridDensity out = heat_convolve(gd, s);
            CHECK(check_log_concavity(out).pass);
            const double m = sup_norm(out);
            CHECK(m <= previous * (1.0 + 1e-12));
            previous = m;
        }
    }
}

TEST_CASE("heat_convolve commutes with grid shifts") {
    const GridDensity gd = discretize(DensitySpec::quartic(1.0), 513);
    GridDensity shifted = gd;
    const double a = 10.0 * gd.grid.h;
    shifted.grid = make_grid(gd.grid.x_min + a, gd.grid.x_max + a, gd.grid.n);
    const GridDensity p = heat_convolve(gd, 0.5);
    const GridDensity ps = heat_convolve(shifted, 0.5);
    REQUIRE(p.grid.n == ps.grid.n);
    CHECK(ps.grid.x_min == doctest::Approx(p.grid.x_min + a).epsilon(1e-12));
    double worst = 0.0;
    for (std::size_t i = 0; i < p.grid.n; ++i) worst = std::max(worst, std::abs(p.values[i] - ps.values[i]));
    CHECK(worst <= 1e-9);
}

TEST_CASE("apply_P fixes constants and affine functions") {
    const Grid1D grid = make_grid(-16.0, 16.0, 3201);
    const GridField one = apply_P(make_field(grid, [](double) { return 1.0; }), 2.0);
    for (double v : one.values) CHECK(std::abs(v - 1.0) <= 1e-9);
    CHECK(inner_sup(apply_P(make_field(grid, [](double x) { return x; }), 1.0), [](double x) { return x; }) <= 1e-6);
    CHECK(inner_sup(apply_P(make_field(grid, [](double x) { return x * x; }), 1.0), [](double x) { return x * x + 1; }) <= 1e-4);
    CHECK_THROWS(apply_P(one, -1.0));
}

TEST_CASE("semigroup residuals") {
    CHECK(semigroup_residual(discretize(DensitySpec::gaussian(1.0), 2049), 0.5, 0.5) <= 1e-6);
    CHECK(semigroup_residual(discretize(DensitySpec::uniform(-1.0, 1.0), 2049), 0.3, 0.7) <= 1e-5);
    CHECK(semigroup_residual(discretize(DensitySpec::quartic(1.0), 2049), 0.25, 0.25) <= 1e-5);
}

TEST_CASE("heat equation residuals") {
    CHECK(heat_residual(discretize(DensitySpec::gaussian(1.0), 2049), 1.0, 1e-3) <= 1e-4);
    CHECK(heat_residual(discretize(DensitySpec::uniform(-1.0, 1.0), 2049), 0.5, 1e-3) <= 1e-3);
    CHECK(heat_residual(discretize(DensitySpec::gaussian(4.0), 2049), 2.0, 1e-3) <= 1e-4);
}

TEST_CASE("uniform semigroup against the closed form") {
    const GridDensity u = discretize(DensitySpec::uniform(-1.0, 1.0), 2049);
    const GridDensity two_step = heat_convolve(heat_convolve(u, 0.3), 0.7);
    const auto [lo, hi] = two_step.grid.inner_half();
    double worst = 0.0;
    for (std::size_t i = lo; i <= hi; ++i)
        worst = std::max(worst, std::abs(two_step.values[i] - uniform_heat(two_step.grid.node(i), 1.0)));
    CHECK(worst <= 1e-5);
}
