// Fixed library of test functions with analytic first and second derivatives.

#pragma once

#include "hflab/heatflow.hpp"

#include <functional>
#include <string>
#include <vector>

namespace hflab {

struct TestFunction {
    std::string name;
    std::function<double(double)> f;
    std::function<double(double)> df;
    std::function<double(double)> d2f;

    GridField sample(const Grid1D& grid) const { return make_field(grid, f); }
    GridField sample_derivative(const Grid1D& grid) const { return make_field(grid, df); }
};

namespace test_functions {

TestFunction constant(double c = 1.0);
TestFunction linear();
/// x^2 - offset; pass the second moment of the measure to center it.
TestFunction quadratic(double offset = 0.0);
/// exp(1 - 1/(1 - ((x - center)/radius)^2)) inside the window, 0 outside.
TestFunction bump(double center = 0.0, double radius = 1.0);
/// Saturating ramp cap * tanh(x / cap): slope 1 at the origin, bounded by cap.
TestFunction ramp(double cap = 1.0);

}  // namespace test_functions

/// {1, x, x^2 - offset, bump(0, radius), ramp(cap)}.
std::vector<TestFunction> test_library(double quadratic_offset = 0.0, double radius = 1.0, double cap = 1.0);

/// Library scaled to a measure: x^2 - E x^2, bump(mean, 3 sd), ramp(2 sd).
std::vector<TestFunction> test_library(const GridDensity& gd);

}  // namespace hflab
