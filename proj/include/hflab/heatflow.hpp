// Gaussian heat semigroup acting on grid densities and grid functions.

#pragma once

#include "hflab/density.hpp"

#include <functional>
#include <vector>

namespace hflab {

struct GridField {
    Grid1D grid;
    std::vector<double> values;
};

GridField make_field(const Grid1D& grid, const std::function<double(double)>& f);

/// Kernel weights of the base density against exp(-(y - x)^2 / (2s)), scaled so the
/// largest is about 1 and restricted to the nodes within e^-60 of it.
struct KernelWindow {
    std::size_t first = 0;
    std::vector<double> weights;  // trapezoid factors included
    double total = 0.0;           // sum of weights
    double log_mass = 0.0;        // log of  sum_i c_i h rho_i exp(-(y - x_i)^2 / (2s))
};

void kernel_window(const GridDensity& base, double s, double y, KernelWindow& out);

/// Number of nodes added on each side of the grid by a convolution with variance s.
std::size_t heat_extension(const Grid1D& grid, double s);

/// rho * gamma_s on the grid widened by heat_extension nodes per side.
/// s = 0 returns the input unchanged.
GridDensity heat_convolve(const GridDensity& gd, double s);

/// Same, also reporting |mass - 1| of the quadrature before renormalization.
GridDensity heat_convolve(const GridDensity& gd, double s, double& mass_defect);

/// (f * gamma_s) on the same grid; the kernel is truncated at 8 sqrt(s) and
/// renormalized by its in-grid mass, so constants are fixed points.
GridField apply_P(const GridField& f, double s);

/// Sup over the inner half of |P_s P_t rho - P_{s+t} rho|.
double semigroup_residual(const GridDensity& gd, double s, double t);

/// Sup over the inner half of |d/ds rho_s - rho_s'' / 2| with centered differences.
double heat_residual(const GridDensity& gd, double s, double ds);

}  // namespace hflab
