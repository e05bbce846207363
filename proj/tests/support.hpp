// Small helpers shared by the unit tests.

#pragma once

#include "hflab/density.hpp"
#include "hflab/heatflow.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

namespace hflab::testing {

inline std::size_t index_of(const Grid1D& g, double x) {
    const double r = (x - g.x_min) / g.h;
    const auto i = static_cast<std::size_t>(std::llround(r));
    if (std::abs(r - static_cast<double>(i)) > 1e-6 || i >= g.n) throw std::logic_error("not a grid node");
    return i;
}

inline double value_at(const GridDensity& gd, double x) { return gd.values[index_of(gd.grid, x)]; }

/// Sup over the inner half of |f(x_i) - expected(x_i)|.
inline double inner_sup(const GridField& f, const std::function<double(double)>& expected) {
    const auto [lo, hi] = f.grid.inner_half();
    double worst = 0.0;
    for (std::size_t i = lo; i <= hi; ++i) worst = std::max(worst, std::abs(f.values[i] - expected(f.grid.node(i))));
    return worst;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double gaussian_pdf(double x, double variance) {
    return std::exp(-x * x / (2.0 * variance)) / std::sqrt(2.0 * std::numbers::pi * variance);
}

}  // namespace hflab::testing
