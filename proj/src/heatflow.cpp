#include "hflab/heatflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace hflab {

namespace {

constexpr double kWindowDepth = 60.0;

void require_time(double s) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("heat flow: time must be finite and >= 0");
}

// Offset of grid b's node 0 relative to grid a's node 0, in nodes (grids share h).
std::ptrdiff_t node_offset(const Grid1D& a, const Grid1D& b) {
    return static_cast<std::ptrdiff_t>(std::llround((b.x_min - a.x_min) / a.h));
}

}  // namespace

GridField make_field(const Grid1D& grid, const std::function<double(double)>& f) {
    GridField out{grid, std::vector<double>(grid.n)};
    for (std::size_t i = 0; i < grid.n; ++i) out.values[i] = f(grid.node(i));
    return out;
}

void kernel_window(const GridDensity& base, double s, double y, KernelWindow& out) {
    const auto& g = base.grid;
    const auto& l = base.log_values;
    const double inv2s = 1.0 / (2.0 * s);
    const auto [first, last] = base.support_range();

    double peak = -std::numeric_limits<double>::infinity();
    std::size_t arg = first;
    for (std::size_t i = first; i <= last; ++i) {
        const double d = y - g.node(i);
        const double e = l[i] - d * d * inv2s;
        if (e > peak) {
            peak = e;
            arg = i;
        }
    }
    const double cut = peak - kWindowDepth;
    auto exponent = [&](std::size_t i) {
        const double d = y - g.node(i);
        return l[i] - d * d * inv2s;
    };
    std::size_t lo = arg, hi = arg;
    while (lo > first && exponent(lo - 1) > cut) --lo;
    while (hi < last && exponent(hi + 1) > cut) ++hi;

    out.first = lo;
    out.weights.resize(hi - lo + 1);
    double sum = 0.0;
    for (std::size_t i = lo; i <= hi; ++i) {
        const double w = g.trapezoid_weight(i) * std::exp(exponent(i) - peak);
        out.weights[i - lo] = w;
        sum += w;
    }
    out.total = sum;
    out.log_mass = peak + std::log(sum * g.h);
}

std::size_t heat_extension(const Grid1D& grid, double s) {
    if (s <= 0.0) return 0;
    return static_cast<std::size_t>(std::ceil(8.0 * std::sqrt(s) / grid.h - 1e-9));
}

GridDensity heat_convolve(const GridDensity& gd, double s, double& mass_defect) {
    require_time(s);
    mass_defect = 0.0;
    if (s == 0.0) return gd;
    const auto& g = gd.grid;
    const std::size_t k = heat_extension(g, s);
    const double pad = static_cast<double>(k) * g.h;
    const Grid1D out = make_grid(g.x_min - pad, g.x_max + pad, g.n + 2 * k);

    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * s);
    std::vector<double> logs(out.n);
    KernelWindow win;
    for (std::size_t j = 0; j < out.n; ++j) {
        kernel_window(gd, s, out.node(j), win);
        logs[j] = win.log_mass + log_norm;
    }
    std::vector<double> raw(out.n);
    for (std::size_t j = 0; j < out.n; ++j) raw[j] = std::exp(logs[j]);
    mass_defect = std::abs(trapezoid(out, raw) - 1.0);
    return density_from_log_values(out, std::move(logs));
}

GridDensity heat_convolve(const GridDensity& gd, double s) {
    double defect = 0.0;
    return heat_convolve(gd, s, defect);
}

GridField apply_P(const GridField& f, double s) {
    require_time(s);
    for (double v : f.values)
        if (!std::isfinite(v)) throw std::invalid_argument("apply_P: field must be finite");
    if (s == 0.0) return f;
    const auto& g = f.grid;
    const auto reach = static_cast<std::ptrdiff_t>(std::floor(8.0 * std::sqrt(s) / g.h + 1e-9));
    const double inv2s = 1.0 / (2.0 * s);
    const auto n = static_cast<std::ptrdiff_t>(g.n);
    std::vector<double> kernel(static_cast<std::size_t>(reach) + 1);
    for (std::ptrdiff_t d = 0; d <= reach; ++d) {
        const double x = static_cast<double>(d) * g.h;
        kernel[static_cast<std::size_t>(d)] = std::exp(-x * x * inv2s);
    }
    GridField out{g, std::vector<double>(g.n)};
    for (std::ptrdiff_t j = 0; j < n; ++j) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, j - reach);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, j + reach);
        double num = 0.0, den = 0.0;
        for (std::ptrdiff_t i = lo; i <= hi; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            const double w = g.trapezoid_weight(ui) * kernel[static_cast<std::size_t>(std::abs(i - j))];
            num += w * f.values[ui];
            den += w;
        }
        out.values[static_cast<std::size_t>(j)] = num / den;
    }
    return out;
}

double semigroup_residual(const GridDensity& gd, double s, double t) {
    if (!(s > 0.0) || !(t > 0.0)) throw std::invalid_argument("semigroup_residual: need s, t > 0");
    const GridDensity two_step = heat_convolve(heat_convolve(gd, t), s);
    const GridDensity one_step = heat_convolve(gd, s + t);
    const auto off = node_offset(two_step.grid, one_step.grid);
    const auto [lo, hi] = one_step.grid.inner_half();
    double worst = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) {
        const auto i = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(j) + off);
        worst = std::max(worst, std::abs(two_step.values.at(i) - one_step.values[j]));
    }
    return worst;
}

double heat_residual(const GridDensity& gd, double s, double ds) {
    if (!(s > ds) || !(ds > 0.0)) throw std::invalid_argument("heat_residual: need s > ds > 0");
    const GridDensity mid = heat_convolve(gd, s);
    const GridDensity ahead = heat_convolve(gd, s + ds);
    const GridDensity behind = heat_convolve(gd, s - ds);
    const auto off_a = node_offset(ahead.grid, mid.grid);
    const auto off_b = node_offset(behind.grid, mid.grid);
    const double h2 = mid.grid.h * mid.grid.h;
    const auto [lo, hi] = mid.grid.inner_half();
    double worst = 0.0;
    for (std::size_t j = std::max<std::size_t>(lo, 1); j <= std::min(hi, mid.grid.n - 2); ++j) {
        const auto ja = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(j) + off_a);
        const auto jb = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(j) + off_b);
        const double dt = (ahead.values.at(ja) - behind.values.at(jb)) / (2.0 * ds);
        const double lap = (mid.values[j + 1] - 2.0 * mid.values[j] + mid.values[j - 1]) / h2;
        worst = std::max(worst, std::abs(dt - 0.5 * lap));
    }
    return worst;
}

}  // namespace hflab
