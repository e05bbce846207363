#include "hflab/density.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hflab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

// Round a half-width up to the next multiple of 0.5 * unit.
double round_out(double r, double unit) {
    const double step = 0.5 * unit;
    return std::ceil(r / step - 1e-12) * step;
}

// Smallest r with tail(r) <= eps for a decreasing tail function, by bisection.
template <class F>
double solve_tail(F tail, double eps, double hi) {
    while (tail(hi) > eps) hi *= 2.0;
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (tail(mid) > eps ? lo : hi) = mid;
    }
    return hi;
}

double interp_log(const family::Tabulated& t, double x) {
    if (x < t.x.front() || x > t.x.back()) return kNegInf;
    auto it = std::upper_bound(t.x.begin(), t.x.end(), x);
    if (it == t.x.end()) return t.log_density.back();
    const auto k = static_cast<std::size_t>(it - t.x.begin()) - 1;
    const double u = (x - t.x[k]) / (t.x[k + 1] - t.x[k]);
    return (1.0 - u) * t.log_density[k] + u * t.log_density[k + 1];
}

}  // namespace

double Grid1D::node(std::size_t i) const {
    const auto a = static_cast<double>(n - 1 - i);
    const auto b = static_cast<double>(i);
    return (x_min * a + x_max * b) / static_cast<double>(n - 1);
}

std::vector<double> Grid1D::nodes() const {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = node(i);
    return out;
}

Grid1D Grid1D::coarsened() const {
    const std::size_t m = (n + 1) / 2;
    return make_grid(x_min, node(2 * (m - 1)), m);
}

Grid1D make_grid(double x_min, double x_max, std::size_t n) {
    require(std::isfinite(x_min) && std::isfinite(x_max), "make_grid: bounds must be finite");
    require(x_min < x_max, "make_grid: x_min must be below x_max");
    require(n >= 3, "make_grid: need at least 3 nodes");
    return Grid1D{x_min, x_max, n, (x_max - x_min) / static_cast<double>(n - 1)};
}

// ---------------------------------------------------------------------------
// DensitySpec

DensitySpec DensitySpec::gaussian(double variance) {
    require(std::isfinite(variance) && variance > 0.0, "gaussian: variance must be positive");
    return DensitySpec(family::Gaussian{variance});
}

DensitySpec DensitySpec::uniform(double a, double b) {
    require(std::isfinite(a) && std::isfinite(b) && a < b, "uniform: need a < b");
    return DensitySpec(family::Uniform{a, b});
}

DensitySpec DensitySpec::exponential(double rate) {
    require(std::isfinite(rate) && rate > 0.0, "exponential: rate must be positive");
    return DensitySpec(family::Exponential{rate});
}

DensitySpec DensitySpec::quartic(double beta) {
    require(std::isfinite(beta) && beta > 0.0, "quartic: beta must be positive");
    return DensitySpec(family::Quartic{beta});
}

DensitySpec DensitySpec::laplace(double scale) {
    require(std::isfinite(scale) && scale > 0.0, "laplace: scale must be positive");
    return DensitySpec(family::Laplace{scale});
}

DensitySpec DensitySpec::tabulated(std::vector<double> x, std::vector<double> log_density,
                                   bool check_concavity) {
    require(x.size() == log_density.size(), "tabulated: column lengths differ");
    require(x.size() >= 3, "tabulated: need at least 3 rows");
    for (std::size_t i = 0; i < x.size(); ++i) {
        require(std::isfinite(x[i]), "tabulated: non-finite abscissa");
        require(!std::isnan(log_density[i]) && log_density[i] != std::numeric_limits<double>::infinity(),
                "tabulated: invalid log-density");
        if (i > 0) require(x[i] > x[i - 1], "tabulated: x must be strictly increasing");
    }
    if (check_concavity) {
        double scale = 0.0;
        std::vector<double> slopes;
        for (std::size_t i = 1; i < x.size(); ++i) {
            if (!std::isfinite(log_density[i]) || !std::isfinite(log_density[i - 1])) continue;
            slopes.push_back((log_density[i] - log_density[i - 1]) / (x[i] - x[i - 1]));
            scale = std::max(scale, std::abs(slopes.back()));
        }
        for (std::size_t i = 1; i < slopes.size(); ++i) {
            require(slopes[i] <= slopes[i - 1] + 1e-9 * std::max(scale, 1.0),
                    "tabulated: log-density is not concave");
        }
    }
    return DensitySpec(family::Tabulated{std::move(x), std::move(log_density)});
}

double DensitySpec::log_density(double x) const {
    return std::visit(
        overloaded{
            [x](const family::Gaussian& g) { return -x * x / (2.0 * g.variance); },
            [x](const family::Uniform& u) { return (x >= u.a && x <= u.b) ? 0.0 : kNegInf; },
            [x](const family::Exponential& e) { return x >= 0.0 ? -e.rate * x : kNegInf; },
            [x](const family::Quartic& q) { return -q.beta * (x * x) * (x * x); },
            [x](const family::Laplace& l) { return -std::abs(x) / l.scale; },
            [x](const family::Tabulated& t) { return interp_log(t, x); },
        },
        params_);
}

std::optional<double> DensitySpec::support_min() const {
    if (auto* u = std::get_if<family::Uniform>(&params_)) return u->a;
    if (std::holds_alternative<family::Exponential>(params_)) return 0.0;
    return std::nullopt;
}

std::optional<double> DensitySpec::support_max() const {
    if (auto* u = std::get_if<family::Uniform>(&params_)) return u->b;
    return std::nullopt;
}

bool DensitySpec::is_smooth() const {
    return std::holds_alternative<family::Gaussian>(params_) ||
           std::holds_alternative<family::Quartic>(params_);
}

bool DensitySpec::is_even() const {
    if (auto* u = std::get_if<family::Uniform>(&params_)) return u->a == -u->b;
    return std::holds_alternative<family::Gaussian>(params_) ||
           std::holds_alternative<family::Quartic>(params_) ||
           std::holds_alternative<family::Laplace>(params_);
}

std::string DensitySpec::name() const {
    std::ostringstream os;
    std::visit(overloaded{
                   [&](const family::Gaussian& g) { os << "gaussian(" << g.variance << ")"; },
                   [&](const family::Uniform& u) { os << "uniform(" << u.a << "," << u.b << ")"; },
                   [&](const family::Exponential& e) { os << "exponential(" << e.rate << ")"; },
                   [&](const family::Quartic& q) { os << "quartic(" << q.beta << ")"; },
                   [&](const family::Laplace& l) { os << "laplace(" << l.scale << ")"; },
                   [&](const family::Tabulated& t) { os << "tabulated(" << t.x.size() << ")"; },
               },
               params_);
    return os.str();
}

// ---------------------------------------------------------------------------
// Grid densities

std::pair<std::size_t, std::size_t> GridDensity::support_range() const {
    std::size_t first = grid.n, last = 0;
    for (std::size_t i = 0; i < grid.n; ++i) {
        if (std::isfinite(log_values[i])) {
            first = std::min(first, i);
            last = i;
        }
    }
    if (first == grid.n) throw std::runtime_error("GridDensity: empty support");
    return {first, last};
}

double trapezoid(const Grid1D& grid, std::span<const double> values) {
    if (values.size() != grid.n) throw std::invalid_argument("trapezoid: size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.n; ++i) sum += grid.trapezoid_weight(i) * values[i];
    return sum * grid.h;
}

std::vector<double> cumulative_trapezoid(const Grid1D& grid, std::span<const double> values) {
    std::vector<double> out(grid.n, 0.0);
    for (std::size_t i = 1; i < grid.n; ++i)
        out[i] = out[i - 1] + 0.5 * grid.h * (values[i - 1] + values[i]);
    return out;
}

double cdf_at(const GridDensity& gd, double x) { return cdf_at(gd, cumulative_trapezoid(gd.grid, gd.values), x); }

double cdf_at(const GridDensity& gd, const std::vector<double>& cum, double x) {
    const auto& g = gd.grid;
    if (x <= g.x_min) return 0.0;
    if (x >= g.x_max) return cum.back();
    auto k = static_cast<std::size_t>((x - g.x_min) / g.h);
    k = std::min(k, g.n - 2);
    const double dx = x - g.node(k);
    const double slope = (gd.values[k + 1] - gd.values[k]) / g.h;
    return cum[k] + dx * gd.values[k] + 0.5 * dx * dx * slope;
}

GridDensity density_from_log_values(const Grid1D& grid, std::vector<double> log_values,
                                    std::optional<double> support_min,
                                    std::optional<double> support_max) {
    if (log_values.size() != grid.n) throw std::invalid_argument("density: size mismatch");
    double peak = kNegInf;
    for (double l : log_values) {
        if (std::isnan(l)) throw std::invalid_argument("density: NaN log value");
        peak = std::max(peak, l);
    }
    if (!std::isfinite(peak)) throw std::invalid_argument("density: all-zero values on grid");
    std::vector<double> values(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) values[i] = std::exp(log_values[i] - peak);
    const double raw = trapezoid(grid, values);
    if (!(raw > 0.0)) throw std::invalid_argument("density: all-zero values on grid");
    const double log_norm = peak + std::log(raw);
    for (std::size_t i = 0; i < grid.n; ++i) {
        values[i] /= raw;
        log_values[i] -= log_norm;
    }
    GridDensity gd{grid, std::move(values), std::move(log_values), 0.0, support_min, support_max};
    gd.mass = trapezoid(grid, gd.values);
    return gd;
}

std::pair<double, double> auto_domain(const DensitySpec& spec, double eps) {
    require(eps > 0.0 && eps < 1e-3, "auto_domain: eps_tail must lie in (0, 1e-3)");
    return std::visit(
        overloaded{
            [eps](const family::Gaussian& g) -> std::pair<double, double> {
                const double sd = std::sqrt(g.variance);
                const double z = solve_tail([](double r) { return std::erfc(r / std::sqrt(2.0)); }, eps, 8.0);
                const double r = round_out(z * sd, sd);
                return {-r, r};
            },
            [](const family::Uniform& u) -> std::pair<double, double> { return {u.a, u.b}; },
            [eps](const family::Exponential& e) -> std::pair<double, double> {
                return {0.0, round_out(-std::log(eps) / e.rate, 1.0 / e.rate)};
            },
            [eps](const family::Quartic& q) -> std::pair<double, double> {
                // P(|X| > r) <= 2 e^{-b r^4} / (4 b r^3 Z), Z = 2 Gamma(5/4) b^{-1/4}.
                const double unit = std::pow(q.beta, -0.25);
                const double z = 2.0 * std::tgamma(1.25) * unit;
                auto tail = [&](double r) {
                    if (r <= 0.0) return 1.0;
                    return std::min(1.0, 2.0 * std::exp(-q.beta * r * r * r * r) / (4.0 * q.beta * r * r * r * z));
                };
                const double r = round_out(solve_tail(tail, eps, unit), unit);
                return {-r, r};
            },
            [eps](const family::Laplace& l) -> std::pair<double, double> {
                const double r = round_out(-l.scale * std::log(eps), l.scale);
                return {-r, r};
            },
            [eps](const family::Tabulated& t) -> std::pair<double, double> {
                const std::size_t m = t.x.size();
                std::vector<double> cum(m, 0.0);
                for (std::size_t i = 1; i < m; ++i) {
                    const double a = std::exp(t.log_density[i - 1]);
                    const double b = std::exp(t.log_density[i]);
                    cum[i] = cum[i - 1] + 0.5 * (t.x[i] - t.x[i - 1]) * (a + b);
                }
                if (cum.back() < 1.0 - eps)
                    throw std::invalid_argument("auto_domain: tabulated grid carries mass below 1 - eps_tail");
                const double total = cum.back();
                std::size_t lo = 0, hi = m - 1;
                while (lo + 1 < m && cum[lo + 1] <= 0.5 * eps * total) ++lo;
                while (hi > lo + 2 && total - cum[hi - 1] <= 0.5 * eps * total) --hi;
                return {t.x[lo], t.x[hi]};
            },
        },
        spec.params());
}

GridDensity evaluate_density(const DensitySpec& spec, const Grid1D& grid) {
    std::vector<double> logs(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) logs[i] = spec.log_density(grid.node(i));
    return density_from_log_values(grid, std::move(logs), spec.support_min(), spec.support_max());
}

GridDensity discretize(const DensitySpec& spec, std::size_t n, double eps_tail) {
    const auto [lo, hi] = auto_domain(spec, eps_tail);
    return evaluate_density(spec, make_grid(lo, hi, n));
}

LogConcavityReport check_log_concavity(const GridDensity& gd, double tol) {
    LogConcavityReport rep;
    const auto [first, last] = gd.support_range();
    const auto& l = gd.log_values;
    double lmax = 0.0;
    for (std::size_t i = first; i <= last; ++i) {
        if (!std::isfinite(l[i])) {
            // hole inside the support: support is not an interval
            rep.max_violation = std::numeric_limits<double>::infinity();
            rep.pass = false;
            return rep;
        }
        lmax = std::max(lmax, std::abs(l[i]));
    }
    double worst = -std::numeric_limits<double>::infinity();
    double scale = 0.0;
    for (std::size_t i = first + 1; i + 1 <= last; ++i) {
        const double d2 = l[i + 1] - 2.0 * l[i] + l[i - 1];
        worst = std::max(worst, d2);
        scale = std::max(scale, std::abs(d2));
    }
    if (last < first + 2) worst = 0.0;
    rep.max_violation = worst;
    rep.tolerance = tol * scale + 64.0 * std::numeric_limits<double>::epsilon() * lmax;
    rep.pass = rep.max_violation <= rep.tolerance;
    return rep;
}

TailFit tail_fit(const GridDensity& gd) {
    const auto [first, last] = gd.support_range();
    const auto& l = gd.log_values;
    const double h = gd.grid.h;
    TailFit fit;
    double b = std::numeric_limits<double>::infinity();
    bool constrained = false;
    if (!gd.support_min && last > first) {
        b = std::min(b, (l[first + 1] - l[first]) / h);
        constrained = true;
    }
    if (!gd.support_max && last > first) {
        b = std::min(b, -(l[last] - l[last - 1]) / h);
        constrained = true;
    }
    if (!constrained || !(b > 0.0)) {
        fit.degenerate = true;
        b = 0.0;
    }
    fit.b = b;
    double log_a = -std::numeric_limits<double>::infinity();
    for (std::size_t i = first; i <= last; ++i)
        log_a = std::max(log_a, l[i] + b * std::abs(gd.grid.node(i)));
    fit.a = std::exp(log_a);
    return fit;
}

GridDensity restrict_left(const GridDensity& gd, double x0) {
    const auto& g = gd.grid;
    std::size_t k = 0;
    while (k < g.n && g.node(k) < x0 - 1e-12 * std::max(1.0, std::abs(x0))) ++k;
    if (g.n - k < 3) throw std::invalid_argument("restrict_left: fewer than 3 nodes remain");
    const Grid1D sub = make_grid(g.node(k), g.x_max, g.n - k);
    std::vector<double> logs(gd.log_values.begin() + static_cast<std::ptrdiff_t>(k), gd.log_values.end());
    return density_from_log_values(sub, std::move(logs), sub.x_min, gd.support_max);
}

DensitySpec load_tabulated_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    if (line.find("x") == std::string::npos)
        throw std::runtime_error(path + ": header `x,log_density` required");
    std::vector<double> xs, ls;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error(path + ": row " + std::to_string(row) + " needs two columns");
        try {
            xs.push_back(std::stod(line.substr(0, comma)));
            const std::string rhs = line.substr(comma + 1);
            ls.push_back(rhs.find("inf") != std::string::npos ? kNegInf : std::stod(rhs));
        } catch (const std::logic_error&) {
            throw std::runtime_error(path + ": row " + std::to_string(row) + " is not numeric");
        }
    }
    return DensitySpec::tabulated(std::move(xs), std::move(ls));
}

}  // namespace hflab
