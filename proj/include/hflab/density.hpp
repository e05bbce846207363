// One-dimensional log-concave densities sampled on uniform grids.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace hflab {

/// Uniform grid x_i = x_min + i h, i = 0..n-1.
struct Grid1D {
    double x_min = 0.0;
    double x_max = 0.0;
    std::size_t n = 0;
    double h = 0.0;

    /// Node i. Symmetric grids (x_min = -x_max) produce exactly antisymmetric nodes.
    double node(std::size_t i) const;
    std::vector<double> nodes() const;

    /// Trapezoid weight (1/2 at the ends, 1 inside), without the factor h.
    double trapezoid_weight(std::size_t i) const { return (i == 0 || i + 1 == n) ? 0.5 : 1.0; }

    /// Sub-grid made of every other node. Drops the last node when n is even.
    Grid1D coarsened() const;

    /// Index range [lo, hi] of the central half of the grid, where residual norms are taken.
    std::pair<std::size_t, std::size_t> inner_half() const {
        const std::size_t lo = (n - 1 + 3) / 4;
        return {lo, n - 1 - lo};
    }
};

Grid1D make_grid(double x_min, double x_max, std::size_t n);

namespace family {
struct Gaussian { double variance = 1.0; };
struct Uniform { double a = -1.0; double b = 1.0; };
struct Exponential { double rate = 1.0; };
struct Quartic { double beta = 1.0; };
struct Laplace { double scale = 1.0; };
struct Tabulated {
    std::vector<double> x;
    std::vector<double> log_density;
};
}  // namespace family

/// Analytic family or tabulated log-density. Construct through the factories,
/// which validate parameters.
class DensitySpec {
public:
    using Params = std::variant<family::Gaussian, family::Uniform, family::Exponential,
                                family::Quartic, family::Laplace, family::Tabulated>;

    static DensitySpec gaussian(double variance);
    static DensitySpec uniform(double a, double b);
    static DensitySpec exponential(double rate);
    static DensitySpec quartic(double beta);
    static DensitySpec laplace(double scale);
    /// Tabulated log-density on strictly increasing (possibly non-uniform) abscissae.
    /// Concavity of the table is validated unless check_concavity is false.
    static DensitySpec tabulated(std::vector<double> x, std::vector<double> log_density,
                                 bool check_concavity = true);

    const Params& params() const { return params_; }

    /// Unnormalized log-density; -inf off the support.
    double log_density(double x) const;

    /// Closed support endpoints, when the family has them.
    std::optional<double> support_min() const;
    std::optional<double> support_max() const;

    /// Families whose log-density is C^2 on the whole line.
    bool is_smooth() const;
    bool is_even() const;
    std::string name() const;

private:
    explicit DensitySpec(Params p) : params_(std::move(p)) {}
    Params params_;
};

/// Normalized density values on a grid. log_values is -inf where values is 0.
struct GridDensity {
    Grid1D grid;
    std::vector<double> values;
    std::vector<double> log_values;
    double mass = 0.0;
    std::optional<double> support_min;
    std::optional<double> support_max;

    /// Contiguous index range [first, last] of nodes with finite log value.
    std::pair<std::size_t, std::size_t> support_range() const;
    bool has_closed_support() const { return support_min.has_value() || support_max.has_value(); }
};

double trapezoid(const Grid1D& grid, std::span<const double> values);

/// Cumulative trapezoid integral F(x_i), F(x_0) = 0.
std::vector<double> cumulative_trapezoid(const Grid1D& grid, std::span<const double> values);

/// CDF at an arbitrary point: cumulative trapezoid plus the exact integral of
/// the linear interpolant inside the cell. 0 left of the grid, total mass right of it.
double cdf_at(const GridDensity& gd, double x);
/// Same, with the cumulative_trapezoid table of gd precomputed.
double cdf_at(const GridDensity& gd, const std::vector<double>& cumulative, double x);

/// Build a normalized GridDensity from log values (up to an additive constant).
GridDensity density_from_log_values(const Grid1D& grid, std::vector<double> log_values,
                                    std::optional<double> support_min = std::nullopt,
                                    std::optional<double> support_max = std::nullopt);

/// Interval carrying at least 1 - eps_tail of the mass of spec.
std::pair<double, double> auto_domain(const DensitySpec& spec, double eps_tail);

GridDensity evaluate_density(const DensitySpec& spec, const Grid1D& grid);

/// Convenience: evaluate spec on make_grid(auto_domain(spec, eps_tail), n).
GridDensity discretize(const DensitySpec& spec, std::size_t n, double eps_tail = 1e-10);

struct LogConcavityReport {
    double max_violation = 0.0;  // max second difference of log_values (h^2 scale)
    double tolerance = 0.0;      // effective threshold the violation was compared to
    bool pass = false;
};

/// pass iff max_violation <= tol * max(|second difference|) + rounding floor of the log values.
LogConcavityReport check_log_concavity(const GridDensity& gd, double tol = 1e-9);

struct TailFit {
    double a = 0.0;
    double b = 0.0;
    bool degenerate = false;
};

/// Envelope rho(x) <= a exp(-b|x|). b is the largest rate that stays valid past the
/// truncated grid ends (outward decay of the concave log-density there); a is the
/// smallest prefactor given b. Closed support ends impose no constraint.
TailFit tail_fit(const GridDensity& gd);

/// Restrict to nodes x >= x0 and renormalize (half-line densities for Muckenhoupt).
GridDensity restrict_left(const GridDensity& gd, double x0);

/// Loads `x,log_density` CSV (header required, strictly increasing x).
DensitySpec load_tabulated_csv(const std::string& path);

}  // namespace hflab
