// Heat-flow transport: the advection field W_s = -(1/2)(log rho_s)', the flow map T_s
// obtained by integrating it, and the checks that T_s expands and its inverse contracts.

#pragma once

#include "hflab/density.hpp"
#include "hflab/heatflow.hpp"
#include "hflab/test_functions.hpp"

#include <vector>

namespace hflab {

/// Measure whose flow is integrated: density * gamma_smoothing. smoothing = 0 requires
/// a density that is positive on the whole grid with C^2 log-density.
struct FlowBase {
    GridDensity density;
    double smoothing = 0.0;

    /// The measure at flow time s, on its extended grid.
    GridDensity at(double s) const;
    /// Scale eps with -(log rho)'' <= 1/eps: the smoothing itself, or the base curvature bound.
    double regularity() const;
};

struct FieldPoint {
    double w = 0.0;
    double dw = 0.0;
};

/// W_s(y) and W_s'(y); W_s' = (s - var p_{s,y}) / (2 s^2) in total time.
FieldPoint advection_at(const FlowBase& base, double s, double y);

struct AdvectionField {
    Grid1D grid;  // grid of the measure at time s
    double s = 0.0;
    std::vector<double> values;
    std::vector<double> derivative;
    double lipschitz_bound = 0.0;  // max |W_s'| over the inner half
    double fd_mismatch = 0.0;      // sup over the inner half of |W_s' - centered difference of W_s|
};

AdvectionField advection_field(const FlowBase& base, double s);

/// Piecewise-cubic Hermite interpolant on increasing nodes with given slopes;
/// slopes are limited per cell (Fritsch-Carlson) so monotone data stay monotone.
class HermiteCurve {
public:
    HermiteCurve() = default;
    HermiteCurve(std::vector<double> x, std::vector<double> y, std::vector<double> slope, bool monotone = true);

    double operator()(double x) const;
    double derivative(double x) const;
    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }

private:
    std::size_t cell(double x) const;
    std::vector<double> x_, y_, m_left_, m_right_;
};

struct TransportMap {
    double s_start = 0.0;
    double s_end = 0.0;
    std::vector<double> y_nodes;
    std::vector<double> t_values;
    std::vector<double> derivative;  // from the variational equation

    HermiteCurve curve;

    double operator()(double y) const { return curve(y); }
    double slope(double y) const { return curve.derivative(y); }
};

/// Validates monotonicity and builds the interpolant.
TransportMap make_map(double s_start, double s_end, std::vector<double> y_nodes, std::vector<double> t_values,
                      std::vector<double> derivative);

/// count equispaced starting points spanning the quantiles [tail, 1 - tail] of mu.
std::vector<double> flow_nodes(const GridDensity& mu, double tail, std::size_t count);

/// Classical RK4 on (T, DT) from s_start to s_end with steps graded uniformly in log(s + eps).
/// Throws when a trajectory leaves the resolved grid.
TransportMap integrate_flow(const FlowBase& base, const std::vector<double>& y_nodes, double s_end,
                            std::size_t steps, double s_start = 0.0);

struct ExpansionReport {
    double min_ratio = 0.0;
    double max_ratio = 0.0;
    double min_derivative = 0.0;
    double max_derivative = 0.0;
    bool expansion = false;    // min_ratio and min_derivative >= 1 - 1e-6
    bool contraction = false;  // max_ratio and max_derivative <= 1 + 1e-6
};

ExpansionReport expansion_check(const TransportMap& map);

/// Sup over nodes of |F_{mu_s}(T_s(y)) - F_mu(y)|.
double pushforward_check(const FlowBase& base, const TransportMap& map);

/// Monotone inversion; nodes and values swap roles, slopes invert.
TransportMap inverse_map(const TransportMap& map);

/// Sup over cell midpoints of |map^-1(map(y)) - y|.
double composition_residual(const TransportMap& map, const TransportMap& inverse);

struct RayleighTransfer {
    double lhs = 0.0;  // quotient of phi o T^-1 under mu_s
    double rhs = 0.0;  // quotient of phi under mu
    bool holds = false;
};

RayleighTransfer rayleigh_transfer_check(const TestFunction& phi, const FlowBase& base, const TransportMap& map,
                                         double slack);

struct TransportPoincare {
    double spectral_mu = 0.0;   // 1/lambda_1 of mu
    double transport_mu = 0.0;  // 1/R_mu(phi_1), phi_1 the first eigenfunction, high-order quadrature
    double lower_nu = 0.0;      // 1/R_{mu_s}(phi_1 o T^-1): certified lower bound for C_P(mu_s)
    double spectral_nu = 0.0;   // 1/lambda_1 of mu_s
    double richardson = 0.0;    // discretization estimate of C_P(mu)
    bool agree = false;         // |transport_mu - spectral_mu| <= 2 richardson
    bool certified = false;     // transport_mu <= lower_nu <= spectral_nu within slack
};

TransportPoincare transport_poincare(const FlowBase& base, double s, std::size_t nodes, std::size_t steps);

}  // namespace hflab
