// Tilted densities p_{s,y}(x) ∝ exp(xy/s - x^2/(2s)) rho(x), the averaging operator Q_s
// and the dynamic carré du champ calculus of the heat flow.

#pragma once

#include "hflab/density.hpp"
#include "hflab/heatflow.hpp"

#include <stdexcept>
#include <vector>

namespace hflab {

/// Raised when the observation point is too far from the base support for a tilt.
class OutOfRange : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Throws OutOfRange when y is more than 8 sqrt(s) (plus one cell) away from the support.
void require_in_range(const GridDensity& base, double s, double y);

double log_partition(const GridDensity& base, double s, double y);

struct TiltedDensity {
    double s = 0.0;
    double y = 0.0;
    double log_Z = 0.0;
    GridDensity density;  // on the base grid
};

TiltedDensity tilt_density(const GridDensity& base, double s, double y);

struct TiltMoments {
    double mean = 0.0;
    double var = 0.0;
};

TiltMoments tilt_moments(const GridDensity& base, double s, double y);

/// Averages of phi against p_{s,y} with the first two y-derivatives.
struct QPoint {
    double value = 0.0;
    double gradient = 0.0;  // Cov(x, phi) / s
    double hessian = 0.0;   // E[(x - m)^2 (phi - Q phi)] / s^2
};

/// phi is sampled on the base grid.
QPoint q_point(const std::vector<double>& phi, const GridDensity& base, double s, double y);

struct QEvaluation {
    double s = 0.0;
    GridField values;
    GridField gradient;
    GridField hessian;
};

QEvaluation apply_Q(const GridField& phi, const GridDensity& base, double s, const Grid1D& y_grid);

/// First and second derivatives of log rho_s at y, from the tilt moments.
struct LogDensityJet {
    double log_density = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

LogDensityJet log_density_jet(const GridDensity& base, double s, double y);

/// Derivatives of log rho_s at every node of grid; s = 0 uses centered differences of the base.
struct LogDensityDerivatives {
    std::vector<double> d1;
    std::vector<double> d2;
};

LogDensityDerivatives log_density_derivatives(const GridDensity& base, double s, const Grid1D& grid);

/// Sup over the inner half of |d/ds Q_s phi - box_s Q_s phi|.
double q_time_derivative_check(const GridField& phi, const GridDensity& base, double s, double ds);

/// box_s u = u''/2 + (log rho_s)' u' with centered differences on u's grid
/// (which must be the grid of heat_convolve(base, s)). End nodes are set to 0.
GridField box_apply(const GridField& u, const GridDensity& base, double s);

struct GammaReport {
    double s = 0.0;
    int level = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
};

/// lhs: box |u'|^2 - 2 (box u)' u' by finite differences; rhs: (u'')^2 - 2 (log rho_s)'' (u')^2.
/// Reports the sup residual over the inner half; lhs and rhs are the values at the worst node.
GammaReport gamma2(const GridField& u, const GridDensity& base, double s);

/// Integrals over mu_s of Gamma_0, Gamma_1, Gamma_2 of Q_s phi.
struct GammaIntegrals {
    double g0 = 0.0;
    double g1 = 0.0;
    double g2 = 0.0;
};

GammaIntegrals gamma_integrals(const GridField& phi, const GridDensity& base, double s);
/// Same for several functions sharing one pass over the kernel windows.
std::vector<GammaIntegrals> gamma_integrals(const std::vector<GridField>& phis, const GridDensity& base, double s);

struct FlowIdentity {
    GammaReport level0;
    GammaReport level1;
};

/// Both levels of flow_identity_check for several functions.
std::vector<FlowIdentity> flow_identities(const std::vector<GridField>& phis, const GridDensity& base, double s,
                                          double ds);

/// lhs: centered s-difference of the level-i integral; rhs: minus the level-(i+1) integral.
GammaReport flow_identity_check(const GridField& phi, const GridDensity& base, double s, double ds, int level);

/// Pointwise consequences of Cauchy-Schwarz and log-concavity at every inner node of rho_s.
struct PointwiseBounds {
    double value_margin = 0.0;     // min of P_s(phi^2 rho) - phi_s^2 rho_s
    double gradient_margin = 0.0;  // min of P_s(phi'^2 rho) - phi_s'^2 rho_s
    double strong_margin = 0.0;    // min of Q_s|phi'| - |phi_s'|
};

PointwiseBounds pointwise_bounds(const GridField& phi, const GridField& dphi, const GridDensity& base, double s);

}  // namespace hflab
