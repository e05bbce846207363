// Weighted Laplacian L u = u'' + (log rho)' u' on a grid: assembly, low spectrum,
// Poincaré and Cheeger constants, the Muckenhoupt bound and monotonicity sweeps.

#pragma once

#include "hflab/density.hpp"
#include "hflab/heatflow.hpp"

#include <vector>

namespace hflab {

/// Divergence-form discretization with geometric-mean face weights and zero-flux ends,
/// conjugated by sqrt(c_i rho_i h) into the symmetric tridiagonal matrix S = -M^{1/2} L M^{-1/2}.
/// Lives on the support nodes of the density.
struct DiscreteOperator {
    Grid1D grid;             // support sub-grid
    std::size_t offset = 0;  // index of grid.node(0) in density.grid
    std::vector<double> diag;
    std::vector<double> offdiag;
    std::vector<double> weight;      // sqrt(c_i rho_i h)
    std::vector<double> log_values;  // log rho on the support sub-grid
    GridDensity density;

    /// (L u)_i for u on the support sub-grid.
    std::vector<double> apply(const std::vector<double>& u) const;
    /// sum over faces of rho_{i+1/2} ((u_{i+1} - u_i)/h)^2 h
    double energy(const std::vector<double>& u) const;
    /// trapezoid  sum c_i rho_i h u_i^2
    double mass(const std::vector<double>& u) const;
    /// trapezoid  sum c_i rho_i h u_i v_i
    double inner(const std::vector<double>& u, const std::vector<double>& v) const;
};

DiscreteOperator assemble_L(const GridDensity& gd);

struct SpectrumResult {
    std::vector<double> eigenvalues;        // of -L, ascending
    std::vector<GridField> eigenvectors;    // on the support sub-grid, L^2(mu)-normalized
    std::vector<std::vector<double>> conjugated;  // unit eigenvectors of S
    double poincare = 0.0;
    std::vector<double> richardson;         // |lambda_h - lambda_2h| / 3 per eigenvalue
};

/// Lowest K + 1 eigenpairs; richardson from a re-solve on every other node.
SpectrumResult eigen_spectrum(const DiscreteOperator& op, std::size_t K, bool with_richardson = true);

double poincare_constant(const GridDensity& gd);

/// (integral phi'^2 dmu) / (integral phi^2 dmu) with face differences; phi on gd's grid.
double rayleigh(const GridField& phi, const GridDensity& gd);

double monotone_slack(double richardson);

struct RayleighTrace {
    std::vector<double> s;
    std::vector<double> quotient;
    std::vector<double> log_norm;    // log of the L^2(mu_s) norm of Q_s phi
    std::vector<double> richardson;  // per ladder entry, from a half-resolution base
    double tol_mono = 0.0;
    double worst_increase = 0.0;     // max over consecutive pairs of R(s_{j+1}) - R(s_j)
    double worst_convexity = 0.0;    // max violation of midpoint convexity of log_norm
    bool monotone = false;
    bool convex = false;
};

/// phi sampled on the base grid; s = 0 entries use the base directly.
RayleighTrace rayleigh_flow(const GridField& phi, const GridDensity& base, const std::vector<double>& s_ladder);

struct IsoperimetricResult {
    double h = 0.0;
    double argmin_t = 0.0;
    double poincare = 0.0;
    double cheeger_product = 0.0;
};

/// Half-line Cheeger constant min_t rho(t) / min(F(t), 1 - F(t)).
double cheeger_h(const GridDensity& gd, double* argmin = nullptr);
IsoperimetricResult cheeger_constant(const GridDensity& gd);

struct SpectralFlow {
    std::vector<double> s;
    std::vector<SpectrumResult> spectra;
    std::vector<double> cheeger;        // h(mu_s)
    std::size_t asserted_levels = 0;    // eigenvalues 1..asserted_levels enter the monotonicity verdict
    double worst_increase = 0.0;        // max of lambda_k(s_{j+1}) - lambda_k(s_j) - tol_mono over asserted k
    bool monotone = false;
};

/// Ladder of spectra of mu * gamma_s. With assert_all = false only lambda_1 is asserted
/// (for bases whose higher spectrum is not discrete).
SpectralFlow spectral_flow(const GridDensity& base, const std::vector<double>& s_ladder, std::size_t K,
                           bool assert_all = true);

struct MuckenhouptResult {
    double C = 0.0;
    double bound = 0.0;     // 4C
    double argmax_r = 0.0;
    double poincare = 0.0;
    bool holds = false;     // poincare <= 4C (1 + 1e-6)
};

/// Half-line Hardy constant sup_r (int_r^end rho)(int_start^r 1/rho) over the grid.
MuckenhouptResult muckenhoupt_constant(const GridDensity& gd);

struct InterpolationReport {
    double lhs = 0.0;  // <-Lu, u>^2
    double rhs = 0.0;  // <Lu, Lu> <u, u>
    bool holds = false;
};

/// u on the support sub-grid; it is centered in L^2(mu) first.
InterpolationReport interpolation_check(const std::vector<double>& u, const DiscreteOperator& op);

struct StrictDecrease {
    double margin = 0.0;      // lambda_k(s + ds) - lambda_k(s)
    double richardson = 0.0;
    bool strict = false;      // margin < -richardson
};

StrictDecrease strict_decrease_probe(const GridDensity& base, double s, double ds, std::size_t k);

/// Richardson-extrapolated sup over the inner half of |L_s u - box_s u - u''/2| on rho_s.
double box_decomposition_residual(const std::function<double(double)>& u, const GridDensity& base, double s);

}  // namespace hflab
