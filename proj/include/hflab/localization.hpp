// Stochastic localization: the tilt process in SDE and Bayesian form, the Föllmer
// process, and distributional checks relating them to the tilt operator.

#pragma once

#include "hflab/density.hpp"
#include "hflab/rng.hpp"

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace hflab {

struct SDEConfig {
    DensitySpec base = DensitySpec::gaussian(1.0);
    std::size_t grid_n = 1025;
    double eps_tail = 1e-10;
    double T_end = 1.0;
    double dt = 1.0 / 256.0;
    std::size_t M = 10000;
    std::uint64_t seed = 1;
    std::size_t jobs = 1;

    /// Throws std::invalid_argument unless dt <= T_end / 100 and M >= 1000.
    void validate() const;
    /// Number of time steps round(T_end / dt).
    std::size_t steps() const;
};

enum class PathKind { sde_tilt, bayesian_tilt, follmer, bridge };

std::string to_string(PathKind kind);

struct PathEnsemble {
    PathKind kind = PathKind::bayesian_tilt;
    std::string base_name;
    std::vector<double> times;
    std::vector<double> paths;     // row-major, M rows of times.size() entries
    std::vector<double> hidden_X;  // per path, Bayesian and Föllmer kinds
    std::size_t M = 0;

    double at(std::size_t path, std::size_t step) const { return paths[path * times.size() + step]; }
    /// Index of the time node equal to t (within 1e-9); throws otherwise.
    std::size_t time_index(double t) const;
    /// Values of all paths at time t.
    std::vector<double> marginal(double t) const;
};

/// Inverse of the CDF of a grid density, exact for the piecewise-linear density.
class InverseCdf {
public:
    explicit InverseCdf(const GridDensity& gd);
    double operator()(double u) const;

private:
    Grid1D grid_;
    std::vector<double> values_;
    std::vector<double> cumulative_;
};

struct PosteriorSnapshot {
    double t = 0.0;
    double theta = 0.0;
    GridDensity density;
    double barycenter = 0.0;
};

/// p_{t,theta}(x) ∝ exp(theta x - t x^2 / 2) rho(x), i.e. the tilt with s = 1/t, y = theta/t.
PosteriorSnapshot posterior(const GridDensity& base, double t, double theta);

/// a(t, theta): barycenter of the posterior; the base mean at t = 0.
double drift(const GridDensity& base, double t, double theta);

/// Drift at a fixed time, tabulated on a theta lattice and interpolated by cubic Hermite
/// with the exact slope d a / d theta = variance. Falls back to direct evaluation off the lattice.
class DriftTable {
public:
    DriftTable(const GridDensity& base, double t, double theta_min, double theta_max, double spacing);
    double operator()(double theta) const;
    double t() const { return t_; }

private:
    const GridDensity* base_;
    double t_;
    double lo_;
    double step_;
    std::vector<double> value_;
    std::vector<double> slope_;
};

PathEnsemble simulate_bayesian(const SDEConfig& config);
PathEnsemble simulate_sde(const SDEConfig& config);
/// Requires T_end = 1; X_1 = X on every path.
PathEnsemble simulate_follmer(const SDEConfig& config);
/// Standard Brownian bridge W_t - t W_1 on [0, 1].
PathEnsemble simulate_bridge(const SDEConfig& config);
/// Coordinates of tX + W_t for a product base in dimension 1..3: one ensemble per coordinate.
std::vector<PathEnsemble> simulate_bayesian_product(const SDEConfig& config, std::size_t dimension);

struct KsResult {
    double statistic = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

KsResult ks_check(const std::vector<double>& a, const std::vector<double>& b);

/// KS distance between the time-t marginals of two ensembles over the same base.
KsResult law_equality_check(const PathEnsemble& e1, const PathEnsemble& e2, double t);

struct MartingaleProbe {
    double x = 0.0;
    double mean = 0.0;   // mean over paths of p_{t, theta_t}(x)
    double target = 0.0; // p_0(x)
    double sigma = 0.0;  // standard error of the mean
    bool pass = false;   // |mean - target| <= 3 sigma
};

std::vector<MartingaleProbe> martingale_check(const PathEnsemble& e, const GridDensity& base,
                                              const std::vector<double>& probe_x, double t);

/// A: integral of phi against the posterior along the SDE ensemble at time t.
/// B: Q_s phi(X + N(0, s)) with s = 1/t, drawn independently from seed.
KsResult time_inversion_check(const PathEnsemble& sde, const GridDensity& base, double t,
                              const std::vector<double>& phi, std::uint64_t seed);

/// KS between the Föllmer marginal X_t and (1 - t) theta_{t/(1 - t)} of the Bayesian process.
KsResult follmer_tilt_relation_check(const SDEConfig& config, double t);

/// KS between theta_T of the SDE ensemble and T Z with Z ~ mu * gamma_{1/T}.
KsResult terminal_law_check(const PathEnsemble& sde, const GridDensity& base, std::uint64_t seed);

struct AveragedPosterior {
    std::vector<double> states;
    std::vector<double> posterior;  // from the full observation vector
    std::vector<double> last_only;  // from the last observation with noise variance 1/N
    double total_variation = 0.0;
    bool path_independent = false;  // total_variation <= 1e-10
};

/// Observations Y_k = X + (Z_1 + ... + Z_k)/k, k = 1..N, with a finite prior.
AveragedPosterior posterior_from_averaged_observations(const std::vector<std::pair<double, double>>& prior,
                                                       const std::vector<double>& observations);

/// `path_id,t,theta[,x_hidden]` rows for the first max_paths paths.
void write_ensemble_csv(std::ostream& out, const PathEnsemble& e, std::size_t max_paths);

}  // namespace hflab
