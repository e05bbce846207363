#include "hflab/localization.hpp"

#include "hflab/heatflow.hpp"
#include "hflab/parallel.hpp"
#include "hflab/statistics.hpp"
#include "hflab/tilt.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace hflab {

namespace {

constexpr std::uint32_t kStreamX = 0;
constexpr std::uint32_t kStreamW = 1;
constexpr double kDriftSpacing = 0.05;

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::vector<double> time_grid(double T, std::size_t steps) {
    std::vector<double> t(steps + 1);
    for (std::size_t j = 0; j <= steps; ++j) t[j] = T * static_cast<double>(j) / static_cast<double>(steps);
    t.back() = T;
    return t;
}

// Brownian path on the uniform time grid. Power-of-two step counts use the Lévy midpoint
// construction in heap order, so W at a coarse time does not depend on the refinement.
std::vector<double> brownian(const CounterRng& rng, double T, std::size_t steps) {
    std::vector<double> w(steps + 1, 0.0);
    if (!is_power_of_two(steps)) {
        const double sd = std::sqrt(T / static_cast<double>(steps));
        for (std::size_t j = 0; j < steps; ++j) w[j + 1] = w[j] + sd * rng.normal(j);
        return w;
    }
    const double dt = T / static_cast<double>(steps);
    w[steps] = std::sqrt(T) * rng.normal(0);
    std::uint64_t k = 1;
    for (std::size_t len = steps; len >= 2; len /= 2)
        for (std::size_t a = 0; a < steps; a += len) {
            const std::size_t mid = a + len / 2;
            w[mid] = 0.5 * (w[a] + w[a + len]) + std::sqrt(static_cast<double>(len) * dt / 4.0) * rng.normal(k++);
        }
    return w;
}

double base_mean(const GridDensity& base) {
    std::vector<double> xr(base.grid.n);
    for (std::size_t i = 0; i < base.grid.n; ++i) xr[i] = base.grid.node(i) * base.values[i];
    return trapezoid(base.grid, xr);
}

// log rho(x) by linear interpolation of the log values; -inf outside the support.
double log_density_at(const GridDensity& gd, double x) {
    const auto& g = gd.grid;
    if (x < g.x_min || x > g.x_max) return -std::numeric_limits<double>::infinity();
    auto k = static_cast<std::size_t>((x - g.x_min) / g.h);
    k = std::min(k, g.n - 2);
    const double u = (x - g.node(k)) / g.h;
    const double a = gd.log_values[k], b = gd.log_values[k + 1];
    if (!std::isfinite(a) || !std::isfinite(b)) return u < 0.5 ? a : b;
    return (1.0 - u) * a + u * b;
}

PathEnsemble make_ensemble(PathKind kind, const SDEConfig& c, std::size_t steps) {
    PathEnsemble e;
    e.kind = kind;
    e.base_name = c.base.name();
    e.times = time_grid(c.T_end, steps);
    e.M = c.M;
    e.paths.assign(c.M * (steps + 1), 0.0);
    return e;
}

std::pair<double, double> support_span(const GridDensity& gd) {
    const auto [first, last] = gd.support_range();
    return {gd.grid.node(first), gd.grid.node(last)};
}

}  // namespace

void SDEConfig::validate() const {
    if (!(T_end > 0.0) || !std::isfinite(T_end)) throw std::invalid_argument("sde: T_end must be positive");
    if (!(dt > 0.0) || dt > 1e-2 * T_end * (1.0 + 1e-12)) throw std::invalid_argument("sde: dt must be <= T_end / 100");
    if (M < 1000) throw std::invalid_argument("sde: M must be >= 1000");
    if (grid_n < 3) throw std::invalid_argument("sde: grid_n must be >= 3");
}

std::size_t SDEConfig::steps() const { return static_cast<std::size_t>(std::llround(T_end / dt)); }

std::string to_string(PathKind kind) {
    switch (kind) {
        case PathKind::sde_tilt: return "sde_tilt";
        case PathKind::bayesian_tilt: return "bayesian_tilt";
        case PathKind::follmer: return "follmer";
        case PathKind::bridge: return "bridge";
    }
    return "unknown";
}

std::size_t PathEnsemble::time_index(double t) const {
    for (std::size_t j = 0; j < times.size(); ++j)
        if (std::abs(times[j] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return j;
    std::ostringstream os;
    os << "ensemble: time " << t << " is not on the time grid";
    throw std::invalid_argument(os.str());
}

std::vector<double> PathEnsemble::marginal(double t) const {
    const std::size_t j = time_index(t);
    std::vector<double> out(M);
    for (std::size_t p = 0; p < M; ++p) out[p] = at(p, j);
    return out;
}

InverseCdf::InverseCdf(const GridDensity& gd)
    : grid_(gd.grid), values_(gd.values), cumulative_(cumulative_trapezoid(gd.grid, gd.values)) {}

double InverseCdf::operator()(double u) const {
    const double target = u * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    std::size_t k = it == cumulative_.begin() ? 0 : static_cast<std::size_t>(it - cumulative_.begin()) - 1;
    k = std::min(k, grid_.n - 2);
    // Solve h (a v + (b - a) v^2 / 2) = target - F_k for v in [0, 1].
    const double a = values_[k], b = values_[k + 1];
    const double q = std::max(0.0, target - cumulative_[k]) / grid_.h;
    const double disc = std::max(0.0, a * a + 2.0 * (b - a) * q);
    const double denom = a + std::sqrt(disc);
    const double v = denom > 0.0 ? std::clamp(2.0 * q / denom, 0.0, 1.0) : 0.5;
    return grid_.node(k) + v * grid_.h;
}

PosteriorSnapshot posterior(const GridDensity& base, double t, double theta) {
    if (!(t > 0.0)) throw std::invalid_argument("posterior: t must be positive");
    const double s = 1.0 / t, y = theta / t;
    TiltedDensity td = tilt_density(base, s, y);
    const TiltMoments m = tilt_moments(base, s, y);
    return {t, theta, std::move(td.density), m.mean};
}

double drift(const GridDensity& base, double t, double theta) {
    if (t == 0.0) return base_mean(base);
    return tilt_moments(base, 1.0 / t, theta / t).mean;
}

DriftTable::DriftTable(const GridDensity& base, double t, double theta_min, double theta_max, double spacing)
    : base_(&base), t_(t), lo_(theta_min) {
    if (!(t > 0.0) || !(theta_max > theta_min) || !(spacing > 0.0))
        throw std::invalid_argument("DriftTable: need t > 0 and a non-empty lattice");
    const auto cells = static_cast<std::size_t>(std::ceil((theta_max - theta_min) / spacing));
    step_ = (theta_max - theta_min) / static_cast<double>(cells);
    value_.resize(cells + 1);
    slope_.resize(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) {
        const TiltMoments m = tilt_moments(base, 1.0 / t, (lo_ + step_ * static_cast<double>(i)) / t);
        value_[i] = m.mean;
        slope_[i] = m.var;
    }
}

double DriftTable::operator()(double theta) const {
    const double r = (theta - lo_) / step_;
    if (!(r >= 0.0) || r >= static_cast<double>(value_.size() - 1)) return drift(*base_, t_, theta);
    const auto k = static_cast<std::size_t>(r);
    const double u = r - static_cast<double>(k), u2 = u * u, u3 = u2 * u;
    return (2.0 * u3 - 3.0 * u2 + 1.0) * value_[k] + (u3 - 2.0 * u2 + u) * step_ * slope_[k] +
           (-2.0 * u3 + 3.0 * u2) * value_[k + 1] + (u3 - u2) * step_ * slope_[k + 1];
}

PathEnsemble simulate_bayesian(const SDEConfig& c) {
    c.validate();
    const std::size_t steps = c.steps();
    const GridDensity base = discretize(c.base, c.grid_n, c.eps_tail);
    const InverseCdf sampler(base);
    PathEnsemble e = make_ensemble(PathKind::bayesian_tilt, c, steps);
    e.hidden_X.resize(c.M);
    parallel_for(c.M, c.jobs, [&](std::size_t p) {
        const double x = sampler(CounterRng(c.seed, p, kStreamX).uniform(0));
        const std::vector<double> w = brownian(CounterRng(c.seed, p, kStreamW), c.T_end, steps);
        e.hidden_X[p] = x;
        for (std::size_t j = 0; j <= steps; ++j) e.paths[p * (steps + 1) + j] = e.times[j] * x + w[j];
    });
    return e;
}

std::vector<PathEnsemble> simulate_bayesian_product(const SDEConfig& c, std::size_t dimension) {
    if (dimension < 1 || dimension > 3) throw std::invalid_argument("simulate_bayesian_product: dimension must be 1..3");
    c.validate();
    const std::size_t steps = c.steps();
    const GridDensity base = discretize(c.base, c.grid_n, c.eps_tail);
    const InverseCdf sampler(base);
    std::vector<PathEnsemble> out;
    for (std::size_t d = 0; d < dimension; ++d) {
        PathEnsemble e = make_ensemble(PathKind::bayesian_tilt, c, steps);
        e.hidden_X.resize(c.M);
        const auto sx = static_cast<std::uint32_t>(2 * d + kStreamX), sw = static_cast<std::uint32_t>(2 * d + kStreamW);
        parallel_for(c.M, c.jobs, [&](std::size_t p) {
            const double x = sampler(CounterRng(c.seed, p, sx).uniform(0));
            const std::vector<double> w = brownian(CounterRng(c.seed, p, sw), c.T_end, steps);
            e.hidden_X[p] = x;
            for (std::size_t j = 0; j <= steps; ++j) e.paths[p * (steps + 1) + j] = e.times[j] * x + w[j];
        });
        out.push_back(std::move(e));
    }
    return out;
}

PathEnsemble simulate_sde(const SDEConfig& c) {
    c.validate();
    const std::size_t steps = c.steps();
    const GridDensity base = discretize(c.base, c.grid_n, c.eps_tail);
    const auto [x_lo, x_hi] = support_span(base);
    PathEnsemble e = make_ensemble(PathKind::sde_tilt, c, steps);

    const double mean0 = base_mean(base);
    std::vector<std::optional<DriftTable>> built(steps);
    parallel_for(steps - 1, c.jobs, [&](std::size_t i) {
        const double t = e.times[i + 1];
        const double reach = 7.0 * std::sqrt(t);
        built[i + 1].emplace(base, t, t * x_lo - reach, t * x_hi + reach, kDriftSpacing);
    });

    parallel_for(c.M, c.jobs, [&](std::size_t p) {
        const std::vector<double> w = brownian(CounterRng(c.seed, p, kStreamW), c.T_end, steps);
        double theta = 0.0;
        double* row = &e.paths[p * (steps + 1)];
        row[0] = 0.0;
        for (std::size_t j = 0; j < steps; ++j) {
            double a = mean0;
            if (j > 0) {
                try {
                    a = (*built[j])(theta);
                } catch (const OutOfRange&) {
                    std::ostringstream os;
                    os << "simulate_sde: drift out of range on path " << p << " at t = " << e.times[j];
                    throw std::runtime_error(os.str());
                }
            }
            theta += a * (e.times[j + 1] - e.times[j]) + (w[j + 1] - w[j]);
            row[j + 1] = theta;
        }
    });
    return e;
}

PathEnsemble simulate_follmer(const SDEConfig& c) {
    c.validate();
    if (std::abs(c.T_end - 1.0) > 1e-12) throw std::invalid_argument("simulate_follmer: T_end must be 1");
    const std::size_t steps = c.steps();
    const GridDensity base = discretize(c.base, c.grid_n, c.eps_tail);
    const InverseCdf sampler(base);
    PathEnsemble e = make_ensemble(PathKind::follmer, c, steps);
    e.hidden_X.resize(c.M);
    parallel_for(c.M, c.jobs, [&](std::size_t p) {
        const double x = sampler(CounterRng(c.seed, p, kStreamX).uniform(0));
        const std::vector<double> w = brownian(CounterRng(c.seed, p, kStreamW), 1.0, steps);
        e.hidden_X[p] = x;
        double* row = &e.paths[p * (steps + 1)];
        for (std::size_t j = 0; j <= steps; ++j) row[j] = e.times[j] * x + (w[j] - e.times[j] * w[steps]);
        row[steps] = x;
    });
    return e;
}

PathEnsemble simulate_bridge(const SDEConfig& c) {
    c.validate();
    if (std::abs(c.T_end - 1.0) > 1e-12) throw std::invalid_argument("simulate_bridge: T_end must be 1");
    const std::size_t steps = c.steps();
    PathEnsemble e = make_ensemble(PathKind::bridge, c, steps);
    parallel_for(c.M, c.jobs, [&](std::size_t p) {
        const std::vector<double> w = brownian(CounterRng(c.seed, p, kStreamW), 1.0, steps);
        double* row = &e.paths[p * (steps + 1)];
        for (std::size_t j = 0; j <= steps; ++j) row[j] = w[j] - e.times[j] * w[steps];
        row[steps] = 0.0;
    });
    return e;
}

KsResult ks_check(const std::vector<double>& a, const std::vector<double>& b) {
    KsResult r;
    r.statistic = ks_distance(a, b);
    r.threshold = ks_threshold(a.size(), b.size());
    r.pass = r.statistic <= r.threshold;
    return r;
}

KsResult law_equality_check(const PathEnsemble& e1, const PathEnsemble& e2, double t) {
    if (e1.base_name != e2.base_name) throw std::invalid_argument("law_equality_check: ensembles use different bases");
    return ks_check(e1.marginal(t), e2.marginal(t));
}

std::vector<MartingaleProbe> martingale_check(const PathEnsemble& e, const GridDensity& base,
                                              const std::vector<double>& probe_x, double t) {
    if (e.kind != PathKind::sde_tilt && e.kind != PathKind::bayesian_tilt)
        throw std::invalid_argument("martingale_check: needs a tilt ensemble");
    const std::vector<double> theta = e.marginal(t);
    std::vector<double> log_Z(theta.size());
    if (t > 0.0)
        for (std::size_t p = 0; p < theta.size(); ++p) log_Z[p] = log_partition(base, 1.0 / t, theta[p] / t);
    std::vector<MartingaleProbe> out;
    for (double x : probe_x) {
        MartingaleProbe probe;
        probe.x = x;
        const double l0 = log_density_at(base, x);
        probe.target = std::exp(l0);
        std::vector<double> values(theta.size());
        for (std::size_t p = 0; p < theta.size(); ++p)
            values[p] = t > 0.0 ? std::exp(l0 + theta[p] * x - 0.5 * t * x * x - log_Z[p]) : probe.target;
        probe.mean = sample_mean(values);
        probe.sigma = std::sqrt(sample_variance(values) / static_cast<double>(values.size()));
        probe.pass = std::abs(probe.mean - probe.target) <= 3.0 * probe.sigma + 1e-12;
        out.push_back(probe);
    }
    return out;
}

KsResult time_inversion_check(const PathEnsemble& sde, const GridDensity& base, double t,
                              const std::vector<double>& phi, std::uint64_t seed) {
    if (!(t > 0.0)) throw std::invalid_argument("time_inversion_check: t must be positive");
    const double s = 1.0 / t;
    const std::vector<double> theta = sde.marginal(t);
    std::vector<double> a(theta.size()), b(theta.size());
    for (std::size_t p = 0; p < theta.size(); ++p) a[p] = q_point(phi, base, s, theta[p] / t).value;
    const InverseCdf sampler(base);
    for (std::size_t p = 0; p < theta.size(); ++p) {
        const double x = sampler(CounterRng(seed, p, kStreamX).uniform(0));
        const double y = x + std::sqrt(s) * CounterRng(seed, p, kStreamW).normal(0);
        b[p] = q_point(phi, base, s, y).value;
    }
    return ks_check(a, b);
}

KsResult follmer_tilt_relation_check(const SDEConfig& c, double t) {
    if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("follmer_tilt_relation_check: t must lie in (0, 1)");
    SDEConfig fc = c;
    fc.T_end = 1.0;
    fc.dt = std::min(c.dt, 1.0 / 128.0);
    const PathEnsemble follmer = simulate_follmer(fc);
    const GridDensity base = discretize(c.base, c.grid_n, c.eps_tail);
    const InverseCdf sampler(base);
    const double u = t / (1.0 - t);
    const std::uint64_t seed = c.seed + 0x9E3779B97F4A7C15ull;
    std::vector<double> compressed(c.M);
    for (std::size_t p = 0; p < c.M; ++p) {
        const double x = sampler(CounterRng(seed, p, kStreamX).uniform(0));
        compressed[p] = (1.0 - t) * (u * x + std::sqrt(u) * CounterRng(seed, p, kStreamW).normal(0));
    }
    return ks_check(follmer.marginal(t), compressed);
}

KsResult terminal_law_check(const PathEnsemble& sde, const GridDensity& base, std::uint64_t seed) {
    const double T = sde.times.back();
    const InverseCdf sampler(heat_convolve(base, 1.0 / T));
    std::vector<double> scaled(sde.M);
    for (std::size_t p = 0; p < sde.M; ++p) scaled[p] = T * sampler(CounterRng(seed, p, kStreamX).uniform(0));
    return ks_check(sde.marginal(T), scaled);
}

AveragedPosterior posterior_from_averaged_observations(const std::vector<std::pair<double, double>>& prior,
                                                       const std::vector<double>& obs) {
    const std::size_t N = obs.size();
    if (N < 2) throw std::invalid_argument("averaged observations: need at least two observations");
    if (prior.empty()) throw std::invalid_argument("averaged observations: empty prior");
    Eigen::MatrixXd cov(N, N);
    for (std::size_t j = 0; j < N; ++j)
        for (std::size_t k = 0; k < N; ++k) cov(j, k) = 1.0 / static_cast<double>(std::max(j, k) + 1);
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw std::runtime_error("averaged observations: singular covariance");

    AveragedPosterior out;
    std::vector<double> log_full, log_last;
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(obs.data(), static_cast<Eigen::Index>(N));
    for (const auto& [state, weight] : prior) {
        if (!(weight > 0.0)) throw std::invalid_argument("averaged observations: prior weights must be positive");
        out.states.push_back(state);
        const Eigen::VectorXd r = y - Eigen::VectorXd::Constant(static_cast<Eigen::Index>(N), state);
        log_full.push_back(std::log(weight) - 0.5 * r.dot(llt.solve(r)));
        const double d = obs.back() - state;
        log_last.push_back(std::log(weight) - 0.5 * static_cast<double>(N) * d * d);
    }
    auto normalize = [](const std::vector<double>& logs) {
        const double peak = *std::max_element(logs.begin(), logs.end());
        std::vector<double> p(logs.size());
        double sum = 0.0;
        for (std::size_t i = 0; i < logs.size(); ++i) sum += (p[i] = std::exp(logs[i] - peak));
        for (double& v : p) v /= sum;
        return p;
    };
    out.posterior = normalize(log_full);
    out.last_only = normalize(log_last);
    for (std::size_t i = 0; i < out.states.size(); ++i)
        out.total_variation += 0.5 * std::abs(out.posterior[i] - out.last_only[i]);
    out.path_independent = out.total_variation <= 1e-10;
    return out;
}

void write_ensemble_csv(std::ostream& out, const PathEnsemble& e, std::size_t max_paths) {
    const bool hidden = !e.hidden_X.empty();
    out << "path_id,t,theta" << (hidden ? ",x_hidden" : "") << '\n';
    out.precision(17);
    for (std::size_t p = 0; p < std::min(max_paths, e.M); ++p)
        for (std::size_t j = 0; j < e.times.size(); ++j) {
            out << p << ',' << e.times[j] << ',' << e.at(p, j);
            if (hidden) out << ',' << e.hidden_X[p];
            out << '\n';
        }
}

}  // namespace hflab
