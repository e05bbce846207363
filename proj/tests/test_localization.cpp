#include "doctest.h"
#include "support.hpp"

#include "hflab/localization.hpp"
#include "hflab/rng.hpp"
#include "hflab/statistics.hpp"
#include "hflab/tilt.hpp"

#include <cmath>
#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <sstream>

using namespace hflab;
using namespace hflab::testing;

namespace {

SDEConfig config_for(const DensitySpec& spec, std::uint64_t seed, double T_end = 2.0, std::size_t M = 10000) {
    SDEConfig c;
    c.base = spec;
    c.T_end = T_end;
    c.dt = T_end / 256.0;
    c.M = M;
    c.seed = seed;
    return c;
}

const GridDensity& base_of(const SDEConfig& c) {
    static std::map<std::string, GridDensity> cache;
    auto it = cache.find(c.base.name());
    if (it == cache.end()) it = cache.emplace(c.base.name(), discretize(c.base, c.grid_n, c.eps_tail)).first;
    return it->second;
}

// Bayes posterior over a finite prior from Gaussian observations with covariance 1 / max(j, k).
std::vector<double> brute_force_posterior(const std::vector<std::pair<double, double>>& prior, const std::vector<double>& y) {
    const std::size_t n = y.size();
    Eigen::MatrixXd S(n, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) S(j, k) = 1.0 / static_cast<double>(std::max(j, k) + 1);
    const Eigen::MatrixXd P = S.inverse();
    std::vector<double> w;
    double total = 0.0;
    for (const auto& [x, p] : prior) {
        Eigen::VectorXd r(n);
        for (std::size_t j = 0; j < n; ++j) r(j) = y[j] - x;
        w.push_back(p * std::exp(-0.5 * r.dot(P * r)));
        total += w.back();
    }
    for (double& v : w) v /= total;
    return w;
}

}  // namespace

TEST_CASE("Philox4x32-10 known answers") {
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == PhiloxBlock{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          PhiloxBlock{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          PhiloxBlock{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("counter draws are pure and well distributed") {
    const CounterRng a(7, 3, 0), b(7, 3, 0), c(7, 3, 1), d(7, 4, 0);
    CHECK(a.normal(11) == b.normal(11));
    CHECK(a.normal(11) != c.normal(11));
    CHECK(a.normal(11) != d.normal(11));
    std::vector<double> u, z;
    for (std::uint64_t i = 0; i < 20000; ++i) {
        u.push_back(a.uniform(i));
        z.push_back(a.normal(i));
        CHECK(u.back() > 0.0);
        CHECK(u.back() < 1.0);
    }
    CHECK(std::abs(sample_mean(u) - 0.5) <= 3.0 * std::sqrt(1.0 / 12.0 / 20000.0));
    CHECK(std::abs(sample_mean(z)) <= 3.0 / std::sqrt(20000.0));
    CHECK(std::abs(sample_variance(z) - 1.0) <= 3.0 * std::sqrt(2.0 / 20000.0));
}

TEST_CASE("sample statistics and KS distance") {
    CHECK(sample_mean({1.0, 2.0, 3.0, 4.0}) == doctest::Approx(2.5));
    CHECK(sample_variance({1.0, 2.0, 3.0, 4.0}) == doctest::Approx(5.0 / 3.0));
    CHECK(ks_distance({1.0, 1.0, 2.0}, {1.0, 2.0, 2.0}) == doctest::Approx(1.0 / 3.0));
    CHECK(ks_distance({0.3, 0.1, 0.2}, {0.2, 0.3, 0.1}) == 0.0);
    CHECK(ks_distance({0.0, 1.0}, {2.0, 3.0}) == 1.0);
    CHECK(ks_threshold(10000, 10000) == doctest::Approx(0.023052).epsilon(1e-4));
}

TEST_CASE("SDE configuration validation") {
    SDEConfig c = config_for(DensitySpec::gaussian(1.0), 1);
    CHECK_NOTHROW(c.validate());
    c.dt = 0.1;
    CHECK_THROWS(c.validate());
    c = config_for(DensitySpec::gaussian(1.0), 1);
    c.M = 999;
    CHECK_THROWS(c.validate());
    CHECK(config_for(DensitySpec::gaussian(1.0), 1).steps() == 256);
}

TEST_CASE("posterior snapshots") {
    const GridDensity g = discretize(DensitySpec::gaussian(1.0), 1025);
    const PosteriorSnapshot p = posterior(g, 1.0, 2.0);
    const TiltMoments m = tilt_moments(g, 1.0, 2.0);
    CHECK(std::abs(p.barycenter - 1.0) <= 1e-4);
    CHECK(std::abs(m.var - 0.5) <= 1e-4);

    const PosteriorSnapshot early = posterior(g, 1e-4, 0.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.grid.n; ++i) worst = std::max(worst, std::abs(early.density.values[i] - g.values[i]));
    CHECK(worst <= 1e-3);

    const GridDensity u = discretize(DensitySpec::uniform(-1.0, 1.0), 1025);
    const auto& v = posterior(u, 1.0, 0.0).density.values;
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(v[i] - v[v.size() - 1 - i]) <= 1e-12);
}

TEST_CASE("posterior is the tilt with s = 1/t and y = theta/t") {
    const GridDensity q = discretize(DensitySpec::quartic(1.0), 1025);
    for (double t : {0.5, 2.0})
        for (double theta : {-1.0, 0.3}) {
            const PosteriorSnapshot p = posterior(q, t, theta);
            const TiltedDensity td = tilt_density(q, 1.0 / t, theta / t);
            for (std::size_t i = 0; i < q.grid.n; ++i) CHECK(std::abs(p.density.values[i] - td.density.values[i]) <= 1e-12);
        }
}

TEST_CASE("drift and its cached table") {
    const GridDensity q = discretize(DensitySpec::quartic(1.0), 1025);
    CHECK(std::abs(drift(q, 1.0, 0.0)) <= 1e-12);
    const GridDensity g = discretize(DensitySpec::gaussian(1.0), 1025);
    CHECK(std::abs(drift(g, 1.0, 3.0) - 1.5) <= 1e-4);
    const DriftTable table(q, 0.75, -4.0, 4.0, 0.05);
    for (double theta = -5.0; theta <= 5.0; theta += 0.0137) CHECK(std::abs(table(theta) - drift(q, 0.75, theta)) <= 1e-6);
}

TEST_CASE("Bayesian ensemble moments and exactness") {
    const SDEConfig c = config_for(DensitySpec::gaussian(1.0), 21);
    const PathEnsemble e = simulate_bayesian(c);
    const auto m = e.marginal(1.0);
    CHECK(std::abs(sample_mean(m)) <= 3.0 * std::sqrt(2.0) / 100.0);
    CHECK(std::abs(sample_variance(m) - 2.0) <= 3.0 * 2.0 * std::sqrt(2.0 / 10000.0));

    SDEConfig fine = c;
    fine.dt = c.dt / 2.0;
    const PathEnsemble f = simulate_bayesian(fine);
    for (double t : {0.5, 1.0, 2.0}) CHECK(e.marginal(t) == f.marginal(t));
}

TEST_CASE("ensembles are reproducible for any worker count") {
    SDEConfig c = config_for(DensitySpec::quartic(1.0), 5, 1.0, 2000);
    const PathEnsemble a = simulate_sde(c);
    const PathEnsemble b = simulate_bayesian(c);
    c.jobs = 3;
    CHECK(simulate_sde(c).paths == a.paths);
    CHECK(simulate_bayesian(c).paths == b.paths);
    CHECK(simulate_sde(c).paths == a.paths);
}

TEST_CASE("SDE ensemble of the Gaussian base") {
    const SDEConfig c = config_for(DensitySpec::gaussian(1.0), 31);
    const PathEnsemble e = simulate_sde(c);
    const auto m = e.marginal(1.0);
    CHECK(std::abs(sample_variance(m) - 2.0) <= 3.0 * 2.0 * std::sqrt(2.0 / 10000.0));
    SDEConfig fine = c;
    fine.dt = c.dt / 2.0;
    CHECK(ks_distance(e.marginal(2.0), simulate_sde(fine).marginal(2.0)) <= 0.02);
}

TEST_CASE("law equality of the SDE and Bayesian tilt processes") {
    for (const auto& spec : {DensitySpec::gaussian(1.0), DensitySpec::uniform(-1.0, 1.0)}) {
        CAPTURE(spec.name());
        const SDEConfig c = config_for(spec, 41);
        SDEConfig other = c;
        other.seed = 42;
        const PathEnsemble sde = simulate_sde(c);
        const KsResult r = law_equality_check(sde, simulate_bayesian(other), 1.0);
        CHECK(r.statistic <= 0.0231);
        CHECK(r.pass);
    }
    const SDEConfig c = config_for(DensitySpec::gaussian(1.0), 43, 1.0, 2000);
    CHECK(law_equality_check(simulate_bayesian(c), simulate_bayesian(c), 1.0).statistic == 0.0);
    SDEConfig q = c;
    q.base = DensitySpec::quartic(1.0);
    CHECK_THROWS(law_equality_check(simulate_bayesian(c), simulate_bayesian(q), 1.0));
}

TEST_CASE("posterior martingale") {
    const SDEConfig g = config_for(DensitySpec::gaussian(1.0), 51, 1.0);
    const auto gp = martingale_check(simulate_bayesian(g), base_of(g), {0.0}, 1.0);
    CHECK(std::abs(gp[0].target - 0.398942) <= 1e-5);
    CHECK(gp[0].pass);

    const SDEConfig q = config_for(DensitySpec::quartic(1.0), 52, 1.0);
    CHECK(martingale_check(simulate_bayesian(q), base_of(q), {0.5}, 0.5)[0].pass);

    const auto early = martingale_check(simulate_bayesian(q), base_of(q), {0.5}, q.dt);
    CHECK(std::abs(early[0].mean - early[0].target) <= 1e-2 * early[0].target);
}

TEST_CASE("time inversion") {
    const SDEConfig g = config_for(DensitySpec::gaussian(1.0), 61);
    const GridDensity& gb = base_of(g);
    const PathEnsemble ge = simulate_sde(g);
    std::vector<double> x(gb.grid.n), one(gb.grid.n, 1.0);
    for (std::size_t i = 0; i < gb.grid.n; ++i) x[i] = gb.grid.node(i);
    CHECK(time_inversion_check(ge, gb, 1.0, x, 62).pass);
    CHECK(time_inversion_check(ge, gb, 1.0, one, 62).statistic == 0.0);

    const SDEConfig u = config_for(DensitySpec::uniform(-1.0, 1.0), 63);
    const GridDensity& ub = base_of(u);
    std::vector<double> xu(ub.grid.n);
    for (std::size_t i = 0; i < ub.grid.n; ++i) xu[i] = ub.grid.node(i);
    CHECK(time_inversion_check(simulate_sde(u), ub, 2.0, xu, 64).pass);
}

TEST_CASE("Follmer process") {
    const SDEConfig c = config_for(DensitySpec::gaussian(1.0), 71, 1.0);
    const PathEnsemble f = simulate_follmer(c);
    for (std::size_t p = 0; p < f.M; ++p) CHECK(f.at(p, f.times.size() - 1) == f.hidden_X[p]);
    const auto half = f.marginal(0.5);
    CHECK(std::abs(sample_mean(half)) <= 3.0 * std::sqrt(0.5 / 10000.0));
    CHECK(std::abs(sample_variance(half) - 0.5) <= 3.0 * 0.5 * std::sqrt(2.0 / 10000.0));
    CHECK(follmer_tilt_relation_check(c, 0.5).pass);

    const SDEConfig u = config_for(DensitySpec::uniform(-1.0, 1.0), 72, 1.0);
    CHECK(follmer_tilt_relation_check(u, 0.5).pass);
    CHECK_THROWS(simulate_follmer(config_for(DensitySpec::gaussian(1.0), 1, 2.0)));
}

TEST_CASE("terminal law of the SDE") {
    const SDEConfig c = config_for(DensitySpec::quartic(1.0), 81);
    CHECK(terminal_law_check(simulate_sde(c), base_of(c), 82).pass);
}

TEST_CASE("Brownian bridge") {
    const PathEnsemble b = simulate_bridge(config_for(DensitySpec::gaussian(1.0), 91, 1.0));
    for (std::size_t p = 0; p < b.M; ++p) {
        CHECK(b.at(p, 0) == 0.0);
        CHECK(std::abs(b.at(p, b.times.size() - 1)) <= 1e-12);
    }
    CHECK(std::abs(sample_variance(b.marginal(0.5)) - 0.25) <= 3.0 * 0.25 * std::sqrt(2.0 / 10000.0));
}

TEST_CASE("product Bayesian ensembles") {
    const SDEConfig c = config_for(DensitySpec::gaussian(1.0), 101, 1.0);
    const auto coords = simulate_bayesian_product(c, 3);
    REQUIRE(coords.size() == 3);
    for (const auto& e : coords) CHECK(std::abs(sample_variance(e.marginal(1.0)) - 2.0) <= 3.0 * 2.0 * std::sqrt(2.0 / 10000.0));
    CHECK(ks_distance(coords[0].marginal(1.0), coords[1].marginal(1.0)) <= 0.0231);
    CHECK(coords[0].paths != coords[1].paths);
    CHECK_THROWS(simulate_bayesian_product(c, 4));
}

TEST_CASE("averaged observations against a brute-force Bayes oracle") {
    const std::vector<std::pair<double, double>> two{{-1.0, 0.5}, {1.0, 0.5}};
    const AveragedPosterior a = posterior_from_averaged_observations(two, {0.3, 0.7});
    const auto oracle = brute_force_posterior(two, {0.3, 0.7});
    // Single observation 0.7 with noise variance 1/2.
    const double l = std::exp(-(0.7 + 1.0) * (0.7 + 1.0)), r = std::exp(-(0.7 - 1.0) * (0.7 - 1.0));
    for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(a.posterior[i] - oracle[i]) <= 1e-12);
    CHECK(std::abs(a.posterior[1] - r / (l + r)) <= 1e-12);
    CHECK(a.path_independent);

    const AveragedPosterior zero = posterior_from_averaged_observations(two, {0.0, 0.0, 0.0});
    CHECK(std::abs(zero.posterior[0] - 0.5) <= 1e-12);

    const std::vector<std::pair<double, double>> three{{0.0, 1.0 / 3}, {1.0, 1.0 / 3}, {2.0, 1.0 / 3}};
    const AveragedPosterior b = posterior_from_averaged_observations(three, {1.1, 0.9, 1.0});
    const auto ob = brute_force_posterior(three, {1.1, 0.9, 1.0});
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(b.posterior[i] - ob[i]) <= 1e-12);
    CHECK(b.path_independent);
    CHECK_THROWS(posterior_from_averaged_observations(three, {1.0}));
}

TEST_CASE("ensemble CSV export") {
    const PathEnsemble f = simulate_follmer(config_for(DensitySpec::gaussian(1.0), 111, 1.0, 1000));
    std::ostringstream os;
    write_ensemble_csv(os, f, 2);
    const std::string text = os.str();
    CHECK(text.rfind("path_id,t,theta,x_hidden\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == 1 + 2 * f.times.size());
}
