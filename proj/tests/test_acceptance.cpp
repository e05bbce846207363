// Acceptance battery: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "hflab/localization.hpp"
#include "hflab/spectrum.hpp"
#include "hflab/statistics.hpp"
#include "hflab/test_functions.hpp"
#include "hflab/tilt.hpp"
#include "hflab/transport.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace hflab;

namespace {

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

std::vector<DensitySpec> test_bases() {
    return {DensitySpec::gaussian(1.0), DensitySpec::uniform(-1.0, 1.0), DensitySpec::exponential(1.0),
            DensitySpec::quartic(1.0), DensitySpec::laplace(1.0)};
}

const TestFunction& named(const std::vector<TestFunction>& lib, const std::string& name) {
    for (const auto& f : lib)
        if (f.name == name) return f;
    throw std::logic_error("missing test function " + name);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// 1. Hermite spectrum of the standard Gaussian.
void gaussian_ladder(Verdict& v) {
    const auto start = std::chrono::steady_clock::now();
    const GridDensity g = evaluate_density(DensitySpec::gaussian(1.0), make_grid(-8.0, 8.0, 2049));
    const SpectrumResult r = eigen_spectrum(assemble_L(g), 5);
    double worst = 0.0;
    for (std::size_t k = 1; k <= 5; ++k) worst = std::max(worst, std::abs(r.eigenvalues[k] - k) / k);
    const double secs = seconds_since(start);
    v.detail << "max rel err " << worst << ", " << secs << " s";
    v.require(worst <= 1e-3, "relative error <= 1e-3");
    v.require(secs < 2.0, "runtime < 2 s");
}

// 2. Exact Gaussian spectral flow.
void gaussian_flow(Verdict& v) {
    const auto start = std::chrono::steady_clock::now();
    const SpectralFlow f = spectral_flow(discretize(DensitySpec::gaussian(1.0), 2049), {0.0, 1.0, 3.0}, 5);
    double worst = 0.0, worst_cp = 0.0;
    for (std::size_t j = 0; j < f.s.size(); ++j) {
        for (std::size_t k = 1; k <= 5; ++k)
            worst = std::max(worst, std::abs(f.spectra[j].eigenvalues[k] - k / (1.0 + f.s[j])));
        worst_cp = std::max(worst_cp, std::abs(f.spectra[j].poincare - (1.0 + f.s[j])));
    }
    const double secs = seconds_since(start);
    v.detail << "max |lambda_k - k/(1+s)| " << worst << ", max |C_P - (1+s)| " << worst_cp << ", " << secs << " s";
    v.require(worst <= 1e-3, "eigenvalues within 1e-3");
    v.require(worst_cp <= 1e-3, "C_P within 1e-3");
    v.require(f.monotone, "monotone");
    v.require(secs < 10.0, "runtime < 10 s");
}

// 3. Monotone spectral flow on quartic and heat-smoothed uniform bases.
void nontrivial_flow(Verdict& v) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<double> ladder{0.01, 0.25, 0.5, 1.0, 2.0};
    for (const auto& spec : {DensitySpec::quartic(1.0), DensitySpec::uniform(-1.0, 1.0)}) {
        const SpectralFlow f = spectral_flow(discretize(spec, 4097), ladder, 5);
        double rich = 0.0;
        for (const auto& sp : f.spectra)
            for (std::size_t k = 1; k <= 5; ++k) rich = std::max(rich, sp.richardson[k]);
        v.detail << spec.name() << ": worst excess " << f.worst_increase << ", max richardson " << rich << "; ";
        v.require(f.monotone, spec.name() + " monotone within tol_mono");
        v.require(rich < 1e-3, spec.name() + " richardson < 1e-3");
    }
    const double secs = seconds_since(start);
    v.detail << secs << " s";
    v.require(secs < 60.0, "runtime < 60 s");
}

// 4. C_P(mu) - tol <= C_P(mu * gamma_s) <= C_P(mu) + s + tol.
void sandwich(Verdict& v) {
    const std::vector<double> ladder{0.0, 0.25, 0.5, 1.0, 2.0};
    double worst_lower = -INFINITY, worst_upper = -INFINITY, gaussian_eq = 0.0;
    for (const auto& spec : test_bases()) {
        const SpectralFlow f = spectral_flow(discretize(spec, 2049), ladder, 1);
        const SpectrumResult& s0 = f.spectra.front();
        const double cp0 = s0.poincare;
        for (std::size_t j = 0; j < ladder.size(); ++j) {
            const SpectrumResult& sj = f.spectra[j];
            const double rich_cp = std::max(sj.richardson[1] * sj.poincare * sj.poincare,
                                            s0.richardson[1] * cp0 * cp0);
            const double tol = 1e-3 + monotone_slack(rich_cp);
            worst_lower = std::max(worst_lower, cp0 - sj.poincare - tol);
            worst_upper = std::max(worst_upper, sj.poincare - cp0 - ladder[j] - tol);
            if (std::holds_alternative<family::Gaussian>(spec.params()))
                gaussian_eq = std::max(gaussian_eq, std::abs(sj.poincare - (1.0 + ladder[j])));
        }
    }
    v.detail << "max lower excess " << worst_lower << ", max upper excess " << worst_upper
             << ", Gaussian |C_P - (1+s)| " << gaussian_eq;
    v.require(worst_lower <= 0.0, "lower side");
    v.require(worst_upper <= 0.0, "upper side");
    v.require(gaussian_eq <= 1e-3, "Gaussian equality");
}

// 5. Rayleigh quotients decrease and log-norms are convex along the flow.
void rayleigh_convexity(Verdict& v) {
    const std::vector<double> ladder{0.0, 0.25, 0.5, 1.0, 2.0};
    double worst_inc = -INFINITY, worst_cvx = -INFINITY, gaussian_err = 0.0;
    bool ok = true;
    for (const auto& spec : test_bases()) {
        const GridDensity base = discretize(spec, 2049);
        const auto lib = test_library(base);
        for (const char* name : {"linear", "quadratic", "bump"}) {
            const RayleighTrace tr = rayleigh_flow(named(lib, name).sample(base.grid), base, ladder);
            ok = ok && tr.monotone && tr.convex;
            worst_inc = std::max(worst_inc, tr.worst_increase - tr.tol_mono);
            worst_cvx = std::max(worst_cvx, tr.worst_convexity - tr.tol_mono);
            if (!tr.monotone || !tr.convex) v.detail << "(" << spec.name() << ", " << name << ") ";
            if (std::holds_alternative<family::Gaussian>(spec.params()) && std::string(name) == "linear")
                for (std::size_t j = 0; j < ladder.size(); ++j)
                    gaussian_err = std::max(gaussian_err, std::abs(tr.quotient[j] - 1.0 / (1.0 + ladder[j])));
        }
    }
    v.detail << "max increase - tol " << worst_inc << ", max convexity defect - tol " << worst_cvx
             << ", Gaussian linear trace error " << gaussian_err;
    v.require(ok, "monotone and convex on every base");
    v.require(gaussian_err <= 1e-3, "Gaussian trace 1/(1+s)");
}

// 6. Gamma calculus residuals.
void gamma_calculus(Verdict& v) {
    double g2 = 0.0, f0 = 0.0, f1 = 0.0, box = 0.0;
    for (const auto& spec : test_bases()) {
        const std::size_t n = std::holds_alternative<family::Uniform>(spec.params()) ? 1025 : 4097;
        const GridDensity base = discretize(spec, n);
        const auto lib = test_library(base);
        std::vector<GridField> phis;
        for (const auto& f : lib) phis.push_back(f.sample(base.grid));
        for (double s : {0.25, 1.0}) {
            const GridDensity flow = heat_convolve(base, s);
            const auto ids = flow_identities(phis, base, s, 1e-3);
            for (std::size_t k = 0; k < lib.size(); ++k) {
                g2 = std::max(g2, gamma2(lib[k].sample(flow.grid), base, s).residual);
                f0 = std::max(f0, ids[k].level0.residual);
                f1 = std::max(f1, ids[k].level1.residual);
                box = std::max(box, box_decomposition_residual(lib[k].f, base, s));
            }
        }
    }
    v.detail << "gamma2 " << g2 << ", flow identity 0 " << f0 << ", flow identity 1 " << f1 << ", box " << box;
    v.require(g2 <= 1e-3, "gamma2 residual <= 1e-3");
    v.require(f0 <= 1e-3 && f1 <= 1e-3, "flow identities <= 1e-3");
    v.require(box <= 1e-6, "box decomposition <= 1e-6");
}

// 7. Brascamp-Lieb and pointwise bounds.
void brascamp_lieb(Verdict& v) {
    double bl = -INFINITY, value = INFINITY, gradient = INFINITY, strong = INFINITY;
    for (const auto& spec : test_bases()) {
        const GridDensity base = discretize(spec, 1025);
        const auto [first, last] = base.support_range();
        const double y_lo = base.grid.node(first), y_hi = base.grid.node(last);
        for (int i = 0; i < 20; ++i) {
            const double s = 0.01 * std::pow(400.0, i / 19.0);
            for (int j = 0; j < 20; ++j) bl = std::max(bl, tilt_moments(base, s, y_lo + (y_hi - y_lo) * j / 19.0).var - s);
        }
        for (const auto& f : test_library(base))
            for (double s : {0.25, 1.0}) {
                const PointwiseBounds pb = pointwise_bounds(f.sample(base.grid), f.sample_derivative(base.grid), base, s);
                value = std::min(value, pb.value_margin);
                gradient = std::min(gradient, pb.gradient_margin);
                strong = std::min(strong, pb.strong_margin);
            }
    }
    v.detail << "max var - s " << bl << ", min margins " << value << " / " << gradient << " / " << strong;
    v.require(bl <= 1e-8, "var <= s + 1e-8");
    v.require(value >= -1e-9 && gradient >= -1e-9, "Cauchy-Schwarz and gradient bounds");
    v.require(strong >= -1e-6, "strong gradient bound");
}

// 8. Heat-flow transport expands and its inverse contracts.
void transport_maps(Verdict& v) {
    const auto start = std::chrono::steady_clock::now();
    const double s = 1.0;
    double min_ratio = INFINITY, max_inv = -INFINITY, push = 0.0, gauss = 0.0, transfer = -INFINITY;
    for (const auto& spec : test_bases()) {
        const FlowBase base{discretize(spec, 1025), spec.is_smooth() ? 0.0 : 0.05};
        const GridDensity mu = base.at(0.0);
        const TransportMap map = integrate_flow(base, flow_nodes(mu, 1e-6, 121), s, 128);
        const ExpansionReport ex = expansion_check(map);
        const ExpansionReport cx = expansion_check(inverse_map(map));
        min_ratio = std::min({min_ratio, ex.min_ratio, ex.min_derivative});
        max_inv = std::max({max_inv, cx.max_ratio, cx.max_derivative});
        push = std::max(push, pushforward_check(base, map));
        if (std::holds_alternative<family::Gaussian>(spec.params()))
            for (std::size_t i = 0; i < map.y_nodes.size(); ++i)
                gauss = std::max(gauss, std::abs(map.t_values[i] - std::sqrt(1.0 + s) * map.y_nodes[i]));
        const double slack = monotone_slack(eigen_spectrum(assemble_L(base.at(s)), 1).richardson[1]);
        for (const auto& f : test_library(mu)) {
            if (f.name == "constant") continue;
            const RayleighTransfer rt = rayleigh_transfer_check(f, base, map, slack);
            transfer = std::max(transfer, rt.lhs - rt.rhs - slack);
        }
    }
    const double secs = seconds_since(start);
    v.detail << "Gaussian map error " << gauss << ", min expansion " << min_ratio << ", max inverse ratio " << max_inv
             << ", pushforward " << push << ", transfer excess " << transfer << ", " << secs << " s";
    v.require(gauss <= 1e-4, "Gaussian map sqrt(1+s) y");
    v.require(min_ratio >= 1.0 - 1e-6, "expansion");
    v.require(max_inv <= 1.0 + 1e-6, "inverse contraction");
    v.require(push <= 1e-3, "pushforward CDF error");
    v.require(transfer <= 0.0, "Rayleigh transfer");
    v.require(secs < 20.0, "runtime < 20 s");
}

// 9. Cheeger/Buser sandwich, Muckenhoupt bound, restricted Gaussian gap.
void isoperimetry(Verdict& v) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& spec : test_bases()) {
        const GridDensity gd = std::holds_alternative<family::Exponential>(spec.params())
                                   ? evaluate_density(spec, make_grid(0.0, 100.0, 8193))
                                   : discretize(spec, 2049);
        const IsoperimetricResult iso = cheeger_constant(gd);
        lo = std::min(lo, iso.cheeger_product);
        hi = std::max(hi, iso.cheeger_product);
        const std::string name = spec.name();
        auto near = [&](double expected) {
            v.detail << name << " " << iso.cheeger_product << "; ";
            v.require(std::abs(iso.cheeger_product - expected) <= 0.01 * expected, name + " product within 1%");
        };
        if (std::holds_alternative<family::Gaussian>(spec.params())) near(2.0 / std::numbers::pi);
        if (std::holds_alternative<family::Exponential>(spec.params())) near(4.0);
        if (std::holds_alternative<family::Uniform>(spec.params())) near(4.0 / (std::numbers::pi * std::numbers::pi));
    }
    v.require(lo >= 0.25 && hi <= 9.0, "1/4 <= C_P h^2 <= 9");

    const MuckenhouptResult mk = muckenhoupt_constant(evaluate_density(DensitySpec::exponential(1.0), make_grid(0.0, 100.0, 8193)));
    v.detail << "Muckenhoupt C " << mk.C << ", C_P/4C " << mk.poincare / mk.bound;
    v.require(std::abs(mk.C - 1.0) <= 1e-3, "C = 1");
    v.require(mk.holds && mk.poincare >= 0.98 * mk.bound, "C_P <= 4C tight to 2%");

    const GridDensity half = restrict_left(evaluate_density(DensitySpec::gaussian(1.0), make_grid(-10.0, 10.0, 4001)), 1.0);
    const double gap = 1.0 / poincare_constant(half);
    v.detail << ", restricted gap " << gap;
    v.require(gap >= 0.25 - 1e-3, "restricted gap >= a^2/4");
}

// 10. Stochastic localization battery.
void localization(Verdict& v) {
    const auto start = std::chrono::steady_clock::now();
    double worst_law = 0.0;
    std::uint64_t seed = 1000;
    for (const auto& spec : {DensitySpec::gaussian(1.0), DensitySpec::quartic(1.0), DensitySpec::uniform(-1.0, 1.0)}) {
        SDEConfig c;
        c.base = spec;
        c.T_end = 2.0;
        c.dt = 2.0 / 256.0;
        c.M = 10000;
        c.seed = seed;
        seed += 10;
        const GridDensity base = discretize(spec, c.grid_n, c.eps_tail);
        const PathEnsemble sde = simulate_sde(c);
        SDEConfig bc = c;
        bc.seed = c.seed + 1;
        const PathEnsemble bayes = simulate_bayesian(bc);
        for (double t : {0.5, 1.0, 2.0}) {
            const KsResult k = law_equality_check(sde, bayes, t);
            worst_law = std::max(worst_law, k.statistic);
            v.require(k.statistic <= 0.0231, spec.name() + " law equality");
        }
        const InverseCdf quantile(base);
        std::vector<double> probes;
        for (double q : {0.1, 0.3, 0.5, 0.7, 0.9}) probes.push_back(quantile(q));
        for (const auto& p : martingale_check(bayes, base, probes, 1.0)) v.require(p.pass, spec.name() + " martingale band");

        std::vector<double> phi(base.grid.n);
        for (std::size_t i = 0; i < base.grid.n; ++i) phi[i] = base.grid.node(i);
        v.require(time_inversion_check(sde, base, 1.0, phi, c.seed + 2).pass, spec.name() + " time inversion");
        SDEConfig fc = c;
        fc.T_end = 1.0;
        fc.dt = 1.0 / 256.0;
        fc.seed = c.seed + 3;
        v.require(follmer_tilt_relation_check(fc, 0.5).pass, spec.name() + " Follmer relation");
    }
    const std::vector<std::pair<std::vector<std::pair<double, double>>, std::vector<double>>> cases{
        {{{-1.0, 0.5}, {1.0, 0.5}}, {0.3, 0.7}},
        {{{0.0, 1.0 / 3}, {1.0, 1.0 / 3}, {2.0, 1.0 / 3}}, {1.1, 0.9, 1.0}},
        {{{-2.0, 0.1}, {-0.5, 0.2}, {0.5, 0.3}, {3.0, 0.4}}, {0.4, -0.2, 1.3, 0.8, 0.5}},
    };
    for (const auto& [prior, obs] : cases)
        v.require(posterior_from_averaged_observations(prior, obs).path_independent, "averaged observations");
    const double secs = seconds_since(start);
    v.detail << "max law KS " << worst_law << " (threshold " << ks_threshold(10000, 10000) << "), " << secs << " s";
    v.require(secs < 90.0, "runtime < 90 s");
}

// 11. Spectral and transport estimates of C_P on the quartic base.
void cross_validation(Verdict& v) {
    const FlowBase base{discretize(DensitySpec::quartic(1.0), 1025), 0.0};
    const TransportPoincare tp = transport_poincare(base, 1.0, 161, 128);
    const SpectralFlow f = spectral_flow(discretize(DensitySpec::quartic(1.0), 4097), {0.0, 1.0}, 1);
    v.detail << "spectral C_P " << tp.spectral_mu << ", transport C_P " << tp.transport_mu << ", 2 richardson "
             << 2.0 * tp.richardson << ", lower bound for mu_1 " << tp.lower_nu << " <= " << tp.spectral_nu;
    v.require(tp.agree, "estimates agree within 2 richardson");
    v.require(tp.certified, "transport route certifies C_P(mu) <= C_P(mu_s)");
    v.require(f.monotone && f.spectra[0].poincare <= f.spectra[1].poincare, "spectral route certifies");
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<void(Verdict&)>>> criteria{
        {"Gaussian spectral ladder", gaussian_ladder},
        {"exact Gaussian spectral flow", gaussian_flow},
        {"monotone flow on quartic and smoothed uniform", nontrivial_flow},
        {"Poincare sandwich", sandwich},
        {"Rayleigh monotonicity and log-convexity", rayleigh_convexity},
        {"Gamma calculus residuals", gamma_calculus},
        {"Brascamp-Lieb and pointwise bounds", brascamp_lieb},
        {"transport expansion and contraction", transport_maps},
        {"Cheeger, Buser and Muckenhoupt", isoperimetry},
        {"localization battery", localization},
        {"spectral and transport cross-validation", cross_validation},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        const auto start = std::chrono::steady_clock::now();
        try {
            criteria[i].second(v);
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail << " [error: " << e.what() << "]";
        }
        if (!v.pass) ++failures;
        std::printf("criterion %zu: %s  %s  (%s) [%.2f s]\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first,
                    v.detail.str().c_str(), seconds_since(start));
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
