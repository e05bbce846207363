#include "hflab/experiments.hpp"

#include "hflab/parallel.hpp"
#include "hflab/spectrum.hpp"
#include "hflab/test_functions.hpp"
#include "hflab/tilt.hpp"
#include "hflab/transport.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace hflab {

namespace {

using nlohmann::ordered_json;

constexpr double kInf = std::numeric_limits<double>::infinity();

CheckRecord at_most(std::string name, double value, double threshold, bool hard = true) {
    return {std::move(name), value, threshold, value <= threshold, hard};
}

CheckRecord at_least(std::string name, double value, double threshold, bool hard = true) {
    return {std::move(name), value, threshold, value >= threshold, hard};
}

std::string label(double s) {
    std::ostringstream os;
    os << s;
    return os.str();
}

std::optional<double> gaussian_variance(const DensitySpec& spec) {
    if (const auto* g = std::get_if<family::Gaussian>(&spec.params())) return g->variance;
    return std::nullopt;
}

// Families whose generator has purely discrete spectrum (log-density growing faster than linearly).
bool discrete_spectrum(const DensitySpec& spec) {
    return !std::holds_alternative<family::Exponential>(spec.params()) &&
           !std::holds_alternative<family::Laplace>(spec.params());
}

std::vector<double> positive_times(const std::vector<double>& ladder) {
    std::vector<double> out;
    for (double s : ladder)
        if (s > 0.0) out.push_back(s);
    return out;
}

TestFunction find_function(const std::vector<TestFunction>& lib, const std::string& name) {
    for (const auto& f : lib)
        if (f.name == name) return f;
    throw std::logic_error("missing test function " + name);
}

template <class Fn>
ExperimentResult timed(const std::string& name, Fn&& body) {
    ExperimentResult r;
    r.experiment = name;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

ordered_json number_json(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

}  // namespace

bool ExperimentResult::pass() const {
    if (!error.empty()) return false;
    return std::all_of(checks.begin(), checks.end(), [](const CheckRecord& c) { return c.pass || !c.hard; });
}

// ---------------------------------------------------------------------------

ExperimentResult run_spectrum(const ExperimentConfig& c) {
    return timed("spectrum", [&](ExperimentResult& r) {
        const GridDensity base = discretize(c.density, c.n, c.eps_tail);
        const DiscreteOperator op = assemble_L(base);
        const SpectrumResult spec = eigen_spectrum(op, c.K);

        Table t{"eigenvalues", {"k", "lambda", "richardson"}, {}};
        for (std::size_t k = 0; k <= c.K; ++k)
            t.rows.push_back({static_cast<double>(k), spec.eigenvalues[k], spec.richardson[k]});
        r.tables.push_back(t);

        r.checks.push_back(at_most("spectrum.richardson_lambda1", spec.richardson[1], 1e-3));
        if (const auto v = gaussian_variance(c.density)) {
            double worst = 0.0;
            for (std::size_t k = 1; k <= c.K; ++k) {
                const double exact = static_cast<double>(k) / *v;
                worst = std::max(worst, std::abs(spec.eigenvalues[k] - exact) / exact);
            }
            r.checks.push_back(at_most("spectrum.hermite_oracle_relative_error", worst, 1e-3));
        }
        const LogConcavityReport lc = check_log_concavity(base);
        r.checks.push_back({"spectrum.log_concavity", lc.max_violation, lc.tolerance, lc.pass, true});

        const IsoperimetricResult iso = cheeger_constant(base);
        r.checks.push_back(at_least("spectrum.cheeger_lower", iso.cheeger_product, 0.25));
        r.checks.push_back(at_most("spectrum.buser_upper", iso.cheeger_product, 9.0));

        std::vector<double> x(op.grid.n);
        for (std::size_t i = 0; i < op.grid.n; ++i) x[i] = op.grid.node(i);
        const InterpolationReport ip = interpolation_check(x, op);
        r.checks.push_back({"spectrum.interpolation", ip.lhs, ip.rhs, ip.holds, true});

        if (std::holds_alternative<family::Exponential>(c.density.params())) {
            const MuckenhouptResult mk = muckenhoupt_constant(base);
            r.checks.push_back({"spectrum.muckenhoupt_bound", mk.poincare, mk.bound, mk.holds, true});
        }
        if (c.density.is_smooth()) {
            const StrictDecrease sd = strict_decrease_probe(base, 0.0, 0.25, 1);
            r.checks.push_back({"spectrum.strict_decrease_lambda1", sd.margin, -sd.richardson, sd.strict, false});
        }
    });
}

ExperimentResult run_flow(const ExperimentConfig& c) {
    return timed("flow", [&](ExperimentResult& r) {
        const GridDensity base = discretize(c.density, c.n, c.eps_tail);
        const SpectralFlow flow = spectral_flow(base, c.s_ladder, c.K, discrete_spectrum(c.density));
        r.checks.push_back(at_most("flow.eigenvalue_monotonicity", flow.worst_increase, 0.0));

        Table t{"spectral_flow", {"s", "k", "lambda", "richardson", "cp", "h", "cheeger_product"}, {}};
        Table plot{"flow_lambda", {"s"}, {}};
        for (std::size_t k = 1; k <= c.K; ++k) plot.columns.push_back("lambda_" + std::to_string(k));
        for (std::size_t j = 0; j < flow.s.size(); ++j) {
            const auto& sp = flow.spectra[j];
            std::vector<double> row{flow.s[j]};
            for (std::size_t k = 1; k <= c.K; ++k) {
                const double cp = sp.poincare, h = flow.cheeger[j];
                t.rows.push_back({flow.s[j], static_cast<double>(k), sp.eigenvalues[k], sp.richardson[k], cp, h, cp * h * h});
                row.push_back(sp.eigenvalues[k]);
            }
            plot.rows.push_back(row);
        }
        r.tables.push_back(t);
        r.plots.push_back(plot);

        // C_P(mu) <= C_P(mu_s) <= C_P(mu) + s; the ladder start plays the role of mu.
        const double cp0 = flow.spectra.front().poincare;
        const double rich0 = flow.spectra.front().richardson[1];
        double lower = -kInf, upper = -kInf;
        for (std::size_t j = 0; j < flow.s.size(); ++j) {
            const auto& sp = flow.spectra[j];
            const double lam = sp.eigenvalues[1];
            const double rich_cp = std::max(sp.richardson[1] / (lam * lam),
                                            rich0 / (flow.spectra.front().eigenvalues[1] * flow.spectra.front().eigenvalues[1]));
            const double tol = 1e-3 + monotone_slack(rich_cp);
            lower = std::max(lower, cp0 - sp.poincare - tol);
            upper = std::max(upper, sp.poincare - cp0 - (flow.s[j] - flow.s.front()) - tol);
        }
        r.checks.push_back(at_most("flow.sandwich_lower", lower, 0.0));
        r.checks.push_back(at_most("flow.sandwich_upper", upper, 0.0));

        if (const auto v = gaussian_variance(c.density)) {
            double worst = 0.0, worst_cp = 0.0;
            for (std::size_t j = 0; j < flow.s.size(); ++j) {
                for (std::size_t k = 1; k <= c.K; ++k) {
                    const double exact = static_cast<double>(k) / (*v + flow.s[j]);
                    worst = std::max(worst, std::abs(flow.spectra[j].eigenvalues[k] - exact) / exact);
                }
                worst_cp = std::max(worst_cp, std::abs(flow.spectra[j].poincare - (*v + flow.s[j])));
            }
            r.checks.push_back(at_most("flow.gaussian_eigenvalues_relative_error", worst, 1e-3));
            r.checks.push_back(at_most("flow.gaussian_poincare_error", worst_cp, 1e-3));
        }
        for (double s : c.s_ladder) {
            if (!c.density.is_smooth() && s == 0.0) continue;
            const StrictDecrease sd = strict_decrease_probe(base, s, 0.1, 1);
            r.checks.push_back({"flow.strict_decrease[s=" + label(s) + "]", sd.margin, -sd.richardson, sd.strict, false});
        }

        // Rayleigh quotients along the flow.
        const auto lib = test_library(base);
        Table rp{"rayleigh", {"s"}, {}};
        std::vector<RayleighTrace> traces;
        for (const char* name : {"linear", "quadratic", "bump"}) {
            const TestFunction f = find_function(lib, name);
            const RayleighTrace tr = rayleigh_flow(f.sample(base.grid), base, c.s_ladder);
            r.checks.push_back({std::string("flow.rayleigh_monotone[") + name + "]", tr.worst_increase, tr.tol_mono,
                                tr.monotone, true});
            r.checks.push_back({std::string("flow.log_norm_convex[") + name + "]", tr.worst_convexity, tr.tol_mono,
                                tr.convex, true});
            rp.columns.push_back(std::string("R_") + name);
            traces.push_back(tr);
        }
        for (std::size_t j = 0; j < c.s_ladder.size(); ++j) {
            std::vector<double> row{c.s_ladder[j]};
            for (const auto& tr : traces) row.push_back(tr.quotient[j]);
            rp.rows.push_back(row);
        }
        r.plots.push_back(rp);
        if (const auto v = gaussian_variance(c.density)) {
            double worst = 0.0;
            for (std::size_t j = 0; j < c.s_ladder.size(); ++j)
                worst = std::max(worst, std::abs(traces[0].quotient[j] - 1.0 / (*v + c.s_ladder[j])));
            r.checks.push_back(at_most("flow.gaussian_linear_rayleigh_error", worst, 1e-3));
        }
    });
}

ExperimentResult run_gamma(const ExperimentConfig& c) {
    return timed("gamma", [&](ExperimentResult& r) {
        const GridDensity base = discretize(c.density, c.n, c.eps_tail);
        const auto times = positive_times(c.s_ladder);
        if (times.empty()) throw std::invalid_argument("gamma: s_ladder needs a positive time");
        const auto lib = test_library(base);

        Table t{"gamma", {"s", "function", "gamma2", "flow_identity_0", "flow_identity_1", "box_decomposition", "q_time_derivative"}, {}};
        double g2 = 0.0, f0 = 0.0, f1 = 0.0, box = 0.0, qt = 0.0, margin = kInf;
        for (double s : times) {
            const GridDensity flow = heat_convolve(base, s);
            const double ds = std::min(1e-3, 0.25 * s);
            std::vector<GridField> phis;
            std::vector<std::size_t> index;
            for (std::size_t i = 0; i < lib.size(); ++i) {
                if (lib[i].name == "constant") continue;
                phis.push_back(lib[i].sample(base.grid));
                index.push_back(i);
            }
            const auto ids = flow_identities(phis, base, s, ds);
            for (std::size_t k = 0; k < phis.size(); ++k) {
                const TestFunction& f = lib[index[k]];
                const double a = gamma2(f.sample(flow.grid), base, s).residual;
                const double b = ids[k].level0.residual;
                const double d = ids[k].level1.residual;
                const double e = box_decomposition_residual(f.f, base, s);
                const double q = q_time_derivative_check(phis[k], base, s, ds);
                const PointwiseBounds pb = pointwise_bounds(phis[k], f.sample_derivative(base.grid), base, s);
                g2 = std::max(g2, a);
                f0 = std::max(f0, b);
                f1 = std::max(f1, d);
                box = std::max(box, e);
                qt = std::max(qt, q);
                margin = std::min({margin, pb.value_margin, pb.gradient_margin, pb.strong_margin});
                t.rows.push_back({s, static_cast<double>(index[k]), a, b, d, e, q});
            }
        }
        r.tables.push_back(t);
        r.checks.push_back(at_most("gamma.gamma2_residual", g2, 1e-3));
        r.checks.push_back(at_most("gamma.flow_identity_0", f0, 1e-3));
        r.checks.push_back(at_most("gamma.flow_identity_1", f1, 1e-3));
        r.checks.push_back(at_most("gamma.box_decomposition", box, 1e-6));
        r.checks.push_back(at_most("gamma.q_time_derivative", qt, 1e-3));
        r.checks.push_back(at_least("gamma.pointwise_bounds_margin", margin, -1e-8));

        // Brascamp-Lieb: var p_{s,y} <= s on a 20 x 20 lattice.
        const double s_lo = times.front(), s_hi = std::max(times.back(), 2.0 * times.front());
        const auto [first, last] = base.support_range();
        const double y_lo = base.grid.node(first), y_hi = base.grid.node(last);
        double worst = -kInf;
        for (int i = 0; i < 20; ++i) {
            const double s = s_lo * std::pow(s_hi / s_lo, i / 19.0);
            for (int j = 0; j < 20; ++j) {
                const double y = y_lo + (y_hi - y_lo) * j / 19.0;
                worst = std::max(worst, tilt_moments(base, s, y).var - s);
            }
        }
        r.checks.push_back(at_most("gamma.brascamp_lieb", worst, 1e-8));
    });
}

ExperimentResult run_transport(const ExperimentConfig& c) {
    return timed("transport", [&](ExperimentResult& r) {
        const GridDensity density = discretize(c.density, c.n, c.eps_tail);
        double smoothing = c.transport.smoothing;
        if (smoothing == 0.0 && !c.density.is_smooth()) smoothing = 0.05;
        const FlowBase base{density, smoothing};
        const double s_end = c.s_ladder.back();
        if (!(s_end > 0.0)) throw std::invalid_argument("transport: s_ladder must end at a positive time");
        r.checks.push_back({"transport.smoothing", smoothing, 0.0, true, false});

        const GridDensity mu = base.at(0.0);
        const TransportMap map = integrate_flow(base, flow_nodes(mu, 1e-6, c.transport.nodes), s_end, c.transport.steps);
        const TransportMap inv = inverse_map(map);
        const ExpansionReport ex = expansion_check(map);
        const ExpansionReport cx = expansion_check(inv);
        r.checks.push_back(at_least("transport.expansion_min_ratio", ex.min_ratio, 1.0 - 1e-6));
        r.checks.push_back(at_least("transport.expansion_min_derivative", ex.min_derivative, 1.0 - 1e-6));
        r.checks.push_back(at_most("transport.inverse_contraction_max_ratio", cx.max_ratio, 1.0 + 1e-6));
        r.checks.push_back(at_most("transport.pushforward_cdf_error", pushforward_check(base, map), 1e-3));
        r.checks.push_back(at_most("transport.composition_residual", composition_residual(map, inv), 1e-6, false));

        if (const auto v = gaussian_variance(c.density)) {
            const double scale = std::sqrt((*v + smoothing + s_end) / (*v + smoothing));
            double worst = 0.0;
            for (std::size_t i = 0; i < map.y_nodes.size(); ++i)
                worst = std::max(worst, std::abs(map.t_values[i] - scale * map.y_nodes[i]));
            r.checks.push_back(at_most("transport.gaussian_map_error", worst, 1e-4));
        }

        const SpectrumResult nu_spec = eigen_spectrum(assemble_L(base.at(s_end)), 1);
        const double slack = monotone_slack(nu_spec.richardson[1]);
        for (const auto& f : test_library(mu)) {
            if (f.name == "constant") continue;
            const RayleighTransfer rt = rayleigh_transfer_check(f, base, map, slack);
            r.checks.push_back({"transport.rayleigh_transfer[" + f.name + "]", rt.lhs - rt.rhs, slack, rt.holds, true});
        }

        if (smoothing == 0.0) {
            const TransportPoincare tp = transport_poincare(base, s_end, c.transport.nodes, c.transport.steps);
            r.checks.push_back({"transport.poincare_agreement", std::abs(tp.transport_mu - tp.spectral_mu),
                                2.0 * tp.richardson, tp.agree, true});
            r.checks.push_back({"transport.poincare_certified", tp.lower_nu, tp.spectral_nu, tp.certified, true});
        }

        Table t{"map", {"y", "T_s(y)", "DT_s(y)"}, {}};
        Table p{"transport_map", {"y", "T_s(y)"}, {}};
        for (std::size_t i = 0; i < map.y_nodes.size(); ++i) {
            t.rows.push_back({map.y_nodes[i], map.t_values[i], map.derivative[i]});
            p.rows.push_back({map.y_nodes[i], map.t_values[i]});
        }
        r.tables.push_back(t);
        r.plots.push_back(p);
    });
}

ExperimentResult run_localize(const ExperimentConfig& c) {
    return timed("localize", [&](ExperimentResult& r) {
        SDEConfig sc = c.sde;
        sc.base = c.density;
        const GridDensity base = discretize(sc.base, sc.grid_n, sc.eps_tail);
        const PathEnsemble sde = simulate_sde(sc);
        SDEConfig bc = sc;
        bc.seed = sc.seed + 1;
        const PathEnsemble bayes = simulate_bayesian(bc);

        Table ks{"ks", {"check", "t", "statistic", "threshold"}, {}};
        int id = 0;
        auto record = [&](const std::string& name, double t, const KsResult& k) {
            r.checks.push_back({name, k.statistic, k.threshold, k.pass, true});
            ks.rows.push_back({static_cast<double>(id++), t, k.statistic, k.threshold});
        };
        for (double t : {0.5, 1.0, 2.0}) {
            if (t > sc.T_end + 1e-12) continue;
            record("localize.law_equality[t=" + label(t) + "]", t, law_equality_check(sde, bayes, t));
        }

        const double tm = std::min(1.0, sc.T_end);
        const InverseCdf quantile(base);
        std::vector<double> probes;
        for (double q : {0.1, 0.3, 0.5, 0.7, 0.9}) probes.push_back(quantile(q));
        Table mt{"martingale", {"x", "mean", "target", "sigma"}, {}};
        for (const auto& p : martingale_check(bayes, base, probes, tm)) {
            r.checks.push_back({"localize.martingale[x=" + label(p.x) + "]", std::abs(p.mean - p.target), 3.0 * p.sigma,
                                p.pass, true});
            mt.rows.push_back({p.x, p.mean, p.target, p.sigma});
        }

        std::vector<double> phi(base.grid.n);
        for (std::size_t i = 0; i < base.grid.n; ++i) phi[i] = base.grid.node(i);
        record("localize.time_inversion[t=" + label(tm) + "]", tm, time_inversion_check(sde, base, tm, phi, sc.seed + 2));
        SDEConfig fc = sc;
        fc.seed = sc.seed + 3;
        record("localize.follmer_tilt_relation[t=0.5]", 0.5, follmer_tilt_relation_check(fc, 0.5));
        record("localize.terminal_law[T=" + label(sc.T_end) + "]", sc.T_end, terminal_law_check(sde, base, sc.seed + 4));

        const std::vector<std::pair<std::vector<std::pair<double, double>>, std::vector<double>>> cases{
            {{{-1.0, 0.5}, {1.0, 0.5}}, {0.3, 0.7}},
            {{{0.0, 1.0 / 3}, {1.0, 1.0 / 3}, {2.0, 1.0 / 3}}, {1.1, 0.9, 1.0}},
            {{{-2.0, 0.1}, {-0.5, 0.2}, {0.5, 0.3}, {3.0, 0.4}}, {0.4, -0.2, 1.3, 0.8, 0.5}},
        };
        double tv = 0.0;
        bool independent = true;
        for (const auto& [prior, obs] : cases) {
            const AveragedPosterior ap = posterior_from_averaged_observations(prior, obs);
            tv = std::max(tv, ap.total_variation);
            independent = independent && ap.path_independent;
        }
        r.checks.push_back({"localize.averaged_observations_path_independence", tv, 1e-10, independent, true});

        r.tables.push_back(ks);
        r.tables.push_back(mt);
        r.plots.push_back(Table{"ks_statistics", {"check", "statistic"}, {}});
        for (const auto& row : ks.rows) r.plots.back().rows.push_back({row[0], row[2]});
        Table ens{"ensemble", {"path_id", "t", "theta"}, {}};
        for (std::size_t p = 0; p < std::min<std::size_t>(20, sde.M); ++p)
            for (std::size_t j = 0; j < sde.times.size(); ++j)
                ens.rows.push_back({static_cast<double>(p), sde.times[j], sde.at(p, j)});
        r.tables.push_back(ens);
    });
}

// ---------------------------------------------------------------------------

RunReport run_experiments(const ExperimentConfig& c, std::size_t jobs) {
    using Runner = ExperimentResult (*)(const ExperimentConfig&);
    const std::map<std::string, Runner> runners{{"spectrum", run_spectrum},
                                                {"flow", run_flow},
                                                {"gamma", run_gamma},
                                                {"transport", run_transport},
                                                {"localize", run_localize}};
    std::vector<std::string> selected;
    if (c.experiment == "all")
        selected = {"spectrum", "flow", "gamma", "transport", "localize"};
    else if (runners.count(c.experiment))
        selected = {c.experiment};
    else
        throw ConfigError("experiment", "unknown experiment '" + c.experiment + "'");

    RunReport report;
    report.density = c.density.name();
    report.seed = c.sde.seed;
    report.results.resize(selected.size());
    ExperimentConfig local = c;
    local.sde.jobs = std::max<std::size_t>(1, jobs);
    parallel_for(selected.size(), jobs, [&](std::size_t i) { report.results[i] = runners.at(selected[i])(local); });
    report.overall = std::all_of(report.results.begin(), report.results.end(), [](const auto& r) { return r.pass(); });
    return report;
}

std::string report_json(const RunReport& report) {
    ordered_json root;
    root["density"] = report.density;
    root["seed"] = report.seed;
    root["overall"] = report.overall;
    root["timings"] = "timings.json";
    ordered_json exps = ordered_json::array();
    for (const auto& r : report.results) {
        ordered_json e;
        e["name"] = r.experiment;
        e["pass"] = r.pass();
        if (!r.error.empty()) e["error"] = r.error;
        ordered_json checks = ordered_json::array();
        for (const auto& ch : r.checks) {
            ordered_json j;
            j["name"] = ch.name;
            j["value"] = number_json(ch.value);
            j["threshold"] = number_json(ch.threshold);
            j["pass"] = ch.pass;
            j["hard"] = ch.hard;
            checks.push_back(j);
        }
        e["checks"] = checks;
        exps.push_back(e);
    }
    root["experiments"] = exps;
    return root.dump(2) + "\n";
}

std::string to_csv(const Table& table) {
    std::ostringstream os;
    for (std::size_t i = 0; i < table.columns.size(); ++i) os << (i ? "," : "") << table.columns[i];
    os << '\n' << std::setprecision(17);
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << '\n';
    }
    return os.str();
}

void write_outputs(const RunReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "plotdata");
    auto write = [](const std::filesystem::path& p, const std::string& text) {
        std::ofstream out(p);
        if (!out) throw std::runtime_error("cannot write " + p.string());
        out << text;
    };
    write(dir / "report.json", report_json(report));
    ordered_json timings;
    for (const auto& r : report.results) timings[r.experiment] = r.seconds;
    write(dir / "timings.json", timings.dump(2) + "\n");
    for (const auto& r : report.results) {
        for (const auto& t : r.tables) write(dir / (r.experiment + "_" + t.name + ".csv"), to_csv(t));
        for (const auto& t : r.plots) write(dir / "plotdata" / (t.name + ".csv"), to_csv(t));
    }
}

std::string experiment_list() {
    return "spectrum: Poincare and Cheeger constants of the weighted Laplacian (Cheeger/Buser sandwich, Muckenhoupt bound)\n"
           "flow: eigenvalue monotonicity (Theorem 1.1) and Rayleigh-quotient decay along the heat flow\n"
           "gamma: Gamma-calculus identities of the tilt operator and the Brascamp-Lieb variance bound\n"
           "transport: contraction map (Theorem 1.2) built from the heat-flow advection field\n"
           "localize: stochastic localization in SDE, Bayesian and Follmer form (equality in law, martingale, time inversion)\n"
           "all: every experiment above on one configured measure\n";
}

}  // namespace hflab
