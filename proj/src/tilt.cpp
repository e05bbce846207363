#include "hflab/tilt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace hflab {

namespace {

void require_positive_time(double s, const char* who) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument(std::string(who) + ": s must be positive");
}

void require_on_base(const std::vector<double>& phi, const GridDensity& base) {
    if (phi.size() != base.grid.n) throw std::invalid_argument("tilt: field must live on the base grid");
}

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

Moments window_moments(const KernelWindow& w, const Grid1D& g) {
    double mean = 0.0;
    for (std::size_t k = 0; k < w.weights.size(); ++k) mean += w.weights[k] * g.node(w.first + k);
    mean /= w.total;
    double var = 0.0;
    for (std::size_t k = 0; k < w.weights.size(); ++k) {
        const double d = g.node(w.first + k) - mean;
        var += w.weights[k] * d * d;
    }
    return {mean, var / w.total};
}

QPoint window_q(const KernelWindow& w, const Grid1D& g, const Moments& mom, const std::vector<double>& phi,
                double s) {
    double value = 0.0;
    for (std::size_t k = 0; k < w.weights.size(); ++k) value += w.weights[k] * phi[w.first + k];
    value /= w.total;
    double cov = 0.0, curv = 0.0;
    for (std::size_t k = 0; k < w.weights.size(); ++k) {
        const double d = g.node(w.first + k) - mom.mean;
        const double f = phi[w.first + k] - value;
        cov += w.weights[k] * d * f;
        curv += w.weights[k] * d * d * f;
    }
    return {value, cov / w.total / s, curv / w.total / (s * s)};
}

double window_average(const KernelWindow& w, const std::vector<double>& f) {
    double sum = 0.0;
    for (std::size_t k = 0; k < w.weights.size(); ++k) sum += w.weights[k] * f[w.first + k];
    return sum / w.total;
}

KernelWindow& scratch() {
    thread_local KernelWindow w;
    return w;
}

}  // namespace

void require_in_range(const GridDensity& base, double s, double y) {
    const auto [first, last] = base.support_range();
    const double lo = base.grid.node(first), hi = base.grid.node(last);
    const double dist = std::max({lo - y, y - hi, 0.0});
    if (!std::isfinite(y) || dist > 8.0 * std::sqrt(s) + 1.5 * base.grid.h) {
        std::ostringstream os;
        os << "tilt: observation y = " << y << " is out of range for s = " << s;
        throw OutOfRange(os.str());
    }
}

double log_partition(const GridDensity& base, double s, double y) {
    require_positive_time(s, "log_partition");
    require_in_range(base, s, y);
    auto& w = scratch();
    kernel_window(base, s, y, w);
    return w.log_mass + y * y / (2.0 * s);
}

TiltedDensity tilt_density(const GridDensity& base, double s, double y) {
    const double log_Z = log_partition(base, s, y);
    const auto& g = base.grid;
    std::vector<double> logs(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        const double d = y - g.node(i);
        logs[i] = base.log_values[i] - d * d / (2.0 * s);
    }
    return {s, y, log_Z, density_from_log_values(g, std::move(logs), base.support_min, base.support_max)};
}

TiltMoments tilt_moments(const GridDensity& base, double s, double y) {
    require_positive_time(s, "tilt_moments");
    require_in_range(base, s, y);
    auto& w = scratch();
    kernel_window(base, s, y, w);
    const Moments m = window_moments(w, base.grid);
    return {m.mean, m.var};
}

QPoint q_point(const std::vector<double>& phi, const GridDensity& base, double s, double y) {
    require_positive_time(s, "apply_Q");
    require_on_base(phi, base);
    require_in_range(base, s, y);
    auto& w = scratch();
    kernel_window(base, s, y, w);
    return window_q(w, base.grid, window_moments(w, base.grid), phi, s);
}

QEvaluation apply_Q(const GridField& phi, const GridDensity& base, double s, const Grid1D& y_grid) {
    require_on_base(phi.values, base);
    for (double v : phi.values)
        if (!std::isfinite(v)) throw std::invalid_argument("apply_Q: field must be finite");
    QEvaluation out{s, {y_grid, std::vector<double>(y_grid.n)}, {y_grid, std::vector<double>(y_grid.n)},
                    {y_grid, std::vector<double>(y_grid.n)}};
    for (std::size_t j = 0; j < y_grid.n; ++j) {
        const QPoint q = q_point(phi.values, base, s, y_grid.node(j));
        out.values.values[j] = q.value;
        out.gradient.values[j] = q.gradient;
        out.hessian.values[j] = q.hessian;
    }
    return out;
}

LogDensityJet log_density_jet(const GridDensity& base, double s, double y) {
    require_positive_time(s, "log_density_jet");
    require_in_range(base, s, y);
    auto& w = scratch();
    kernel_window(base, s, y, w);
    const Moments m = window_moments(w, base.grid);
    return {w.log_mass - 0.5 * std::log(2.0 * std::numbers::pi * s), (m.mean - y) / s, (m.var - s) / (s * s)};
}

LogDensityDerivatives log_density_derivatives(const GridDensity& base, double s, const Grid1D& grid) {
    LogDensityDerivatives out{std::vector<double>(grid.n), std::vector<double>(grid.n)};
    if (s > 0.0) {
        for (std::size_t j = 0; j < grid.n; ++j) {
            const LogDensityJet jet = log_density_jet(base, s, grid.node(j));
            out.d1[j] = jet.d1;
            out.d2[j] = jet.d2;
        }
        return out;
    }
    if (grid.n != base.grid.n || grid.x_min != base.grid.x_min || grid.x_max != base.grid.x_max)
        throw std::invalid_argument("log_density_derivatives: s = 0 requires the base grid");
    const auto& l = base.log_values;
    const double h = grid.h;
    for (std::size_t i = 0; i < grid.n; ++i) {
        if (!std::isfinite(l[i])) throw std::invalid_argument("log_density_derivatives: s = 0 needs positive density");
    }
    const std::size_t n = grid.n;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        out.d1[i] = (l[i + 1] - l[i - 1]) / (2.0 * h);
        out.d2[i] = (l[i + 1] - 2.0 * l[i] + l[i - 1]) / (h * h);
    }
    out.d1[0] = (-3.0 * l[0] + 4.0 * l[1] - l[2]) / (2.0 * h);
    out.d1[n - 1] = (3.0 * l[n - 1] - 4.0 * l[n - 2] + l[n - 3]) / (2.0 * h);
    out.d2[0] = out.d2[1];
    out.d2[n - 1] = out.d2[n - 2];
    return out;
}

double q_time_derivative_check(const GridField& phi, const GridDensity& base, double s, double ds) {
    if (!(s > ds) || !(ds > 0.0)) throw std::invalid_argument("q_time_derivative_check: need s > ds > 0");
    require_on_base(phi.values, base);
    const auto& g = base.grid;
    const auto [lo, hi] = g.inner_half();
    double worst = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) {
        const double y = g.node(j);
        const double ahead = q_point(phi.values, base, s + ds, y).value;
        const double behind = q_point(phi.values, base, s - ds, y).value;
        const QPoint q = q_point(phi.values, base, s, y);
        const double drift = log_density_jet(base, s, y).d1;
        const double box = 0.5 * q.hessian + drift * q.gradient;
        worst = std::max(worst, std::abs((ahead - behind) / (2.0 * ds) - box));
    }
    return worst;
}

GridField box_apply(const GridField& u, const GridDensity& base, double s) {
    const auto& g = u.grid;
    const LogDensityDerivatives der = log_density_derivatives(base, s, g);
    GridField out{g, std::vector<double>(g.n, 0.0)};
    const double h = g.h;
    for (std::size_t i = 1; i + 1 < g.n; ++i) {
        const double du = (u.values[i + 1] - u.values[i - 1]) / (2.0 * h);
        const double d2u = (u.values[i + 1] - 2.0 * u.values[i] + u.values[i - 1]) / (h * h);
        out.values[i] = 0.5 * d2u + der.d1[i] * du;
    }
    return out;
}

namespace {

// Definitional and closed-form Gamma_2 at every node of a grid with spacing h; ends stay 0.
struct GammaForms {
    std::vector<double> lhs;
    std::vector<double> rhs;
};

GammaForms gamma_forms(const std::vector<double>& v, const std::vector<double>& d1, const std::vector<double>& d2,
                       double h) {
    const std::size_t n = v.size();
    std::vector<double> du(n, 0.0), d2u(n, 0.0), sq(n, 0.0), box_u(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        du[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
        d2u[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
        sq[i] = du[i] * du[i];
        box_u[i] = 0.5 * d2u[i] + d1[i] * du[i];
    }
    GammaForms f{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    for (std::size_t i = 2; i + 2 < n; ++i) {
        const double dsq = (sq[i + 1] - sq[i - 1]) / (2.0 * h);
        const double d2sq = (sq[i + 1] - 2.0 * sq[i] + sq[i - 1]) / (h * h);
        const double dbox = (box_u[i + 1] - box_u[i - 1]) / (2.0 * h);
        f.lhs[i] = 0.5 * d2sq + d1[i] * dsq - 2.0 * dbox * du[i];
        f.rhs[i] = d2u[i] * d2u[i] - 2.0 * d2[i] * du[i] * du[i];
    }
    return f;
}

std::vector<double> every_other(const std::vector<double>& v) {
    std::vector<double> out((v.size() + 1) / 2);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = v[2 * j];
    return out;
}

}  // namespace

GammaReport gamma2(const GridField& u, const GridDensity& base, double s) {
    require_positive_time(s, "gamma2");
    const auto& g = u.grid;
    const std::size_t n = g.n;
    if (n < 13) throw std::invalid_argument("gamma2: grid too small");
    const LogDensityDerivatives der = log_density_derivatives(base, s, g);
    const GammaForms fine = gamma_forms(u.values, der.d1, der.d2, g.h);
    const GammaForms coarse = gamma_forms(every_other(u.values), every_other(der.d1), every_other(der.d2), 2.0 * g.h);

    // Both forms are even in h; one Richardson step on the shared nodes.
    GammaReport rep{s, 2, 0.0, 0.0, 0.0};
    auto [lo, hi] = g.inner_half();
    lo = std::max<std::size_t>(lo, 6);
    hi = std::min(hi, n - 7);
    for (std::size_t i = lo + lo % 2; i <= hi; i += 2) {
        const double lhs = (4.0 * fine.lhs[i] - coarse.lhs[i / 2]) / 3.0;
        const double rhs = (4.0 * fine.rhs[i] - coarse.rhs[i / 2]) / 3.0;
        const double r = std::abs(lhs - rhs);
        if (r >= rep.residual) rep = {s, 2, lhs, rhs, r};
    }
    return rep;
}

std::vector<GammaIntegrals> gamma_integrals(const std::vector<GridField>& phis, const GridDensity& base, double s) {
    require_positive_time(s, "gamma_integrals");
    for (const auto& phi : phis) require_on_base(phi.values, base);
    const GridDensity flow = heat_convolve(base, s);
    const auto& g = flow.grid;
    const std::size_t count = phis.size();
    std::vector<std::vector<double>> i0(count, std::vector<double>(g.n)), i1 = i0, i2 = i0;
    auto& w = scratch();
    for (std::size_t j = 0; j < g.n; ++j) {
        kernel_window(base, s, g.node(j), w);
        const Moments m = window_moments(w, base.grid);
        const double d2 = (m.var - s) / (s * s);
        const double rho = flow.values[j];
        for (std::size_t f = 0; f < count; ++f) {
            const QPoint q = window_q(w, base.grid, m, phis[f].values, s);
            i0[f][j] = q.value * q.value * rho;
            i1[f][j] = q.gradient * q.gradient * rho;
            i2[f][j] = (q.hessian * q.hessian - 2.0 * d2 * q.gradient * q.gradient) * rho;
        }
    }
    std::vector<GammaIntegrals> out(count);
    for (std::size_t f = 0; f < count; ++f) out[f] = {trapezoid(g, i0[f]), trapezoid(g, i1[f]), trapezoid(g, i2[f])};
    return out;
}

GammaIntegrals gamma_integrals(const GridField& phi, const GridDensity& base, double s) {
    return gamma_integrals(std::vector<GridField>{phi}, base, s).front();
}

std::vector<FlowIdentity> flow_identities(const std::vector<GridField>& phis, const GridDensity& base, double s,
                                          double ds) {
    if (!(s > ds) || !(ds > 0.0)) throw std::invalid_argument("flow_identity_check: need s > ds > 0");
    const auto ahead = gamma_integrals(phis, base, s + ds);
    const auto behind = gamma_integrals(phis, base, s - ds);
    const auto at = gamma_integrals(phis, base, s);
    std::vector<FlowIdentity> out(phis.size());
    for (std::size_t f = 0; f < phis.size(); ++f) {
        const double lhs0 = (ahead[f].g0 - behind[f].g0) / (2.0 * ds);
        const double lhs1 = (ahead[f].g1 - behind[f].g1) / (2.0 * ds);
        out[f].level0 = {s, 0, lhs0, -at[f].g1, std::abs(lhs0 + at[f].g1)};
        out[f].level1 = {s, 1, lhs1, -at[f].g2, std::abs(lhs1 + at[f].g2)};
    }
    return out;
}

GammaReport flow_identity_check(const GridField& phi, const GridDensity& base, double s, double ds, int level) {
    if (level != 0 && level != 1) throw std::invalid_argument("flow_identity_check: level must be 0 or 1");
    const FlowIdentity id = flow_identities({phi}, base, s, ds).front();
    return level == 0 ? id.level0 : id.level1;
}

PointwiseBounds pointwise_bounds(const GridField& phi, const GridField& dphi, const GridDensity& base, double s) {
    require_positive_time(s, "pointwise_bounds");
    require_on_base(phi.values, base);
    require_on_base(dphi.values, base);
    const std::size_t n = base.grid.n;
    std::vector<double> phi2(n), dphi2(n), dabs(n);
    for (std::size_t i = 0; i < n; ++i) {
        phi2[i] = phi.values[i] * phi.values[i];
        dphi2[i] = dphi.values[i] * dphi.values[i];
        dabs[i] = std::abs(dphi.values[i]);
    }
    const GridDensity flow = heat_convolve(base, s);
    const auto& g = flow.grid;
    const auto [lo, hi] = g.inner_half();
    PointwiseBounds out{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                        std::numeric_limits<double>::infinity()};
    auto& w = scratch();
    for (std::size_t j = lo; j <= hi; ++j) {
        kernel_window(base, s, g.node(j), w);
        const Moments m = window_moments(w, base.grid);
        const QPoint q = window_q(w, base.grid, m, phi.values, s);
        const double rho = flow.values[j];
        out.value_margin = std::min(out.value_margin, rho * (window_average(w, phi2) - q.value * q.value));
        out.gradient_margin = std::min(out.gradient_margin, rho * (window_average(w, dphi2) - q.gradient * q.gradient));
        out.strong_margin = std::min(out.strong_margin, window_average(w, dabs) - std::abs(q.gradient));
    }
    return out;
}

}  // namespace hflab
