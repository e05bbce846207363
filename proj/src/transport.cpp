#include "hflab/transport.hpp"

#include "hflab/spectrum.hpp"
#include "hflab/tilt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace hflab {

namespace {

// Centered first and second differences of the base log-density, interpolated linearly.
FieldPoint base_field(const GridDensity& gd, double y) {
    const auto& g = gd.grid;
    const auto& l = gd.log_values;
    if (y < g.x_min || y > g.x_max) throw OutOfRange("advection: point outside the base grid");
    auto at = [&](std::size_t i) {
        i = std::clamp<std::size_t>(i, 1, g.n - 2);
        const double d1 = (l[i + 1] - l[i - 1]) / (2.0 * g.h);
        const double d2 = (l[i + 1] - 2.0 * l[i] + l[i - 1]) / (g.h * g.h);
        return FieldPoint{-0.5 * d1, -0.5 * d2};
    };
    auto k = static_cast<std::size_t>((y - g.x_min) / g.h);
    k = std::min(k, g.n - 2);
    const double u = (y - g.node(k)) / g.h;
    const FieldPoint a = at(k), b = at(k + 1);
    return {(1.0 - u) * a.w + u * b.w, (1.0 - u) * a.dw + u * b.dw};
}

void require_smooth(const GridDensity& gd) {
    if (gd.has_closed_support()) throw std::invalid_argument("flow: a base with closed support needs smoothing > 0");
    for (double l : gd.log_values)
        if (!std::isfinite(l)) throw std::invalid_argument("flow: base must be positive on its grid");
}

// Simpson weights (trapezoid when the node count is even), without the factor h.
std::vector<double> simpson_weights(std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n % 2 == 0) {
        w.front() = w.back() = 0.5;
        return w;
    }
    for (std::size_t i = 0; i < n; ++i) w[i] = (i == 0 || i + 1 == n) ? 1.0 / 3.0 : (i % 2 ? 4.0 / 3.0 : 2.0 / 3.0);
    return w;
}

// Fourth-order centered derivative, second order at the two outermost nodes on each side.
std::vector<double> derivative4(const std::vector<double>& v, double h) {
    const std::size_t n = v.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i >= 2 && i + 2 < n)
            d[i] = (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / (12.0 * h);
        else if (i == 0)
            d[i] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
        else if (i + 1 == n)
            d[i] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
        else
            d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    return d;
}

}  // namespace

GridDensity FlowBase::at(double s) const { return heat_convolve(density, s + smoothing); }

double FlowBase::regularity() const {
    if (smoothing > 0.0) return smoothing;
    require_smooth(density);
    const auto& l = density.log_values;
    const double h2 = density.grid.h * density.grid.h;
    double kappa = 0.0;
    for (std::size_t i = 1; i + 1 < density.grid.n; ++i) kappa = std::max(kappa, -(l[i + 1] - 2.0 * l[i] + l[i - 1]) / h2);
    return kappa > 0.0 ? 1.0 / kappa : 1.0;
}

FieldPoint advection_at(const FlowBase& base, double s, double y) {
    const double tau = s + base.smoothing;
    if (tau > 0.0) {
        const TiltMoments m = tilt_moments(base.density, tau, y);
        return {(y - m.mean) / (2.0 * tau), (tau - m.var) / (2.0 * tau * tau)};
    }
    require_smooth(base.density);
    return base_field(base.density, y);
}

AdvectionField advection_field(const FlowBase& base, double s) {
    if (!(s >= 0.0)) throw std::invalid_argument("advection_field: s must be >= 0");
    AdvectionField out;
    out.s = s;
    out.grid = s + base.smoothing > 0.0 ? base.at(s).grid : base.density.grid;
    const auto& g = out.grid;
    out.values.resize(g.n);
    out.derivative.resize(g.n);
    for (std::size_t j = 0; j < g.n; ++j) {
        const FieldPoint p = advection_at(base, s, g.node(j));
        out.values[j] = p.w;
        out.derivative[j] = p.dw;
    }
    const auto [lo, hi] = g.inner_half();
    for (std::size_t j = std::max<std::size_t>(lo, 1); j <= std::min(hi, g.n - 2); ++j) {
        out.lipschitz_bound = std::max(out.lipschitz_bound, std::abs(out.derivative[j]));
        const double fd = (out.values[j + 1] - out.values[j - 1]) / (2.0 * g.h);
        out.fd_mismatch = std::max(out.fd_mismatch, std::abs(fd - out.derivative[j]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Interpolation

HermiteCurve::HermiteCurve(std::vector<double> x, std::vector<double> y, std::vector<double> slope, bool monotone)
    : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n || slope.size() != n) throw std::invalid_argument("HermiteCurve: size mismatch");
    for (std::size_t i = 1; i < n; ++i)
        if (!(x_[i] > x_[i - 1])) throw std::invalid_argument("HermiteCurve: nodes must be strictly increasing");
    m_left_.resize(n - 1);
    m_right_.resize(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        double ml = slope[k], mr = slope[k + 1];
        if (monotone) {
            const double secant = (y_[k + 1] - y_[k]) / (x_[k + 1] - x_[k]);
            if (secant == 0.0) {
                ml = mr = 0.0;
            } else {
                double a = ml / secant, b = mr / secant;
                a = std::max(a, 0.0);
                b = std::max(b, 0.0);
                const double r = a * a + b * b;
                if (r > 9.0) {
                    const double t = 3.0 / std::sqrt(r);
                    a *= t;
                    b *= t;
                }
                ml = a * secant;
                mr = b * secant;
            }
        }
        m_left_[k] = ml;
        m_right_[k] = mr;
    }
}

std::size_t HermiteCurve::cell(double x) const {
    const double span = x_.back() - x_.front();
    if (!(x >= x_.front() - 1e-12 * span && x <= x_.back() + 1e-12 * span))
        throw std::out_of_range("HermiteCurve: point outside the sampled range");
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t k = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    return std::min(k, x_.size() - 2);
}

double HermiteCurve::operator()(double x) const {
    const std::size_t k = cell(x);
    const double hk = x_[k + 1] - x_[k];
    const double t = (x - x_[k]) / hk;
    const double t2 = t * t, t3 = t2 * t;
    return (2.0 * t3 - 3.0 * t2 + 1.0) * y_[k] + (t3 - 2.0 * t2 + t) * hk * m_left_[k] +
           (-2.0 * t3 + 3.0 * t2) * y_[k + 1] + (t3 - t2) * hk * m_right_[k];
}

double HermiteCurve::derivative(double x) const {
    const std::size_t k = cell(x);
    const double hk = x_[k + 1] - x_[k];
    const double t = (x - x_[k]) / hk;
    const double t2 = t * t;
    return (6.0 * t2 - 6.0 * t) * (y_[k] - y_[k + 1]) / hk + (3.0 * t2 - 4.0 * t + 1.0) * m_left_[k] +
           (3.0 * t2 - 2.0 * t) * m_right_[k];
}

TransportMap make_map(double s_start, double s_end, std::vector<double> y_nodes, std::vector<double> t_values,
                      std::vector<double> derivative) {
    for (std::size_t i = 1; i < t_values.size(); ++i)
        if (!(t_values[i] > t_values[i - 1])) throw std::invalid_argument("transport map: values are not strictly increasing");
    TransportMap map{s_start, s_end, std::move(y_nodes), std::move(t_values), std::move(derivative), {}};
    map.curve = HermiteCurve(map.y_nodes, map.t_values, map.derivative);
    return map;
}

// ---------------------------------------------------------------------------
// Flow

std::vector<double> flow_nodes(const GridDensity& mu, double tail, std::size_t count) {
    if (count < 2) throw std::invalid_argument("flow_nodes: need at least 2 nodes");
    const std::vector<double> cum = cumulative_trapezoid(mu.grid, mu.values);
    const double total = cum.back();
    std::size_t lo = 0, hi = mu.grid.n - 1;
    while (lo + 1 < mu.grid.n && cum[lo + 1] < tail * total) ++lo;
    while (hi > lo + 1 && total - cum[hi - 1] < tail * total) --hi;
    const double a = mu.grid.node(lo), b = mu.grid.node(hi);
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = (a * static_cast<double>(count - 1 - i) + b * static_cast<double>(i)) / static_cast<double>(count - 1);
    return out;
}

TransportMap integrate_flow(const FlowBase& base, const std::vector<double>& y_nodes, double s_end, std::size_t steps,
                            double s_start) {
    if (!(s_start >= 0.0) || !(s_end >= s_start)) throw std::invalid_argument("integrate_flow: need 0 <= s_start <= s_end");
    for (std::size_t i = 1; i < y_nodes.size(); ++i)
        if (!(y_nodes[i] > y_nodes[i - 1])) throw std::invalid_argument("integrate_flow: nodes must be strictly increasing");
    const std::size_t n = y_nodes.size();
    std::vector<double> t = y_nodes, d(n, 1.0);
    if (s_end == s_start) return make_map(s_start, s_end, y_nodes, std::move(t), std::move(d));
    if (steps < 64) throw std::invalid_argument("integrate_flow: at least 64 steps required");

    const double eps = base.regularity();
    const double u0 = std::log(s_start + eps), u1 = std::log(s_end + eps);
    auto time_at = [&](std::size_t j) {
        if (j == 0) return s_start;
        if (j == steps) return s_end;
        return std::exp(u0 + (u1 - u0) * static_cast<double>(j) / static_cast<double>(steps)) - eps;
    };

    for (std::size_t i = 0; i < n; ++i) {
        double x = t[i], dx = 1.0;
        auto field = [&](double s, double pos) {
            try {
                return advection_at(base, s, pos);
            } catch (const OutOfRange&) {
                std::ostringstream os;
                os << "integrate_flow: trajectory from y = " << y_nodes[i] << " left the resolved grid at s = " << s;
                throw std::runtime_error(os.str());
            }
        };
        for (std::size_t j = 0; j < steps; ++j) {
            const double sa = time_at(j), sb = time_at(j + 1);
            const double h = sb - sa, sm = sa + 0.5 * h;
            const FieldPoint k1 = field(sa, x);
            const double d1 = k1.dw * dx;
            const FieldPoint k2 = field(sm, x + 0.5 * h * k1.w);
            const double d2 = k2.dw * (dx + 0.5 * h * d1);
            const FieldPoint k3 = field(sm, x + 0.5 * h * k2.w);
            const double d3 = k3.dw * (dx + 0.5 * h * d2);
            const FieldPoint k4 = field(sb, x + h * k3.w);
            const double d4 = k4.dw * (dx + h * d3);
            x += h / 6.0 * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w);
            dx += h / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
        }
        t[i] = x;
        d[i] = dx;
    }
    return make_map(s_start, s_end, y_nodes, std::move(t), std::move(d));
}

ExpansionReport expansion_check(const TransportMap& map) {
    ExpansionReport r;
    r.min_ratio = r.min_derivative = std::numeric_limits<double>::infinity();
    r.max_ratio = r.max_derivative = -std::numeric_limits<double>::infinity();
    const auto& y = map.y_nodes;
    const auto& t = map.t_values;
    for (std::size_t i = 0; i < y.size(); ++i) {
        r.min_derivative = std::min(r.min_derivative, map.derivative[i]);
        r.max_derivative = std::max(r.max_derivative, map.derivative[i]);
        for (std::size_t j = i + 1; j < y.size(); ++j) {
            const double ratio = std::abs(t[j] - t[i]) / std::abs(y[j] - y[i]);
            r.min_ratio = std::min(r.min_ratio, ratio);
            r.max_ratio = std::max(r.max_ratio, ratio);
        }
    }
    r.expansion = r.min_ratio >= 1.0 - 1e-6 && r.min_derivative >= 1.0 - 1e-6;
    r.contraction = r.max_ratio <= 1.0 + 1e-6 && r.max_derivative <= 1.0 + 1e-6;
    return r;
}

double pushforward_check(const FlowBase& base, const TransportMap& map) {
    const GridDensity mu = base.at(map.s_start);
    const GridDensity nu = base.at(map.s_end);
    const std::vector<double> cmu = cumulative_trapezoid(mu.grid, mu.values);
    const std::vector<double> cnu = cumulative_trapezoid(nu.grid, nu.values);
    double worst = 0.0;
    for (std::size_t i = 0; i < map.y_nodes.size(); ++i)
        worst = std::max(worst, std::abs(cdf_at(nu, cnu, map.t_values[i]) - cdf_at(mu, cmu, map.y_nodes[i])));
    return worst;
}

TransportMap inverse_map(const TransportMap& map) {
    std::vector<double> slopes(map.derivative.size());
    for (std::size_t i = 0; i < slopes.size(); ++i) {
        if (!(map.derivative[i] > 0.0)) throw std::invalid_argument("inverse_map: map is not strictly monotone");
        slopes[i] = 1.0 / map.derivative[i];
    }
    return make_map(map.s_end, map.s_start, map.t_values, map.y_nodes, std::move(slopes));
}

double composition_residual(const TransportMap& map, const TransportMap& inverse) {
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < map.y_nodes.size(); ++i) {
        const double mid = 0.5 * (map.y_nodes[i] + map.y_nodes[i + 1]);
        worst = std::max(worst, std::abs(inverse(map(mid)) - mid));
    }
    return worst;
}

RayleighTransfer rayleigh_transfer_check(const TestFunction& phi, const FlowBase& base, const TransportMap& map,
                                         double slack) {
    const GridDensity mu = base.at(map.s_start);
    const GridDensity nu = base.at(map.s_end);
    const TransportMap inv = inverse_map(map);
    const double y_lo = map.y_nodes.front(), y_hi = map.y_nodes.back();
    const double t_lo = map.t_values.front(), t_hi = map.t_values.back();

    std::vector<double> num(mu.grid.n, 0.0), den(mu.grid.n, 0.0);
    for (std::size_t i = 0; i < mu.grid.n; ++i) {
        const double x = mu.grid.node(i);
        if (x < y_lo || x > y_hi) continue;
        const double f = phi.f(x), df = phi.df(x);
        num[i] = df * df * mu.values[i];
        den[i] = f * f * mu.values[i];
    }
    std::vector<double> lnum(nu.grid.n, 0.0), lden(nu.grid.n, 0.0);
    for (std::size_t i = 0; i < nu.grid.n; ++i) {
        const double y = nu.grid.node(i);
        if (y < t_lo || y > t_hi) continue;
        const double back = inv(y);
        const double g = phi.f(back), dg = phi.df(back) * inv.slope(y);
        lnum[i] = dg * dg * nu.values[i];
        lden[i] = g * g * nu.values[i];
    }
    RayleighTransfer out;
    out.rhs = trapezoid(mu.grid, num) / trapezoid(mu.grid, den);
    out.lhs = trapezoid(nu.grid, lnum) / trapezoid(nu.grid, lden);
    out.holds = out.lhs <= out.rhs + slack;
    return out;
}

TransportPoincare transport_poincare(const FlowBase& base, double s, std::size_t nodes, std::size_t steps) {
    TransportPoincare out;
    const GridDensity mu = base.at(0.0);
    const DiscreteOperator op = assemble_L(mu);
    const SpectrumResult spec = eigen_spectrum(op, 1);
    const double lambda = spec.eigenvalues[1];
    out.spectral_mu = 1.0 / lambda;
    out.richardson = spec.richardson[1] / (lambda * lambda);

    // Rayleigh quotient of the first eigenfunction with Simpson quadrature and 4th-order derivatives.
    const auto& phi = spec.eigenvectors[1].values;
    const Grid1D& g = op.grid;
    const std::vector<double> w = simpson_weights(g.n);
    const std::vector<double> dphi = derivative4(phi, g.h);
    double mass = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < g.n; ++i) {
        const double rho = std::exp(op.log_values[i]);
        mass += w[i] * rho;
        mean += w[i] * rho * phi[i];
    }
    mean /= mass;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g.n; ++i) {
        const double rho = std::exp(op.log_values[i]);
        num += w[i] * rho * dphi[i] * dphi[i];
        den += w[i] * rho * (phi[i] - mean) * (phi[i] - mean);
    }
    out.transport_mu = den / num;
    out.agree = std::abs(out.transport_mu - out.spectral_mu) <= 2.0 * out.richardson;

    // Pull the eigenfunction through the inverse flow map onto mu_s.
    const TransportMap map = integrate_flow(base, flow_nodes(mu, 1e-12, nodes), s, steps);
    const TransportMap inv = inverse_map(map);
    const HermiteCurve eig(g.nodes(), phi, dphi, false);
    const GridDensity nu = base.at(s);
    const std::size_t m = nu.grid.n;
    std::vector<double> f(m, 0.0), df(m, 0.0), weight(m, 0.0);
    const double lo = std::max(map.t_values.front(), inv.curve.x_min());
    const double hi = std::min(map.t_values.back(), inv.curve.x_max());
    for (std::size_t i = 0; i < m; ++i) {
        const double y = nu.grid.node(i);
        if (y < lo || y > hi) continue;
        const double back = inv(y);
        if (back < g.x_min || back > g.x_max) continue;
        f[i] = eig(back);
        df[i] = eig.derivative(back) * inv.slope(y);
        weight[i] = nu.values[i] * nu.grid.trapezoid_weight(i);
    }
    double wsum = 0.0, fmean = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        wsum += weight[i];
        fmean += weight[i] * f[i];
    }
    fmean /= wsum;
    double nnum = 0.0, nden = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        nnum += weight[i] * df[i] * df[i];
        nden += weight[i] * (f[i] - fmean) * (f[i] - fmean);
    }
    out.lower_nu = nden / nnum;

    const SpectrumResult spec_nu = eigen_spectrum(assemble_L(nu), 1);
    out.spectral_nu = spec_nu.poincare;
    const double rich_nu = spec_nu.richardson[1] * out.spectral_nu * out.spectral_nu;
    const double slack = 2.0 * (out.richardson + rich_nu) + 1e-9 * out.spectral_nu;
    out.certified = out.transport_mu <= out.lower_nu + slack && out.lower_nu <= out.spectral_nu + slack;
    return out;
}

}  // namespace hflab
