#include "hflab/spectrum.hpp"

#include "hflab/eigensolver.hpp"
#include "hflab/tilt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hflab {

namespace {

double log_add(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Every other node of the support of gd, renormalized.
GridDensity coarsen_density(const GridDensity& gd) {
    const Grid1D coarse = gd.grid.coarsened();
    std::vector<double> logs(coarse.n);
    for (std::size_t j = 0; j < coarse.n; ++j) logs[j] = gd.log_values[2 * j];
    return density_from_log_values(coarse, std::move(logs), gd.support_min, gd.support_max);
}

struct FlowQuotient {
    double quotient = 0.0;
    double log_norm = 0.0;
};

FlowQuotient flow_quotient(const std::vector<double>& phi, const GridDensity& base, double s) {
    if (s == 0.0) {
        const DiscreteOperator op = assemble_L(base);
        const std::vector<double> sub(phi.begin() + static_cast<std::ptrdiff_t>(op.offset),
                                      phi.begin() + static_cast<std::ptrdiff_t>(op.offset + op.grid.n));
        const double m = op.mass(sub);
        if (!(m > 0.0)) throw std::invalid_argument("rayleigh: zero denominator");
        return {op.energy(sub) / m, 0.5 * std::log(m)};
    }
    const GridDensity flow = heat_convolve(base, s);
    const auto& g = flow.grid;
    std::vector<double> num(g.n), den(g.n);
    for (std::size_t j = 0; j < g.n; ++j) {
        const QPoint q = q_point(phi, base, s, g.node(j));
        num[j] = q.gradient * q.gradient * flow.values[j];
        den[j] = q.value * q.value * flow.values[j];
    }
    const double m = trapezoid(g, den);
    if (!(m > 0.0)) throw std::invalid_argument("rayleigh: zero denominator");
    return {trapezoid(g, num) / m, 0.5 * std::log(m)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Operator

DiscreteOperator assemble_L(const GridDensity& gd) {
    const auto [first, last] = gd.support_range();
    for (std::size_t i = first; i <= last; ++i)
        if (!std::isfinite(gd.log_values[i])) throw std::invalid_argument("assemble_L: support is not an interval");
    const std::size_t m = last - first + 1;
    if (m < 3) throw std::invalid_argument("assemble_L: support has fewer than 3 nodes");

    DiscreteOperator op;
    op.grid = make_grid(gd.grid.node(first), gd.grid.node(last), m);
    op.offset = first;
    op.density = gd;
    op.log_values.assign(gd.log_values.begin() + static_cast<std::ptrdiff_t>(first),
                         gd.log_values.begin() + static_cast<std::ptrdiff_t>(last + 1));
    const auto& l = op.log_values;
    const double h = op.grid.h;
    const double h2 = h * h;
    op.diag.assign(m, 0.0);
    op.offdiag.assign(m - 1, 0.0);
    op.weight.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double c = op.grid.trapezoid_weight(i);
        double faces = 0.0;
        if (i > 0) faces += std::exp(0.5 * (l[i - 1] - l[i]));
        if (i + 1 < m) faces += std::exp(0.5 * (l[i + 1] - l[i]));
        op.diag[i] = faces / (h2 * c);
        op.weight[i] = std::exp(0.5 * (std::log(c * h) + l[i]));
        if (i + 1 < m) op.offdiag[i] = -1.0 / (h2 * std::sqrt(c * op.grid.trapezoid_weight(i + 1)));
    }
    return op;
}

std::vector<double> DiscreteOperator::apply(const std::vector<double>& u) const {
    const std::size_t m = grid.n;
    if (u.size() != m) throw std::invalid_argument("DiscreteOperator::apply: size mismatch");
    const double h2 = grid.h * grid.h;
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        double flux = 0.0;
        if (i + 1 < m) flux += std::exp(0.5 * (log_values[i + 1] - log_values[i])) * (u[i + 1] - u[i]);
        if (i > 0) flux -= std::exp(0.5 * (log_values[i - 1] - log_values[i])) * (u[i] - u[i - 1]);
        out[i] = flux / (h2 * grid.trapezoid_weight(i));
    }
    return out;
}

double DiscreteOperator::energy(const std::vector<double>& u) const {
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < grid.n; ++i) {
        const double d = u[i + 1] - u[i];
        sum += std::exp(0.5 * (log_values[i] + log_values[i + 1])) * d * d;
    }
    return sum / grid.h;
}

double DiscreteOperator::inner(const std::vector<double>& u, const std::vector<double>& v) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.n; ++i) sum += grid.trapezoid_weight(i) * std::exp(log_values[i]) * u[i] * v[i];
    return sum * grid.h;
}

double DiscreteOperator::mass(const std::vector<double>& u) const { return inner(u, u); }

// ---------------------------------------------------------------------------
// Spectrum

SpectrumResult eigen_spectrum(const DiscreteOperator& op, std::size_t K, bool with_richardson) {
    const std::size_t m = op.grid.n;
    if (K + 1 > m) throw std::invalid_argument("eigen_spectrum: K + 1 exceeds the matrix dimension");
    TridiagonalEigen eig = lowest_eigenpairs(op.diag, op.offdiag, K + 1);

    SpectrumResult out;
    const auto& l = op.log_values;
    const double h2 = op.grid.h * op.grid.h;
    for (std::size_t k = 0; k <= K; ++k) {
        const auto& v = eig.vectors[k];
        // Rayleigh quotient of S written as a sum of squares over faces
        double e = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < m; ++i) norm += v[i] * v[i];
        for (std::size_t i = 0; i + 1 < m; ++i) {
            const double q = 0.25 * (l[i + 1] - l[i]);
            const double a = std::exp(-q) / std::sqrt(op.grid.trapezoid_weight(i + 1));
            const double b = std::exp(q) / std::sqrt(op.grid.trapezoid_weight(i));
            const double d = v[i + 1] * a - v[i] * b;
            e += d * d;
        }
        out.eigenvalues.push_back(e / (h2 * norm));

        GridField phi{op.grid, std::vector<double>(m)};
        double held = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (op.weight[i] > 0.0) held = v[i] / op.weight[i];
            phi.values[i] = held;
        }
        out.eigenvectors.push_back(std::move(phi));
    }
    out.conjugated = std::move(eig.vectors);
    if (K >= 1) out.poincare = 1.0 / out.eigenvalues[1];
    out.richardson.assign(K + 1, 0.0);
    if (with_richardson) {
        const Grid1D coarse = op.grid.coarsened();
        if (coarse.n >= K + 2 && coarse.n >= 3) {
            std::vector<double> logs(coarse.n);
            for (std::size_t j = 0; j < coarse.n; ++j) logs[j] = l[2 * j];
            const GridDensity cd = density_from_log_values(coarse, std::move(logs));
            const SpectrumResult cs = eigen_spectrum(assemble_L(cd), K, false);
            for (std::size_t k = 0; k <= K; ++k)
                out.richardson[k] = std::abs(out.eigenvalues[k] - cs.eigenvalues[k]) / 3.0;
        }
    }
    return out;
}

double poincare_constant(const GridDensity& gd) { return eigen_spectrum(assemble_L(gd), 1, false).poincare; }

double rayleigh(const GridField& phi, const GridDensity& gd) {
    if (phi.values.size() != gd.grid.n) throw std::invalid_argument("rayleigh: field must live on the density grid");
    return flow_quotient(phi.values, gd, 0.0).quotient;
}

double monotone_slack(double richardson) { return std::max(1e-8, 10.0 * richardson); }

RayleighTrace rayleigh_flow(const GridField& phi, const GridDensity& base, const std::vector<double>& s_ladder) {
    if (phi.values.size() != base.grid.n) throw std::invalid_argument("rayleigh_flow: field must live on the base grid");
    for (std::size_t j = 0; j < s_ladder.size(); ++j) {
        if (!(s_ladder[j] >= 0.0)) throw std::invalid_argument("rayleigh_flow: negative time in ladder");
        if (j > 0 && !(s_ladder[j] > s_ladder[j - 1])) throw std::invalid_argument("rayleigh_flow: ladder not increasing");
    }
    const GridDensity coarse = coarsen_density(base);
    std::vector<double> coarse_phi(coarse.grid.n);
    for (std::size_t j = 0; j < coarse.grid.n; ++j) coarse_phi[j] = phi.values[2 * j];

    RayleighTrace out;
    out.s = s_ladder;
    double worst_rich = 0.0;
    for (double s : s_ladder) {
        const FlowQuotient fine = flow_quotient(phi.values, base, s);
        const FlowQuotient rough = flow_quotient(coarse_phi, coarse, s);
        const double rich = std::max(std::abs(fine.quotient - rough.quotient), std::abs(fine.log_norm - rough.log_norm)) / 3.0;
        out.quotient.push_back(fine.quotient);
        out.log_norm.push_back(fine.log_norm);
        out.richardson.push_back(rich);
        worst_rich = std::max(worst_rich, rich);
    }
    out.tol_mono = monotone_slack(worst_rich);
    out.worst_increase = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j + 1 < out.s.size(); ++j)
        out.worst_increase = std::max(out.worst_increase, out.quotient[j + 1] - out.quotient[j]);
    out.worst_convexity = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j + 1 < out.s.size(); ++j) {
        const double a = out.s[j] - out.s[j - 1], b = out.s[j + 1] - out.s[j];
        const double chord = (b * out.log_norm[j - 1] + a * out.log_norm[j + 1]) / (a + b);
        out.worst_convexity = std::max(out.worst_convexity, out.log_norm[j] - chord);
    }
    out.monotone = out.s.size() < 2 || out.worst_increase <= out.tol_mono;
    out.convex = out.s.size() < 3 || out.worst_convexity <= out.tol_mono;
    return out;
}

// ---------------------------------------------------------------------------
// Isoperimetry

double cheeger_h(const GridDensity& gd, double* argmin) {
    const auto& g = gd.grid;
    const std::vector<double> cum = cumulative_trapezoid(g, gd.values);
    const double total = cum.back();
    double best = std::numeric_limits<double>::infinity();
    double where = g.node(0);
    for (std::size_t i = 1; i + 1 < g.n; ++i) {
        const double left = cum[i] / total;
        const double right = (total - cum[i]) / total;
        const double side = std::min(left, right);
        if (!(side > 0.0)) continue;
        const double ratio = gd.values[i] / total / side;
        if (ratio < best) {
            best = ratio;
            where = g.node(i);
        }
    }
    if (argmin) *argmin = where;
    return best;
}

IsoperimetricResult cheeger_constant(const GridDensity& gd) {
    IsoperimetricResult out;
    out.h = cheeger_h(gd, &out.argmin_t);
    out.poincare = poincare_constant(gd);
    out.cheeger_product = out.poincare * out.h * out.h;
    return out;
}

SpectralFlow spectral_flow(const GridDensity& base, const std::vector<double>& s_ladder, std::size_t K, bool assert_all) {
    for (std::size_t j = 0; j < s_ladder.size(); ++j) {
        if (!(s_ladder[j] >= 0.0)) throw std::invalid_argument("spectral_flow: negative time in ladder");
        if (j > 0 && !(s_ladder[j] > s_ladder[j - 1])) throw std::invalid_argument("spectral_flow: ladder not increasing");
    }
    SpectralFlow out;
    out.s = s_ladder;
    out.asserted_levels = assert_all ? K : std::min<std::size_t>(K, 1);
    for (double s : s_ladder) {
        const GridDensity flow = heat_convolve(base, s);
        out.spectra.push_back(eigen_spectrum(assemble_L(flow), K));
        out.cheeger.push_back(cheeger_h(flow));
    }
    out.worst_increase = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j + 1 < out.s.size(); ++j) {
        const auto& a = out.spectra[j];
        const auto& b = out.spectra[j + 1];
        for (std::size_t k = 1; k <= out.asserted_levels; ++k) {
            const double tol = monotone_slack(std::max(a.richardson[k], b.richardson[k]));
            out.worst_increase = std::max(out.worst_increase, b.eigenvalues[k] - a.eigenvalues[k] - tol);
        }
    }
    out.monotone = out.s.size() < 2 || out.worst_increase <= 0.0;
    return out;
}

MuckenhouptResult muckenhoupt_constant(const GridDensity& gd) {
    const auto [first, last] = gd.support_range();
    const auto& g = gd.grid;
    const auto& l = gd.log_values;
    for (std::size_t i = first; i <= last; ++i)
        if (!std::isfinite(l[i])) throw std::invalid_argument("muckenhoupt: 1/rho is not integrable on the support");
    const double log_h2 = std::log(0.5 * g.h);
    const std::size_t m = last - first + 1;
    // log of int_{x_i}^{end} rho, and of int_{start}^{x_i} 1/rho, by trapezoid sums
    std::vector<double> log_tail(m, -std::numeric_limits<double>::infinity());
    for (std::size_t k = m - 1; k-- > 0;) {
        const std::size_t i = first + k;
        log_tail[k] = log_add(log_tail[k + 1], log_h2 + log_add(l[i], l[i + 1]));
    }
    std::vector<double> log_head(m, -std::numeric_limits<double>::infinity());
    for (std::size_t k = 1; k < m; ++k) {
        const std::size_t i = first + k;
        log_head[k] = log_add(log_head[k - 1], log_h2 + log_add(-l[i - 1], -l[i]));
    }
    MuckenhouptResult out;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k + 1 < m; ++k) {
        const double v = log_tail[k] + log_head[k];
        if (v > best) {
            best = v;
            out.argmax_r = g.node(first + k);
        }
    }
    out.C = std::exp(best);
    out.bound = 4.0 * out.C;
    out.poincare = poincare_constant(gd);
    out.holds = out.poincare <= out.bound * (1.0 + 1e-6);
    return out;
}

InterpolationReport interpolation_check(const std::vector<double>& u, const DiscreteOperator& op) {
    if (u.size() != op.grid.n) throw std::invalid_argument("interpolation_check: size mismatch");
    const std::vector<double> ones(u.size(), 1.0);
    const double mean = op.inner(u, ones) / op.inner(ones, ones);
    std::vector<double> c(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) c[i] = u[i] - mean;
    const std::vector<double> lu = op.apply(c);
    InterpolationReport out;
    const double a = -op.inner(lu, c);
    out.lhs = a * a;
    out.rhs = op.inner(lu, lu) * op.mass(c);
    out.holds = out.lhs <= out.rhs * (1.0 + 1e-9) + 1e-300;
    return out;
}

StrictDecrease strict_decrease_probe(const GridDensity& base, double s, double ds, std::size_t k) {
    if (!(s >= 0.0) || !(ds > 0.0)) throw std::invalid_argument("strict_decrease_probe: need s >= 0, ds > 0");
    const SpectrumResult a = eigen_spectrum(assemble_L(heat_convolve(base, s)), std::max<std::size_t>(k, 1));
    const SpectrumResult b = eigen_spectrum(assemble_L(heat_convolve(base, s + ds)), std::max<std::size_t>(k, 1));
    StrictDecrease out;
    out.margin = b.eigenvalues[k] - a.eigenvalues[k];
    out.richardson = std::max(a.richardson[k], b.richardson[k]);
    out.strict = out.margin < -out.richardson;
    return out;
}

double box_decomposition_residual(const std::function<double(double)>& u, const GridDensity& base, double s) {
    const GridDensity fine = s > 0.0 ? heat_convolve(base, s) : base;
    const GridDensity rough = coarsen_density(fine);

    auto defect = [&](const GridDensity& level) {
        const DiscreteOperator op = assemble_L(level);
        if (op.grid.n != level.grid.n) throw std::invalid_argument("box_decomposition_residual: density must be positive");
        const GridField uf = make_field(level.grid, u);
        const std::vector<double> lu = op.apply(uf.values);
        const GridField box = box_apply(uf, s > 0.0 ? base : level, s);
        const double h2 = level.grid.h * level.grid.h;
        std::vector<double> d(level.grid.n, 0.0);
        for (std::size_t i = 1; i + 1 < level.grid.n; ++i) {
            const double lap = (uf.values[i + 1] - 2.0 * uf.values[i] + uf.values[i - 1]) / h2;
            d[i] = lu[i] - box.values[i] - 0.5 * lap;
        }
        return d;
    };
    const GridDensity roughest = coarsen_density(rough);
    const std::vector<double> d1 = defect(fine);
    const std::vector<double> d2 = defect(rough);
    const std::vector<double> d4 = defect(roughest);
    // Two Richardson steps cancel the h^2 and h^4 terms of the even expansion.
    const auto [lo, hi] = fine.grid.inner_half();
    double worst = 0.0;
    for (std::size_t j = 1; j + 1 < roughest.grid.n; ++j) {
        const std::size_t i = 4 * j;
        if (i < lo || i > hi) continue;
        worst = std::max(worst, std::abs((64.0 * d1[i] - 20.0 * d2[2 * j] + d4[j]) / 45.0));
    }
    return worst;
}

}  // namespace hflab
