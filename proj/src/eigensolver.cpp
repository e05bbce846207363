#include "hflab/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace hflab {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double matrix_norm(const std::vector<double>& d, const std::vector<double>& e) {
    double norm = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        double row = std::abs(d[i]);
        if (i > 0) row += std::abs(e[i - 1]);
        if (i < e.size()) row += std::abs(e[i]);
        norm = std::max(norm, row);
    }
    return norm;
}

// LU factorization of a shifted tridiagonal matrix with partial pivoting.
struct TridiagonalLU {
    std::vector<double> dl, d, du, du2;
    std::vector<std::size_t> pivot;

    TridiagonalLU(const std::vector<double>& diag, const std::vector<double>& off, double shift, double tiny)
        : dl(off), d(diag), du(off), du2(diag.size() > 2 ? diag.size() - 2 : 0, 0.0), pivot(diag.size()) {
        const std::size_t n = d.size();
        for (double& v : d) v -= shift;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (std::abs(d[i]) >= std::abs(dl[i])) {
                pivot[i] = i;
                if (d[i] == 0.0) d[i] = tiny;
                const double fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                pivot[i] = i + 1;
                const double fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                const double temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if (i + 2 < n) {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
            }
        }
        pivot[n - 1] = n - 1;
        for (double& v : d)
            if (v == 0.0) v = tiny;
    }

    void solve(std::vector<double>& b) const {
        const std::size_t n = d.size();
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const std::size_t ip = pivot[i];
            const double temp = b[2 * i + 1 - ip] - dl[i] * b[ip];
            b[i] = b[ip];
            b[i + 1] = temp;
        }
        b[n - 1] /= d[n - 1];
        if (n > 1) b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        for (std::size_t i = n - 2; i-- > 0;) b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
};

double normalize(std::vector<double>& v) {
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (double& x : v) x /= norm;
    return norm;
}

std::vector<double> multiply(const std::vector<double>& d, const std::vector<double>& e, const std::vector<double>& v) {
    const std::size_t n = d.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double y = d[i] * v[i];
        if (i > 0) y += e[i - 1] * v[i - 1];
        if (i + 1 < n) y += e[i] * v[i + 1];
        out[i] = y;
    }
    return out;
}

}  // namespace

std::size_t sturm_count(const std::vector<double>& diag, const std::vector<double>& off, double x) {
    const double tiny = kEps * std::max(1.0, matrix_norm(diag, off)) * 1e-3;
    std::size_t count = 0;
    double q = 1.0;
    for (std::size_t i = 0; i < diag.size(); ++i) {
        q = diag[i] - x - (i > 0 ? off[i - 1] * off[i - 1] / q : 0.0);
        if (q == 0.0) q = -tiny;
        if (q < 0.0) ++count;
    }
    return count;
}

TridiagonalEigen lowest_eigenpairs(const std::vector<double>& diag, const std::vector<double>& off,
                                   std::size_t count) {
    const std::size_t n = diag.size();
    if (off.size() + 1 != n) throw std::invalid_argument("lowest_eigenpairs: off-diagonal size mismatch");
    if (count > n) throw std::invalid_argument("lowest_eigenpairs: more eigenpairs than the dimension");
    const double norm = matrix_norm(diag, off);
    double lower = std::numeric_limits<double>::infinity(), upper = -lower;
    for (std::size_t i = 0; i < n; ++i) {
        double r = 0.0;
        if (i > 0) r += std::abs(off[i - 1]);
        if (i + 1 < n) r += std::abs(off[i]);
        lower = std::min(lower, diag[i] - r);
        upper = std::max(upper, diag[i] + r);
    }

    TridiagonalEigen out;
    for (std::size_t k = 0; k < count; ++k) {
        double lo = lower, hi = upper;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (hi - lo <= 2.0 * kEps * std::max(std::abs(lo), std::abs(hi)) + kEps * norm * 1e-2) break;
            (sturm_count(diag, off, mid) > k ? hi : lo) = mid;
        }
        out.values.push_back(0.5 * (lo + hi));
    }

    for (std::size_t k = 0; k < count; ++k) {
        const double lambda = out.values[k];
        const TridiagonalLU lu(diag, off, lambda, kEps * norm);
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.1 * std::sin(0.7 * static_cast<double>(i) + 0.3 * static_cast<double>(k));
        normalize(v);
        double residual = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 6; ++it) {
            lu.solve(v);
            // keep away from previously found eigenvectors of nearby eigenvalues
            for (std::size_t j = 0; j < k; ++j) {
                if (std::abs(out.values[j] - lambda) > 1e-6 * std::max(1.0, std::abs(lambda))) continue;
                const double c = std::inner_product(v.begin(), v.end(), out.vectors[j].begin(), 0.0);
                for (std::size_t i = 0; i < n; ++i) v[i] -= c * out.vectors[j][i];
            }
            normalize(v);
            const std::vector<double> sv = multiply(diag, off, v);
            double r = 0.0;
            for (std::size_t i = 0; i < n; ++i) r = std::max(r, std::abs(sv[i] - lambda * v[i]));
            residual = r;
            if (it >= 1 && residual <= 1e3 * kEps * norm) break;
        }
        if (!(residual <= 1e6 * kEps * norm))
            throw ConvergenceError("inverse iteration did not converge for eigenpair " + std::to_string(k), k);
        // deterministic sign: first significant entry positive
        double vmax = 0.0;
        for (double x : v) vmax = std::max(vmax, std::abs(x));
        for (double x : v) {
            if (std::abs(x) > 1e-3 * vmax) {
                if (x < 0.0)
                    for (double& y : v) y = -y;
                break;
            }
        }
        out.vectors.push_back(std::move(v));
    }
    return out;
}

}  // namespace hflab
