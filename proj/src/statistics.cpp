#include "hflab/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hflab {

double sample_mean(const std::vector<double>& x) {
    if (x.empty()) throw std::invalid_argument("sample_mean: empty sample");
    double sum = 0.0;
    for (double v : x) sum += v;
    return sum / static_cast<double>(x.size());
}

double sample_variance(const std::vector<double>& x) {
    if (x.size() < 2) throw std::invalid_argument("sample_variance: need at least two values");
    const double m = sample_mean(x);
    double sum = 0.0;
    for (double v : x) sum += (v - m) * (v - m);
    return sum / static_cast<double>(x.size() - 1);
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_distance: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double ks_threshold(std::size_t n, std::size_t m) {
    const double a = static_cast<double>(n), b = static_cast<double>(m);
    return 1.63 * std::sqrt((a + b) / (a * b));
}

}  // namespace hflab
