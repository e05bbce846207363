// Lowest eigenpairs of a symmetric tridiagonal matrix by Sturm bisection and inverse iteration.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace hflab {

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::size_t index) : std::runtime_error(what), index_(index) {}
    std::size_t index() const { return index_; }

private:
    std::size_t index_;
};

struct TridiagonalEigen {
    std::vector<double> values;                // ascending
    std::vector<std::vector<double>> vectors;  // unit Euclidean norm
};

/// Number of eigenvalues strictly below x.
std::size_t sturm_count(const std::vector<double>& diag, const std::vector<double>& off, double x);

/// The `count` smallest eigenpairs. off has diag.size() - 1 entries.
TridiagonalEigen lowest_eigenpairs(const std::vector<double>& diag, const std::vector<double>& off,
                                   std::size_t count);

}  // namespace hflab
