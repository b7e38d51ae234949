#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace qspin::quad {

/// Gauss-Legendre rule on [-1, 1].
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

Rule gauss_legendre(std::size_t n);

struct Result {
  double value = 0.0;
  double error = 0.0;
  std::size_t intervals = 0;
};

/// Globally adaptive Gauss-Kronrod (7, 15) quadrature with interval
/// bisection. Stops when the summed error estimate is at most
/// max(abs_tol, rel_tol |value|); throws ConvergenceError past max_intervals.
Result integrate(const std::function<double(double)>& f, double a, double b, double abs_tol,
                 double rel_tol = 0.0, std::size_t max_intervals = 20000);

}  // namespace qspin::quad
