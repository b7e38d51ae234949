#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qspin::stats {

double mean(std::span<const double> xs);
/// Unbiased sample variance (n - 1 denominator); 0 for n < 2.
double variance(std::span<const double> xs);
/// Standard error of the mean from the sample variance.
double standard_error(std::span<const double> xs);

/// Standard error of the mean by non-overlapping batch means. Uses
/// `batches` equal batches (trailing remainder dropped).
double batch_means_se(std::span<const double> xs, std::size_t batches = 20);

/// Integrated autocorrelation time with Sokal's self-consistent window
/// (window M is the smallest with M >= c * tau(M)). tau = 1/2 + sum rho(t),
/// so an uncorrelated series gives tau ~ 1/2.
double integrated_autocorrelation_time(std::span<const double> xs, double c = 5.0);

/// Pool-adjacent-violators: least-squares non-decreasing fit.
std::vector<double> isotonic_regression(std::span<const double> ys, std::span<const double> weights);

/// Linear-interpolated empirical quantile of unsorted data, q in [0, 1].
double quantile(std::vector<double> xs, double q);

/// Binomial logistic regression p(x) = 1 / (1 + exp(-(b0 + b1 x))).
struct LogisticFit {
  double intercept = 0.0;
  double slope = 0.0;
  bool converged = false;

  double logit(double x) const { return intercept + slope * x; }
  double probability(double x) const;
};

/// Maximum-likelihood fit with a weak ridge term so separable data still
/// yield finite coefficients.
LogisticFit fit_logistic(std::span<const double> x, std::span<const double> successes,
                         std::span<const double> trials, double ridge = 1e-6);

}  // namespace qspin::stats
