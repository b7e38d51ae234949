#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "qspin/spinsystem.hpp"

namespace qspin {

/// chi([a sqrt2, inf)) and chi([0, a]) for the normalized measure.
struct WellsMasses {
  double tail = 0.0;
  double interval = 0.0;
};

WellsMasses wells_masses(const SingleSpinMeasure& measure, double a, double tol = 1e-12);

/// chi([a sqrt2, inf)) >= chi([0, a]), with `tol` slack.
bool wells_condition_holds(const SingleSpinMeasure& measure, double a, double tol = 1e-12);

struct FeasibleA {
  double a = 0.0;
  /// False when the supremum itself violates the condition (atomic chi).
  bool attained = true;
  /// The value to use downstream: a itself, or a (1 - 1e-6) if not attained.
  double usable() const { return attained ? a : a * (1.0 - 1e-6); }
};

/// Supremum of the feasible set of the Wells condition: bisection for
/// densities, breakpoint analysis for atomic chi. Absolute accuracy `tol`.
FeasibleA find_a(const SingleSpinMeasure& measure, double tol = 1e-12);

/// int [(s + a)^m (s - a)^n + (s - a)^m (s + a)^n] chi(ds).
double one_site_integral(const SingleSpinMeasure& measure, double a, int m, int n, double tol = 1e-12);

/// Odd-odd case m = 2k+1, n = 2l+1 (k >= l) split over [0, a], (a, a sqrt2)
/// and [a sqrt2, inf) of (s^2 - a^2)^{2l+1} psi(s) chi(ds), with
/// psi(s) = (s + a)^{2(k-l)} + (s - a)^{2(k-l)}.
struct OddOddSplit {
  int m = 0, n = 0;
  double i1 = 0.0, i2 = 0.0, i3 = 0.0;
  double i1_lower = 0.0;  // -a^{4l+2} psi(a) chi([0, a])
  double i3_lower = 0.0;  // a^{4l+2} psi(a sqrt2) chi([a sqrt2, inf))
};

OddOddSplit odd_odd_split(const SingleSpinMeasure& measure, double a, int m, int n, double tol = 1e-12);

struct WellsFailure {
  int m = 0, n = 0;
  double value = 0.0;
  std::string kind;  // "integral", "I2", "I1+I3", "I1-bound", "I3-bound"
};

struct WellsCertificate {
  SingleSpinMeasure measure;
  double a = 0.0;
  int max_exponent = 0;
  double min_integral = 0.0;
  bool all_nonnegative = true;
  bool condition_holds = false;
  std::vector<WellsFailure> failures;
};

/// Checks one_site_integral(m, n) >= -tol * max(1, int |integrand|) for all
/// 0 <= m, n <= M, and the sign pieces of the odd-odd split. Failures are
/// recorded, never thrown.
WellsCertificate verify_one_site_positivity(const SingleSpinMeasure& measure, double a, int max_exponent,
                                            double tol = 1e-10);

struct WellsComparison {
  std::vector<VertexId> vertices;
  std::vector<double> lhs;  // <sigma_x> under chi, boundary +a, beta
  std::vector<double> rhs;  // a <sigma_x> Ising, couplings a^2 phi, boundary +1, beta
  bool holds = true;
};

/// Finite-volume comparison lhs >= rhs - tol at every interior site, both
/// sides by exact oracles (<= 3 interior sites).
WellsComparison finite_volume_wells_check(const GilbertGraph& graph, const VertexMask& interior,
                                          const SingleSpinMeasure& measure, const InteractionProfile& profile,
                                          double a, double beta, double tol = 1e-8);

/// One interior site with boundary field K = beta a sum(phi): lhs - rhs of
/// the comparison expanded as sum_m K^m / m! * one_site_integral(m, 1) / 2,
/// over Z(K) cosh(a K).
double single_site_series_difference(const SingleSpinMeasure& measure, double a, double field, double tol = 1e-12);

std::string certificate_json(const WellsCertificate& certificate);

}  // namespace qspin
