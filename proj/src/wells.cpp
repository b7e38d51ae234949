#include "qspin/wells.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "json.hpp"
#include "qspin/error.hpp"
#include "qspin/quadrature.hpp"

namespace qspin {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

double ipow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

// Positive atoms of an atomic chi (weight each), mirrored by symmetry.
constexpr double kIsingAtom = 1.0;
constexpr double kIsingWeight = 0.5;

// Normalizing constant of the density on the half line, shifted by the peak.
double half_line_mass(const SingleSpinMeasure& measure, double tol) {
  const double peak = measure.log_density_peak();
  auto rho = [&](double t) { return std::exp(-measure.potential(t) - peak); };
  return quad::integrate(rho, 0.0, measure.support_limit(), tol, 1e-14).value;
}

// Upper integration limit for int f(t) rho(t) dt when |f| grows at most
// like (t + a + 1)^degree.
double weighted_limit(const SingleSpinMeasure& measure, int degree, double a) {
  if (measure.kind == MeasureKind::uniform_interval) return measure.half_width;
  auto h = [&](double t) { return -measure.potential(t) + degree * std::log(t + a + 1.0); };
  double hi = measure.support_limit();
  double hmax = -std::numeric_limits<double>::infinity();
  for (int s = 0; s <= 2000; ++s) hmax = std::max(hmax, h(hi * s / 2000.0));
  while (h(hi) > hmax - 45.0 || h(1.01 * hi) > h(hi)) hi *= 1.1;
  return hi;
}

// int over [lo, hi] (subset of [0, inf)) of f d(chi), closedness only
// matters for atoms.
double half_line_integral(const SingleSpinMeasure& measure, const std::function<double(double)>& f, double lo,
                          double hi, bool lo_closed, bool hi_closed, int degree, double a, double tol) {
  switch (measure.kind) {
    case MeasureKind::ising: {
      const double t = kIsingAtom;
      const bool above = lo_closed ? t >= lo : t > lo;
      const bool below = hi_closed ? t <= hi : t < hi;
      return above && below ? kIsingWeight * f(t) : 0.0;
    }
    case MeasureKind::uniform_interval: {
      const double b = measure.half_width;
      const double top = std::min(hi, b);
      if (!(top > lo)) return 0.0;
      return quad::integrate(f, lo, top, tol * 2.0 * b, 1e-14).value / (2.0 * b);
    }
    case MeasureKind::gibbs_density: {
      const double peak = measure.log_density_peak();
      const double top = std::min(hi, weighted_limit(measure, degree, a));
      if (!(top > lo)) return 0.0;
      const double z = 2.0 * half_line_mass(measure, 1e-15);
      auto g = [&](double t) { return f(t) * std::exp(-measure.potential(t) - peak); };
      return quad::integrate(g, lo, top, tol * z, 1e-14).value / z;
    }
  }
  return 0.0;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

WellsMasses wells_masses(const SingleSpinMeasure& measure, double a, double tol) {
  if (!(a > 0.0)) throw InvalidParameter("a must be positive");
  measure.validate();
  auto one = [](double) { return 1.0; };
  WellsMasses m;
  if (measure.kind == MeasureKind::uniform_interval) {
    const double b = measure.half_width;
    m.tail = std::max(0.0, b - a * kSqrt2) / (2.0 * b);
    m.interval = std::min(a, b) / (2.0 * b);
    return m;
  }
  m.tail = half_line_integral(measure, one, a * kSqrt2, kInf, true, true, 0, a, tol);
  m.interval = half_line_integral(measure, one, 0.0, a, true, true, 0, a, tol);
  return m;
}

bool wells_condition_holds(const SingleSpinMeasure& measure, double a, double tol) {
  const auto m = wells_masses(measure, a, tol);
  return m.tail >= m.interval - tol;
}

FeasibleA find_a(const SingleSpinMeasure& measure, double tol) {
  measure.validate();
  if (!(tol > 0.0)) throw InvalidParameter("tolerance must be positive");
  if (measure.kind == MeasureKind::ising) {
    // Feasibility is piecewise constant between the breakpoints t and
    // t / sqrt2 of each positive atom t; scan pieces from the right.
    const std::vector<double> breaks{kIsingAtom / kSqrt2, kIsingAtom};
    auto holds = [&](double a) {
      const double tail = kIsingAtom >= a * kSqrt2 ? kIsingWeight : 0.0;
      const double interval = kIsingAtom <= a ? kIsingWeight : 0.0;
      return tail >= interval;
    };
    if (holds(2.0 * breaks.back())) throw InvalidParameter("feasible set of the Wells condition is unbounded");
    for (std::size_t i = breaks.size(); i-- > 0;) {
      if (holds(breaks[i])) return {breaks[i], true};
      const double left = i == 0 ? 0.0 : breaks[i - 1];
      if (holds(0.5 * (left + breaks[i]))) return {breaks[i], false};
    }
    throw InvalidParameter("Wells condition has no feasible a");
  }
  double lo = 0.0;
  double hi = measure.support_limit();
  const double tiny = std::min(tol, 1e-3 * hi);
  if (!wells_condition_holds(measure, tiny, 0.0)) throw InvalidParameter("Wells condition has no feasible a");
  lo = tiny;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (wells_condition_holds(measure, mid, 0.0) ? lo : hi) = mid;
  }
  return {lo, true};
}

double one_site_integral(const SingleSpinMeasure& measure, double a, int m, int n, double tol) {
  if (m < 0 || n < 0) throw InvalidParameter("exponents must be nonnegative");
  measure.validate();
  auto g = [&](double s) {
    const double p = s + a, q = s - a;
    return ipow(p, m) * ipow(q, n) + ipow(q, m) * ipow(p, n);
  };
  // Symmetric chi: integrate g(s) + g(-s) over the half line. For mixed
  // parity the two terms cancel exactly in floating point.
  auto sym = [&](double s) { return g(s) + g(-s); };
  if (measure.kind == MeasureKind::ising) return kIsingWeight * (g(kIsingAtom) + g(-kIsingAtom));
  return half_line_integral(measure, sym, 0.0, kInf, true, true, m + n, a, tol);
}

namespace {

double one_site_abs_integral(const SingleSpinMeasure& measure, double a, int m, int n) {
  auto g = [&](double s) {
    const double p = s + a, q = s - a;
    return std::fabs(ipow(p, m) * ipow(q, n)) + std::fabs(ipow(q, m) * ipow(p, n));
  };
  if (measure.kind == MeasureKind::ising) return kIsingWeight * (g(kIsingAtom) + g(-kIsingAtom));
  return half_line_integral(measure, [&](double s) { return g(s) + g(-s); }, 0.0, kInf, true, true, m + n, a, 1e-12);
}

}  // namespace

OddOddSplit odd_odd_split(const SingleSpinMeasure& measure, double a, int m, int n, double tol) {
  if (m < 0 || n < 0 || m % 2 == 0 || n % 2 == 0) throw InvalidParameter("odd_odd_split needs odd exponents");
  const int k = (std::max(m, n) - 1) / 2;
  const int l = (std::min(m, n) - 1) / 2;
  auto psi = [&](double s) { return ipow(s + a, 2 * (k - l)) + ipow(s - a, 2 * (k - l)); };
  auto f = [&](double s) { return ipow(s * s - a * a, 2 * l + 1) * psi(s); };
  const int degree = m + n;
  OddOddSplit out;
  out.m = m;
  out.n = n;
  out.i1 = half_line_integral(measure, f, 0.0, a, true, true, degree, a, tol);
  out.i2 = half_line_integral(measure, f, a, a * kSqrt2, false, false, degree, a, tol);
  out.i3 = half_line_integral(measure, f, a * kSqrt2, kInf, true, true, degree, a, tol);
  const auto masses = wells_masses(measure, a, tol);
  const double a_pow = ipow(a, 4 * l + 2);
  out.i1_lower = -a_pow * psi(a) * masses.interval;
  out.i3_lower = a_pow * psi(a * kSqrt2) * masses.tail;
  return out;
}

WellsCertificate verify_one_site_positivity(const SingleSpinMeasure& measure, double a, int max_exponent, double tol) {
  if (max_exponent < 0) throw InvalidParameter("max exponent must be nonnegative");
  WellsCertificate cert;
  cert.measure = measure;
  cert.a = a;
  cert.max_exponent = max_exponent;
  cert.condition_holds = wells_condition_holds(measure, a, tol);
  cert.min_integral = kInf;
  for (int m = 0; m <= max_exponent; ++m)
    for (int n = 0; n <= max_exponent; ++n) {
      const double value = one_site_integral(measure, a, m, n, tol);
      const double slack = tol * std::max(1.0, one_site_abs_integral(measure, a, m, n));
      cert.min_integral = std::min(cert.min_integral, value);
      if (value < -slack) {
        cert.all_nonnegative = false;
        cert.failures.push_back({m, n, value, "integral"});
      }
      if (m % 2 == 1 && n % 2 == 1 && m >= n) {
        const auto split = odd_odd_split(measure, a, m, n, tol);
        if (split.i2 < -slack) cert.failures.push_back({m, n, split.i2, "I2"});
        if (split.i1 + split.i3 < -slack) cert.failures.push_back({m, n, split.i1 + split.i3, "I1+I3"});
        if (split.i1 < split.i1_lower - slack) cert.failures.push_back({m, n, split.i1 - split.i1_lower, "I1-bound"});
        if (split.i3 < split.i3_lower - slack) cert.failures.push_back({m, n, split.i3 - split.i3_lower, "I3-bound"});
      }
    }
  return cert;
}

WellsComparison finite_volume_wells_check(const GilbertGraph& graph, const VertexMask& interior,
                                          const SingleSpinMeasure& measure, const InteractionProfile& profile,
                                          double a, double beta, double tol) {
  if (!(a > 0.0)) throw InvalidParameter("a must be positive");
  const auto general = quadrature_marginals(graph, interior, measure, profile, beta, a);
  const auto ising = exact_enumeration_ising(graph, interior, profile.scaled(a * a), beta, 1.0);
  WellsComparison out;
  out.vertices = general.vertices;
  out.lhs = general.means;
  for (std::size_t i = 0; i < ising.means.size(); ++i) {
    out.rhs.push_back(a * ising.means[i]);
    if (out.lhs[i] < out.rhs[i] - tol) out.holds = false;
  }
  return out;
}

double single_site_series_difference(const SingleSpinMeasure& measure, double a, double field, double tol) {
  const double K = field;
  double numerator = 0.0;
  for (int m = 1; m < 400; m += 2) {  // even m: mixed parity with n = 1, zero
    const double coef = std::exp(m * std::log(std::fabs(K)) - std::lgamma(m + 1.0)) * (K < 0 ? -1.0 : 1.0);
    if (K == 0.0) break;
    const double term = coef * 0.5 * one_site_integral(measure, a, m, 1, tol);
    numerator += term;
    if (m > 2.0 * std::fabs(K) + 10.0 && std::fabs(term) <= 1e-17 * std::max(1e-300, std::fabs(numerator))) break;
  }
  double z = 0.0;
  switch (measure.kind) {
    case MeasureKind::ising:
      z = std::cosh(K);
      break;
    case MeasureKind::uniform_interval: {
      const double kb = K * measure.half_width;
      z = kb == 0.0 ? 1.0 : std::sinh(kb) / kb;
      break;
    }
    case MeasureKind::gibbs_density:
      z = half_line_integral(measure, [&](double s) { return std::cosh(K * s); }, 0.0, kInf, true, true, 60, a, tol) *
          2.0;
      break;
  }
  return numerator / (z * std::cosh(a * K));
}

std::string certificate_json(const WellsCertificate& c) {
  nlohmann::ordered_json j;
  j["measure"] = c.measure.describe();
  j["a"] = c.a;
  j["M"] = c.max_exponent;
  j["min_integral"] = c.min_integral;
  j["all_nonnegative"] = c.all_nonnegative;
  j["condition_holds"] = c.condition_holds;
  auto failures = nlohmann::ordered_json::array();
  auto decomposition = nlohmann::ordered_json::array();
  for (const auto& f : c.failures) {
    if (f.kind == "integral") failures.push_back({f.m, f.n, f.value});
    else decomposition.push_back({{"m", f.m}, {"n", f.n}, {"kind", f.kind}, {"value", f.value}});
  }
  j["failures"] = failures;
  j["decomposition_failures"] = decomposition;
  return j.dump(2) + "\n";
}

}  // namespace qspin
