#include "doctest.h"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <vector>

#include "json.hpp"

#include "qspin/error.hpp"
#include "qspin/harness.hpp"
#include "qspin/wells.hpp"

using namespace qspin;
using doctest::Approx;

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 61>;

GilbertGraph make_graph(std::vector<Vec> pts, double r = 1.0) {
  PointConfiguration pc;
  pc.window = BoxWindow{2, 10.0, BoundaryMode::free};
  pc.points = std::move(pts);
  return build_graph(pc, r);
}

VertexMask first_k(std::size_t n, std::size_t k) {
  VertexMask m(n, 0);
  for (std::size_t i = 0; i < k; ++i) m[i] = 1;
  return m;
}

InteractionProfile constant(double phi) {
  InteractionProfile p;
  p.phi_star = phi;
  return p;
}

std::vector<SingleSpinMeasure> variants() {
  return {SingleSpinMeasure::ising(), SingleSpinMeasure::uniform(1.0), SingleSpinMeasure::parse("double-well")};
}

// Root of erfc(a) = erf(a / sqrt 2), i.e. 1 - Phi(a sqrt2) = Phi(a) - 1/2.
double gaussian_root() {
  double lo = 0.0, hi = 2.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (std::erfc(mid) > std::erf(mid / std::sqrt(2.0))) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("wells condition examples") {
  for (const auto& m : variants()) CHECK(wells_condition_holds(m, 1e-9));
  CHECK(wells_condition_holds(SingleSpinMeasure::gaussian(), 1e-9));
  CHECK_FALSE(wells_condition_holds(SingleSpinMeasure::ising(), 1.2));
  const double a = std::sqrt(2.0) - 1.0;
  const auto masses = wells_masses(SingleSpinMeasure::uniform(1.0), a);
  CHECK(masses.tail == Approx((1.0 - a * std::sqrt(2.0)) / 2.0).epsilon(1e-14));
  CHECK(masses.interval == Approx(a / 2.0).epsilon(1e-14));
  CHECK(masses.tail == Approx(masses.interval).epsilon(1e-13));
  // Closed intervals: at a = 1 the atom at 1 counts in [0, a] but a sqrt2 > 1.
  const auto im = wells_masses(SingleSpinMeasure::ising(), 1.0);
  CHECK(im.tail == 0.0);
  CHECK(im.interval == 0.5);
  const auto below = wells_masses(SingleSpinMeasure::ising(), 0.7);
  CHECK(below.tail == 0.5);
  CHECK(below.interval == 0.0);
}

TEST_CASE("masses are monotone in a for densities") {
  for (const auto& m : {SingleSpinMeasure::uniform(1.0), SingleSpinMeasure::parse("double-well"),
                        SingleSpinMeasure::gaussian()}) {
    double prev_tail = INFINITY, prev_int = -1.0;
    for (double a = 0.02; a < 1.2; a += 0.05) {
      const auto w = wells_masses(m, a);
      CHECK(w.tail <= prev_tail);
      CHECK(w.interval >= prev_int);
      prev_tail = w.tail;
      prev_int = w.interval;
    }
  }
}

TEST_CASE("find_a") {
  const auto u = find_a(SingleSpinMeasure::uniform(1.0));
  CHECK(u.attained);
  CHECK(std::fabs(u.a - (std::sqrt(2.0) - 1.0)) <= 1e-10);
  const auto g = find_a(SingleSpinMeasure::gaussian());
  CHECK(std::fabs(g.a - gaussian_root()) <= 1e-9);
  CHECK(g.a == Approx(0.5625671452503554).epsilon(1e-9));
  // The root depends on the scale only through a / sd.
  CHECK(find_a(SingleSpinMeasure::gaussian(4.0)).a == Approx(2.0 * g.a).epsilon(1e-9));
  const auto i = find_a(SingleSpinMeasure::ising());
  CHECK(i.a == 1.0);
  CHECK_FALSE(i.attained);
  CHECK(i.usable() == Approx(1.0 - 1e-6));
  CHECK(wells_condition_holds(SingleSpinMeasure::ising(), i.usable()));
  const auto dw = find_a(SingleSpinMeasure::parse("double-well"));
  CHECK(wells_condition_holds(SingleSpinMeasure::parse("double-well"), dw.a * (1 - 1e-9)));
  CHECK_FALSE(wells_condition_holds(SingleSpinMeasure::parse("double-well"), dw.a * (1 + 1e-6)));
}

TEST_CASE("one-site integral examples") {
  for (const auto& m : variants())
    for (int p = 0; p <= 8; ++p)
      for (int q = 0; q <= 8; ++q) {
        if ((p + q) % 2 == 0) continue;
        CHECK(std::fabs(one_site_integral(m, 0.4, p, q)) <= 1e-10);
      }
  CHECK(one_site_integral(SingleSpinMeasure::ising(), 1.0, 1, 1) == 0.0);
  CHECK(one_site_integral(SingleSpinMeasure::uniform(1.0), 0.4, 1, 1) == Approx(2.0 * (1.0 / 3.0 - 0.16)).epsilon(1e-12));
  for (int p = 0; p <= 6; ++p)
    for (int q = 0; q <= 6; ++q)
      CHECK(one_site_integral(SingleSpinMeasure::parse("double-well"), 0.7, p, q) ==
            one_site_integral(SingleSpinMeasure::parse("double-well"), 0.7, q, p));
}

TEST_CASE("one-site integral against an independent quadrature") {
  const auto m = SingleSpinMeasure::parse("double-well");
  const double a = 0.6;
  auto rho = [](double t) { return std::exp(-(t * t * t * t - 2.0 * t * t)); };
  const double z = GK::integrate(rho, -6.0, 6.0, 15, 1e-15);
  for (auto [p, q] : {std::pair{3, 1}, {2, 2}, {5, 3}, {4, 0}}) {
    auto f = [&](double t) {
      return (std::pow(t + a, p) * std::pow(t - a, q) + std::pow(t - a, p) * std::pow(t + a, q)) * rho(t);
    };
    CHECK(one_site_integral(m, a, p, q) == Approx(GK::integrate(f, -6.0, 6.0, 15, 1e-15) / z).epsilon(1e-10));
  }
}

TEST_CASE("odd-odd split adds up to the integral") {
  for (const auto& m : variants()) {
    const double a = find_a(m).usable();
    for (auto [p, q] : {std::pair{1, 1}, {3, 1}, {5, 1}, {5, 3}, {7, 5}}) {
      const auto s = odd_odd_split(m, a, p, q);
      CHECK(2.0 * (s.i1 + s.i2 + s.i3) == Approx(one_site_integral(m, a, p, q)).epsilon(1e-9).scale(1.0));
      CHECK(s.i2 >= -1e-12);
      CHECK(s.i1 >= s.i1_lower - 1e-12);
      CHECK(s.i3 >= s.i3_lower - 1e-12);
    }
  }
}

TEST_CASE("positivity certificates") {
  const auto c = verify_one_site_positivity(SingleSpinMeasure::ising(), 0.5, 8);
  CHECK(c.all_nonnegative);
  CHECK(c.condition_holds);
  for (const auto& m : variants()) {
    const auto cert = verify_one_site_positivity(m, find_a(m).usable(), 8);
    CAPTURE(m.describe());
    CHECK(cert.all_nonnegative);
    CHECK(cert.condition_holds);
    CHECK(cert.failures.empty());
  }
  const auto bad = verify_one_site_positivity(SingleSpinMeasure::ising(), 1.5, 4);
  CHECK_FALSE(bad.condition_holds);
  const auto j = nlohmann::json::parse(certificate_json(c));
  for (const char* key : {"measure", "a", "M", "min_integral", "all_nonnegative", "failures"}) CHECK(j.contains(key));
}

TEST_CASE("finite-volume comparison examples") {
  const auto g = make_graph({{0, 0, 0}, {0.5, 0, 0}, {-0.5, 0, 0}, {1.0, 0, 0}});
  for (const auto& m : variants()) {
    const double a = find_a(m).usable();
    const auto hot = finite_volume_wells_check(g, first_k(4, 2), m, constant(1.0), a, 0.0);
    CHECK(hot.holds);
    for (std::size_t k = 0; k < hot.lhs.size(); ++k) {
      CHECK(std::fabs(hot.lhs[k]) <= 1e-10);
      CHECK(std::fabs(hot.rhs[k]) <= 1e-10);
    }
    const auto tiny = finite_volume_wells_check(g, first_k(4, 2), m, constant(1.0), 1e-6, 1.0);
    for (std::size_t k = 0; k < tiny.lhs.size(); ++k) {
      CHECK(tiny.lhs[k] >= -1e-8);
      CHECK(std::fabs(tiny.rhs[k]) <= 1e-5);
    }
  }
  const auto u = SingleSpinMeasure::uniform(1.0);
  for (double beta : {0.5, 1.0, 2.0}) {
    const auto c = finite_volume_wells_check(g, first_k(4, 2), u, constant(1.0), std::sqrt(2.0) - 1.0, beta);
    CHECK(c.holds);
    for (std::size_t k = 0; k < c.lhs.size(); ++k) CHECK(c.lhs[k] >= c.rhs[k] - 1e-8);
  }
}

TEST_CASE("comparison holds on random tiny instances") {
  for (const auto& m : variants()) {
    const double a = find_a(m).usable();
    for (std::uint64_t n = 0; n < 20; ++n) {
      const auto inst = random_tiny_instance(11, n);
      const auto c = finite_volume_wells_check(inst.graph, inst.interior, m, inst.profile, a, inst.beta);
      CAPTURE(m.describe());
      CAPTURE(n);
      CHECK(c.holds);
    }
  }
}

TEST_CASE("one-site series expansion reproduces the comparison") {
  const auto g = make_graph({{0, 0, 0}, {0.5, 0, 0}, {-0.5, 0, 0}});
  const auto p = constant(0.7);
  for (const auto& m : variants()) {
    const double a = find_a(m).usable();
    for (double beta : {0.2, 0.8, 1.5}) {
      const auto c = finite_volume_wells_check(g, first_k(3, 1), m, p, a, beta);
      const double K = beta * a * 2.0 * 0.7;
      const double series = single_site_series_difference(m, a, K);
      CAPTURE(m.describe());
      CAPTURE(beta);
      CHECK(std::fabs(series - (c.lhs[0] - c.rhs[0])) <= 10.0 * 1e-8);
    }
  }
}
