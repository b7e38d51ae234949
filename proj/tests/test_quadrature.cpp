#include "doctest.h"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "qspin/error.hpp"
#include "qspin/quadrature.hpp"

using namespace qspin;
using doctest::Approx;

TEST_CASE("gauss-legendre is exact for polynomials of degree 2n-1") {
  for (std::size_t n : {1u, 2u, 5u, 16u, 64u}) {
    const auto rule = quad::gauss_legendre(n);
    REQUIRE(rule.nodes.size() == n);
    for (std::size_t deg = 0; deg < 2 * n; ++deg) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += rule.weights[i] * std::pow(rule.nodes[i], static_cast<double>(deg));
      const double exact = deg % 2 ? 0.0 : 2.0 / (deg + 1.0);
      CAPTURE(n);
      CAPTURE(deg);
      CHECK(s == Approx(exact).epsilon(1e-13).scale(1.0));
    }
  }
}

TEST_CASE("adaptive integration of closed forms") {
  CHECK(quad::integrate([](double x) { return std::exp(x); }, 0.0, 1.0, 1e-14).value == Approx(M_E - 1.0).epsilon(1e-14));
  CHECK(quad::integrate([](double x) { return std::sqrt(x); }, 0.0, 1.0, 1e-13).value ==
        Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(quad::integrate([](double x) { return std::log(x); }, 0.0, 1.0, 1e-12).value == Approx(-1.0).epsilon(1e-10));
  CHECK(quad::integrate([](double x) { return std::exp(-x * x); }, -10.0, 10.0, 1e-14).value ==
        Approx(std::sqrt(M_PI)).epsilon(1e-14));
}

TEST_CASE("agrees with an independent Gauss-Kronrod implementation") {
  auto f = [](double t) { return std::exp(-(t * t * t * t - 2.0 * t * t)) * std::pow(t + 0.7, 4); };
  const double ours = quad::integrate(f, -4.0, 4.0, 1e-13, 1e-14).value;
  const double theirs = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -4.0, 4.0, 15, 1e-15);
  CHECK(ours == Approx(theirs).epsilon(1e-12));
}

TEST_CASE("work cap raises a convergence error") {
  CHECK_THROWS_AS(quad::integrate([](double x) { return std::sin(1.0 / x); }, 1e-9, 1.0, 1e-15, 0.0, 10),
                  ConvergenceError);
}
