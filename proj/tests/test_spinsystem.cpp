#include "doctest.h"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <vector>

#include "qspin/error.hpp"
#include "qspin/percolation.hpp"
#include "qspin/rng.hpp"
#include "qspin/spinsystem.hpp"
#include "qspin/stats.hpp"

using namespace qspin;
using doctest::Approx;

namespace {

GilbertGraph make_graph(std::vector<Vec> pts, double r = 1.0, double side = 10.0) {
  PointConfiguration pc;
  pc.window = BoxWindow{2, side, BoundaryMode::free};
  pc.points = std::move(pts);
  return build_graph(pc, r);
}

VertexMask first_k(std::size_t n, std::size_t k) {
  VertexMask m(n, 0);
  for (std::size_t i = 0; i < k; ++i) m[i] = 1;
  return m;
}

InteractionProfile constant(double phi, double r = 1.0) {
  InteractionProfile p;
  p.phi_star = phi;
  p.r_star = r;
  return p;
}

// Ten interior sites on a 2 x 5 ladder plus four collar sites at the ends.
GilbertGraph ladder() {
  std::vector<Vec> pts;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 2; ++j) pts.push_back({0.8 * i - 1.6, 0.8 * j - 0.4, 0});
  for (double y : {-0.4, 0.4}) {
    pts.push_back({-2.4, y, 0});
    pts.push_back({2.4, y, 0});
  }
  return make_graph(pts, 0.85);
}

// Acceptance probability of the Metropolis move sigma -> target, read off
// the implementation by bisection on the acceptance uniform.
double acceptance(const SingleSpinMeasure& m, double sigma, double target, double beta, double h, double width) {
  const double u1 = 0.5 * ((target - sigma) / width + 1.0);
  double lo = 0.0, hi = 1.0;
  if (metropolis_continuous(m, sigma, beta, h, width, u1, std::nextafter(1.0, 0.0)) != sigma) return 1.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (metropolis_continuous(m, sigma, beta, h, width, u1, mid) != sigma) lo = mid;
    else hi = mid;
  }
  return hi;
}

}  // namespace

TEST_CASE("measure parsing and validation") {
  CHECK(SingleSpinMeasure::parse("ising").kind == MeasureKind::ising);
  const auto u = SingleSpinMeasure::parse("uniform:2.5");
  CHECK(u.kind == MeasureKind::uniform_interval);
  CHECK(u.half_width == 2.5);
  const auto q = SingleSpinMeasure::parse("quartic:1,-2");
  CHECK(q.v4 == 1.0);
  CHECK(q.v2 == -2.0);
  const auto dw = SingleSpinMeasure::parse("double-well");
  CHECK(dw.v4 == 1.0);
  CHECK(dw.v2 == -2.0);
  CHECK(SingleSpinMeasure::parse("gaussian").variance() == Approx(1.0).epsilon(1e-10));
  CHECK(SingleSpinMeasure::uniform(1.0).variance() == Approx(1.0 / 3.0));
  CHECK_THROWS_AS(SingleSpinMeasure::parse("cauchy"), InvalidParameter);
  CHECK_THROWS_AS(SingleSpinMeasure::quartic(0.0, -1.0).validate(), InvalidParameter);
  CHECK_THROWS_AS(SingleSpinMeasure::uniform(0.0).validate(), InvalidParameter);
  // Truncation point: density at the limit is 1e-16 of the peak.
  const double T = dw.support_limit();
  CHECK(dw.log_density(T) - dw.log_density_peak() == Approx(std::log(1e-16)).epsilon(1e-9));
}

TEST_CASE("interaction profile") {
  auto p = constant(0.7, 1.0);
  CHECK(p(0.0) == 0.7);
  CHECK(p(1.0) == 0.7);
  CHECK(p(1.0001) == 0.0);
  p.shape = InteractionProfile::Shape::linear_taper;
  CHECK(p(0.0) == Approx(1.4));
  CHECK(p(1.0) == Approx(0.7));
  CHECK(p(0.5) >= 0.7);
  CHECK(p.scaled(2.0)(0.0) == Approx(2.8));
  CHECK(parse_shape("linear-taper") == InteractionProfile::Shape::linear_taper);
  CHECK_THROWS_AS(parse_shape("gaussian"), InvalidParameter);
}

TEST_CASE("relative energy and local field examples") {
  const auto p = constant(1.0);
  const auto none = make_graph({{0, 0, 0}, {3, 0, 0}});
  CHECK(relative_energy(none, make_state(none, first_k(2, 2), 1.0, 1.0), p) == 0.0);
  CHECK(local_field(none, make_state(none, first_k(2, 2), 1.0, 1.0), p, 0) == 0.0);

  const auto pair = make_graph({{0, 0, 0}, {0.5, 0, 0}});
  CHECK(relative_energy(pair, make_state(pair, first_k(2, 2), 0.0, 1.0), p) == -1.0);
  const double a = 0.83;
  CHECK(relative_energy(pair, make_state(pair, first_k(2, 1), a, 1.0), p) == Approx(-a));
  CHECK(local_field(pair, make_state(pair, first_k(2, 2), 0.0, -1.0), p, 0) == -1.0);

  const auto three = make_graph({{0, 0, 0}, {0.5, 0, 0}, {-0.5, 0, 0}});
  const auto ps = constant(0.4);
  CHECK(local_field(three, make_state(three, first_k(3, 1), a, 1.0), ps, 0) == Approx(2.0 * a * 0.4));
}

TEST_CASE("heat bath probabilities") {
  // Threshold of the heat-bath rule, found by bisection, against e^{bh}/(2 cosh bh).
  for (double bh : {0.0, 0.3, -1.2, 4.0}) {
    double lo = 0.0, hi = 1.0;
    for (int k = 0; k < 200; ++k) {
      const double mid = 0.5 * (lo + hi);
      if (heat_bath_ising(1.0, bh, mid) > 0) lo = mid;
      else hi = mid;
    }
    CHECK(hi == Approx(std::exp(bh) / (std::exp(bh) + std::exp(-bh))).epsilon(1e-15));
  }
  CHECK(heat_bath_ising(1e6, 1.0, 0.999999) == 1.0);
  for (double u : {0.1, 0.37, 0.5 + 1e-9, 0.73})
    for (double h : {0.0, 0.2, -3.0}) CHECK(heat_bath_ising(0.7, -h, 1.0 - u) == -heat_bath_ising(0.7, h, u));
}

TEST_CASE("heat bath stationary mean for one site in a boundary field") {
  const auto g = make_graph({{0, 0, 0}, {0.5, 0, 0}, {-0.5, 0, 0}});
  const auto p = constant(0.6);
  ChainConfig cc;
  cc.beta = 0.8;
  cc.sweeps = 200000;
  cc.burn_in = 100;
  cc.seed = 4;
  const auto res = run_chain(g, first_k(3, 1), SingleSpinMeasure::ising(), p, 1.0, cc);
  const double exact = std::tanh(0.8 * 2 * 0.6);
  CHECK(std::fabs(res.m_mean - exact) <= 3.0 * res.m_se);
  const auto en = exact_enumeration_ising(g, first_k(3, 1), p, 0.8, 1.0);
  CHECK(en.means[0] == Approx(exact).epsilon(1e-14));
}

TEST_CASE("metropolis examples") {
  const auto u = SingleSpinMeasure::uniform(1.0);
  // Proposal 0.9 + 0.5 * (2 * 0.9 - 1) = 1.3 lies outside the support.
  for (double u2 : {0.0, 0.5, 0.999}) CHECK(metropolis_continuous(u, 0.9, 1.0, 5.0, 0.5, 0.9, u2) == 0.9);
  const auto dw = SingleSpinMeasure::parse("double-well");
  CHECK(metropolis_continuous(dw, 0.3, 2.0, -1.0, 0.7, 0.5, 0.9999) == 0.3);
}

TEST_CASE("metropolis detailed balance") {
  for (const auto& m : {SingleSpinMeasure::parse("double-well"), SingleSpinMeasure::uniform(1.5),
                        SingleSpinMeasure::quartic(0.5, 0.3)}) {
    const double beta = 0.9, h = 0.7, width = 1.0;
    auto pi = [&](double t) { return std::exp(beta * h * t + m.log_density(t)); };
    for (double s : {-1.2, -0.4, 0.1, 0.8})
      for (double t : {-0.9, -0.1, 0.35, 1.1}) {
        if (s == t) continue;
        const double fwd = pi(s) * acceptance(m, s, t, beta, h, width);
        const double bwd = pi(t) * acceptance(m, t, s, beta, h, width);
        CAPTURE(s);
        CAPTURE(t);
        CHECK(std::fabs(fwd - bwd) <= 1e-12 * std::max(fwd, bwd));
      }
  }
}

TEST_CASE("flip equivariance: mirrored chains give negated trajectories") {
  const auto g = build_graph(sample_poisson(2.0, BoxWindow{2, 6.0}, 12), 1.0);
  const auto interior = collar_interior(g, 1.0);
  for (const auto& m : {SingleSpinMeasure::ising(), SingleSpinMeasure::parse("double-well"),
                        SingleSpinMeasure::uniform(1.0)})
    for (auto init : {InitialState::aligned, InitialState::random}) {
      ChainConfig cc;
      cc.beta = 0.9;
      cc.sweeps = 300;
      cc.burn_in = 10;
      cc.seed = 99;
      ChainOptions opt;
      opt.init = init;
      opt.keep_trajectory = true;
      const auto plus = run_chain(g, interior, m, constant(1.0), 0.8, cc, opt);
      opt.mirrored = true;
      const auto minus = run_chain(g, interior, m, constant(1.0), -0.8, cc, opt);
      REQUIRE(plus.trajectory.size() == minus.trajectory.size());
      bool exact = true;
      for (std::size_t k = 0; k < plus.trajectory.size(); ++k)
        for (std::size_t i = 0; i < plus.trajectory[k].size(); ++i)
          exact = exact && plus.trajectory[k][i] == -minus.trajectory[k][i];
      CHECK(exact);
      CHECK(plus.m_mean == -minus.m_mean);
    }
}

TEST_CASE("beta zero gives the product measure") {
  const auto g = build_graph(sample_poisson(2.0, BoxWindow{2, 6.0}, 1), 1.0);
  const auto interior = collar_interior(g, 1.0);
  for (const auto& m : {SingleSpinMeasure::ising(), SingleSpinMeasure::uniform(1.0),
                        SingleSpinMeasure::parse("double-well")}) {
    ChainConfig cc;
    cc.beta = 0.0;
    cc.sweeps = 20000;
    cc.burn_in = 100;
    cc.proposal_width = 1.5;
    cc.seed = 5;
    ChainOptions opt;
    opt.keep_trajectory = true;
    const auto res = run_chain(g, interior, m, constant(1.0), 1.0, cc, opt);
    CHECK(std::fabs(res.m_mean) <= 3.0 * res.m_se);
    std::vector<double> sq;
    for (const auto& row : res.trajectory) sq.push_back(row[0] * row[0]);
    CHECK(std::fabs(stats::mean(sq) - m.variance()) <= 3.0 * stats::batch_means_se(sq) + 1e-12);
  }
}

TEST_CASE("ten-site Ising chain matches enumeration") {
  const auto g = ladder();
  const auto interior = first_k(g.num_vertices(), 10);
  const auto p = constant(1.0, 0.85);
  const auto exact = exact_enumeration_ising(g, interior, p, 0.5, 1.0);
  REQUIRE(exact.means.size() == 10);
  ChainConfig cc;
  cc.beta = 0.5;
  cc.sweeps = 100000;
  cc.burn_in = 1000;
  cc.seed = 2;
  const auto res = run_chain(g, interior, SingleSpinMeasure::ising(), p, 1.0, cc);
  CHECK(std::fabs(res.m_mean - stats::mean(exact.means)) <= 3.0 * res.m_se);
}

TEST_CASE("two-site quartic chain matches quadrature") {
  const auto g = make_graph({{0, 0, 0}, {0.6, 0, 0}, {-0.6, 0, 0}, {1.2, 0, 0}});
  const auto interior = first_k(4, 2);
  const auto m = SingleSpinMeasure::parse("double-well");
  const auto p = constant(0.5);
  const auto q = quadrature_marginals(g, interior, m, p, 0.7, 0.8);
  ChainConfig cc;
  cc.beta = 0.7;
  cc.sweeps = 200000;
  cc.burn_in = 1000;
  cc.proposal_width = 1.5;
  cc.seed = 8;
  const auto res = run_chain(g, interior, m, p, 0.8, cc);
  CHECK(std::fabs(res.m_mean - 0.5 * (q.means[0] + q.means[1])) <= 3.0 * res.m_se);
}

TEST_CASE("exact enumeration examples") {
  const auto p = constant(0.9);
  const auto pair = make_graph({{0, 0, 0}, {0.5, 0, 0}});
  const auto e = exact_enumeration_ising(pair, first_k(2, 2), p, 0.6, 1.0);
  CHECK(e.pairs[0][1] == Approx(std::tanh(0.6 * 0.9)).epsilon(1e-14));
  CHECK(e.means[0] == Approx(0.0).scale(1.0).epsilon(1e-15));
  const auto zero = exact_enumeration_ising(ladder(), first_k(14, 10), constant(1.0, 0.85), 0.0, 1.0);
  for (double x : zero.means) CHECK(std::fabs(x) < 1e-15);
  std::vector<Vec> many;
  for (int i = 0; i < 17; ++i) many.push_back({0.1 * i, 0, 0});
  CHECK_THROWS_AS(exact_enumeration_ising(make_graph(many), first_k(17, 17), p, 1.0, 1.0), InvalidParameter);
}

TEST_CASE("GKS monotonicity of exact means in beta and phi") {
  std::vector<Vec> pts;
  Stream rng(3, {1});
  for (int i = 0; i < 12; ++i) pts.push_back({2.4 * rng.uniform() - 1.2, 2.4 * rng.uniform() - 1.2, 0});
  for (double x : {-1.8, 1.8}) pts.push_back({x, 0, 0});
  const auto g = make_graph(pts, 1.0);
  const auto interior = first_k(g.num_vertices(), 12);
  std::vector<double> prev(12, -1.0);
  for (int k = 0; k < 10; ++k) {
    const auto e = exact_enumeration_ising(g, interior, constant(1.0), 0.1 + 0.2 * k, 1.0);
    for (int i = 0; i < 12; ++i) CHECK(e.means[i] >= prev[i]);
    prev = e.means;
  }
  prev.assign(12, -1.0);
  for (int k = 0; k < 10; ++k) {
    const auto e = exact_enumeration_ising(g, interior, constant(0.1 + 0.2 * k), 0.5, 1.0);
    for (int i = 0; i < 12; ++i) CHECK(e.means[i] >= prev[i]);
    prev = e.means;
  }
}

TEST_CASE("quadrature marginals examples and cross-oracle") {
  const auto m = SingleSpinMeasure::parse("double-well");
  const auto g = make_graph({{0, 0, 0}, {0.5, 0, 0}, {-0.5, 0, 0}, {0.5, 0.5, 0}});
  const auto p = constant(0.8);
  const auto sym = quadrature_marginals(g, first_k(4, 3), m, p, 1.3, 0.0);
  for (double x : sym.means) CHECK(std::fabs(x) <= 1e-10);
  const auto hot = quadrature_marginals(g, first_k(4, 2), m, p, 0.0, 1.0);
  for (double x : hot.means) CHECK(std::fabs(x) <= 1e-10);

  // One site, boundary field beta h = 0.8 * 0.3 * 2 from two collar vertices.
  const auto one = make_graph({{0, 0, 0}, {0.5, 0, 0}, {-0.5, 0, 0}});
  const double beta = 0.3, s = 1.0;
  const double bh = beta * 2 * 0.8 * s;
  const auto q = quadrature_marginals(one, first_k(3, 1), m, p, beta, s);
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  auto w = [&](double t) { return std::exp(bh * t - (t * t * t * t - 2 * t * t)); };
  const double num = GK::integrate([&](double t) { return t * w(t); }, -6.0, 6.0, 15, 1e-15);
  const double den = GK::integrate(w, -6.0, 6.0, 15, 1e-15);
  CHECK(q.means[0] == Approx(num / den).epsilon(1e-10));

  // Ising sites are summed exactly.
  const auto iq = quadrature_marginals(one, first_k(3, 1), SingleSpinMeasure::ising(), p, beta, s);
  CHECK(iq.means[0] == Approx(std::tanh(bh)).epsilon(1e-14));
}

TEST_CASE("moment condition") {
  const auto ising = check_moment_condition(SingleSpinMeasure::ising(), 3.0, 0.7);
  CHECK(ising.finite);
  CHECK(ising.value == Approx(std::exp(0.7)));
  const auto quartic = SingleSpinMeasure::quartic(1.0, 0.0);
  const auto ok = check_moment_condition(quartic, 3.0, 0.1);
  CHECK(ok.finite);
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double z = GK::integrate([](double t) { return std::exp(-t * t * t * t); }, -8.0, 8.0, 15, 1e-15);
  const double num =
      GK::integrate([](double t) { return std::exp(0.1 * std::pow(std::fabs(t), 3) - t * t * t * t); }, -8.0, 8.0, 15,
                    1e-15);
  CHECK(ok.value == Approx(num / z).epsilon(1e-9));
  CHECK_FALSE(check_moment_condition(quartic, 5.0, 0.01).finite);
  CHECK(check_moment_condition(SingleSpinMeasure::uniform(1.0), 3.0, 1.0).finite);
  CHECK_THROWS_AS(check_moment_condition(quartic, 2.0, 1.0), InvalidParameter);
}

TEST_CASE("temperedness and magnetization") {
  const auto g = make_graph({{0, 0, 0}, {3, 0, 0}});
  auto st = make_state(g, first_k(2, 2), 1.0, 0.0);
  CHECK(temperedness(g, st, 1.0) == 0.0);
  auto one = make_state(g, first_k(2, 1), 1.0, 2.0);
  CHECK(temperedness(g, one, 1.0) == 4.0);
  st = make_state(g, first_k(2, 2), 1.0, 1.5);
  double prev = INFINITY;
  for (double alpha : {0.1, 0.5, 1.0, 3.0}) {
    const double t = temperedness(g, st, alpha);
    CHECK(t <= prev);
    prev = t;
  }
  CHECK(magnetization(make_state(g, first_k(2, 2), 1.0, 1.0), {0, 1}) == 1.0);
  st.sigma = {1.0, -1.0};
  CHECK(magnetization(st, {0, 1}) == 0.0);
  CHECK_THROWS_AS(magnetization(st, {}), InvalidParameter);
}

TEST_CASE("deep subcritical magnetization matches the component enumeration") {
  const auto g = build_graph(sample_poisson(0.5 / M_PI, BoxWindow{2, 24.0}, 31), 1.0);
  const auto interior = collar_interior(g, 1.0);
  const auto subset = central_subset(g, interior);
  REQUIRE_FALSE(subset.empty());
  const auto lab = connected_components(g);
  const auto comp = lab.labels[subset.front()];
  VertexMask mask(g.num_vertices(), 0);
  for (VertexId v = 0; v < g.num_vertices(); ++v) mask[v] = interior[v] && lab.labels[v] == comp;
  const auto exact = exact_enumeration_ising(g, mask, constant(1.0), 1.0, 1.0);
  double target = 0.0;
  for (VertexId v : subset)
    for (std::size_t k = 0; k < exact.vertices.size(); ++k)
      if (exact.vertices[k] == v) target += exact.means[k];
  target /= static_cast<double>(subset.size());
  ChainConfig cc;
  cc.beta = 1.0;
  cc.sweeps = 40000;
  cc.burn_in = 200;
  cc.seed = 6;
  ChainOptions opt;
  opt.subset = subset;
  const auto res = run_chain(g, interior, SingleSpinMeasure::ising(), constant(1.0), 1.0, cc, opt);
  CHECK(std::fabs(res.m_mean - target) <= 3.0 * res.m_se + 1e-12);
  CHECK(std::fabs(res.m_mean) < 0.5);
}

TEST_CASE("chain bookkeeping") {
  const auto g = ladder();
  ChainConfig cc;
  cc.beta = 0.4;
  cc.sweeps = 1000;
  cc.burn_in = 100;
  cc.thin = 3;
  cc.seed = 1;
  const auto res = run_chain(g, first_k(14, 10), SingleSpinMeasure::ising(), constant(1.0, 0.85), 1.0, cc);
  CHECK(res.sweep.size() == 300);
  CHECK(res.sweep.front() == 103);
  CHECK(res.magnetization.size() == res.energy.size());
  const auto again = run_chain(g, first_k(14, 10), SingleSpinMeasure::ising(), constant(1.0, 0.85), 1.0, cc);
  CHECK(again.magnetization == res.magnetization);
  cc.burn_in = 1000;
  CHECK_THROWS_AS(cc.validate(), InvalidParameter);
}
