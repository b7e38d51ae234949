#include "qspin/pointprocess.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "qspin/error.hpp"
#include "qspin/rng.hpp"

namespace qspin {

std::string to_string(BoundaryMode mode) { return mode == BoundaryMode::torus ? "torus" : "free"; }

BoundaryMode parse_boundary_mode(const std::string& text) {
  if (text == "free") return BoundaryMode::free;
  if (text == "torus") return BoundaryMode::torus;
  throw InvalidParameter("unknown boundary mode '" + text + "'");
}

double BoxWindow::volume() const { return std::pow(side, dim); }

bool BoxWindow::contains(const Vec& x) const {
  const double h = 0.5 * side;
  for (int k = 0; k < dim; ++k)
    if (x[k] < -h || x[k] > h) return false;
  return true;
}

void BoxWindow::validate() const {
  if (dim != 2 && dim != 3) throw InvalidParameter("window dimension must be 2 or 3");
  if (!(side > 0.0) || !std::isfinite(side)) throw InvalidParameter("window side must be positive");
}

Vec displacement(const BoxWindow& window, const Vec& x, const Vec& y) {
  Vec d{0.0, 0.0, 0.0};
  for (int k = 0; k < window.dim; ++k) {
    d[k] = y[k] - x[k];
    if (window.boundary == BoundaryMode::torus) d[k] -= window.side * std::nearbyint(d[k] / window.side);
  }
  return d;
}

double squared_distance(const BoxWindow& window, const Vec& x, const Vec& y) {
  const Vec d = displacement(window, x, y);
  return d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
}

double norm(const Vec& x, int dim) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) s += x[k] * x[k];
  return std::sqrt(s);
}

PointConfiguration sample_poisson(double lambda, const BoxWindow& window, std::uint64_t seed,
                                  std::uint64_t replicate) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidParameter("intensity must be positive");
  window.validate();
  Stream rng(seed, {static_cast<std::uint64_t>(Purpose::points), replicate});
  const auto count = sample_poisson_count(lambda * window.volume(), rng);
  PointConfiguration config{window, {}, lambda, seed};
  config.points.resize(count, Vec{0.0, 0.0, 0.0});
  for (auto& p : config.points)
    for (int k = 0; k < window.dim; ++k) p[k] = (rng.uniform() - 0.5) * window.side;
  return config;
}

double ball_volume(int dim, double r) {
  if (!(r >= 0.0)) throw InvalidParameter("radius must be nonnegative");
  if (dim == 2) return std::numbers::pi * r * r;
  if (dim == 3) return 4.0 / 3.0 * std::numbers::pi * r * r * r;
  throw InvalidParameter("ball_volume supports d = 2 or 3");
}

double expected_isolated_count(double lambda, double r_star, const BoxWindow& window) {
  window.validate();
  if (window.boundary != BoundaryMode::torus)
    throw Unsupported("isolated-count closed form needs a torus window (no edge effects)");
  if (!(lambda > 0.0) || !(r_star >= 0.0)) throw InvalidParameter("lambda > 0 and r_star >= 0 required");
  return lambda * window.volume() * std::exp(-lambda * ball_volume(window.dim, r_star));
}

double poisson_weighted_moment(double theta_exp, double kappa, double truncation_tol) {
  if (!(kappa > 0.0) || !(theta_exp > 0.0)) throw InvalidParameter("theta and kappa must be positive");
  if (!(truncation_tol > 0.0)) throw InvalidParameter("truncation tolerance must be positive");
  // Terms in log space: log k^theta + k log kappa - log k! - kappa.
  double sum = 0.0;
  for (std::uint64_t k = 1;; ++k) {
    const double kd = static_cast<double>(k);
    const double term = std::exp(theta_exp * std::log(kd) + kd * std::log(kappa) - std::lgamma(kd + 1.0) - kappa);
    sum += term;
    if (kd > kappa + theta_exp && term < truncation_tol) break;
    if (k > 100000000) throw ConvergenceError("poisson_weighted_moment did not converge");
  }
  return sum;
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_points_csv(std::ostream& out, const PointConfiguration& config) {
  out << "# dim=" << config.window.dim << '\n'
      << "# side=" << format_double(config.window.side) << '\n'
      << "# lambda=" << format_double(config.intensity) << '\n'
      << "# seed=" << config.seed << '\n'
      << "# boundary=" << to_string(config.window.boundary) << '\n';
  for (const auto& p : config.points) {
    for (int k = 0; k < config.window.dim; ++k) out << (k ? "," : "") << format_double(p[k]);
    out << '\n';
  }
}

namespace {

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InvalidParameter("malformed number '" + s + "'");
  return v;
}

}  // namespace

PointConfiguration read_points_csv(std::istream& in) {
  PointConfiguration config;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      const auto value = line.substr(eq + 1);
      if (key == "dim") config.window.dim = std::stoi(value);
      else if (key == "side") config.window.side = parse_double(value);
      else if (key == "lambda") config.intensity = parse_double(value);
      else if (key == "seed") config.seed = std::stoull(value);
      else if (key == "boundary") config.window.boundary = parse_boundary_mode(value);
      continue;
    }
    Vec p{0.0, 0.0, 0.0};
    std::stringstream row(line);
    std::string cell;
    int k = 0;
    while (std::getline(row, cell, ',')) {
      if (k >= 3) throw InvalidParameter("too many coordinates in point row");
      p[k++] = parse_double(cell);
    }
    if (k != config.window.dim) throw InvalidParameter("point row does not match dim header");
    config.points.push_back(p);
  }
  config.window.validate();
  return config;
}

}  // namespace qspin
