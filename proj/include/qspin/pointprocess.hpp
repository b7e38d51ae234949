#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace qspin {

/// Coordinates of a point; the third entry is unused (0) when dim == 2.
using Vec = std::array<double, 3>;

enum class BoundaryMode { free, torus };

std::string to_string(BoundaryMode mode);
BoundaryMode parse_boundary_mode(const std::string& text);

/// Origin-centered box [-side/2, side/2]^dim.
struct BoxWindow {
  int dim = 2;
  double side = 1.0;
  BoundaryMode boundary = BoundaryMode::free;

  double volume() const;
  bool contains(const Vec& x) const;
  void validate() const;
};

/// Displacement y - x, reduced to the minimal image on a torus window.
Vec displacement(const BoxWindow& window, const Vec& x, const Vec& y);
double squared_distance(const BoxWindow& window, const Vec& x, const Vec& y);
double norm(const Vec& x, int dim);

struct PointConfiguration {
  BoxWindow window;
  std::vector<Vec> points;
  double intensity = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return points.size(); }
};

/// Homogeneous Poisson configuration of intensity lambda in the window.
/// Deterministic in (lambda, window, seed, replicate).
PointConfiguration sample_poisson(double lambda, const BoxWindow& window, std::uint64_t seed,
                                  std::uint64_t replicate = 0);

/// Volume of the closed d-ball of radius r (d = 2 or 3).
double ball_volume(int dim, double r);

/// Expected number of isolated points of a Poisson configuration on a torus
/// window, lambda L^d exp(-lambda V(r_star)). Exact by the Mecke formula.
double expected_isolated_count(double lambda, double r_star, const BoxWindow& window);

/// e^{-kappa} sum_{k>=1} k^theta kappa^k / k!, summed until the terms fall
/// below truncation_tol (past the mode).
double poisson_weighted_moment(double theta_exp, double kappa, double truncation_tol = 1e-15);

/// Point CSV: `# key=value` header lines then one row per point.
void write_points_csv(std::ostream& out, const PointConfiguration& config);
PointConfiguration read_points_csv(std::istream& in);

/// Shortest decimal that parses back to the same double.
std::string format_double(double value);

}  // namespace qspin
