#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "qspin/geomgraph.hpp"

namespace qspin {

/// Connected components with canonical labels: labels[v] is the smallest
/// vertex index in v's component. sizes[label] is the component size (0 at
/// indices that are not a label).
struct ComponentLabeling {
  std::vector<VertexId> labels;
  std::vector<std::size_t> sizes;
  std::size_t num_components = 0;
  VertexId largest_label = 0;
  double largest_fraction = 0.0;
  /// Per axis: some component spans face to face (free window) or winds
  /// around the torus (torus window).
  std::array<bool, 3> spanning{false, false, false};
};

ComponentLabeling connected_components(const GilbertGraph& graph);

/// Face-to-face crossing along `axis`: one component has a vertex within
/// r_star of the low face and one within r_star of the high face. Free
/// windows only.
bool spans(const GilbertGraph& graph, const ComponentLabeling& labeling, int axis);

/// Torus analogue of spans(): some component contains a cycle with nonzero
/// winding number along `axis`.
bool wraps(const GilbertGraph& graph, const ComponentLabeling& labeling, int axis);

/// Keeps edge {i, j} iff U(seed, replicate, i, j) < q. The uniform attached
/// to an edge does not depend on q, so thinnings at q1 <= q2 are nested.
GilbertGraph bernoulli_thin(const GilbertGraph& graph, double q, std::uint64_t seed,
                            std::uint64_t replicate = 0);

/// The per-edge uniform used by bernoulli_thin.
double edge_uniform(std::uint64_t seed, std::uint64_t replicate, VertexId i, VertexId j);

struct CurvePoint {
  double side = 0.0;
  double param = 0.0;
  std::size_t spanning_count = 0;
  std::size_t replicates = 0;
  double spanning_prob = 0.0;
  double se = 0.0;
  /// Spanning probability after monotone (isotonic) regression in param.
  double monotone_prob = 0.0;
};

struct ThresholdEstimate {
  std::string parameter_name;  // "lambda" or "q"
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<double> pair_crossings;  // consecutive size pairs
  std::vector<CurvePoint> curves;
  std::vector<double> sizes;
  std::vector<double> grid;
  std::uint64_t seed = 0;
  std::size_t bootstrap_failures = 0;
};

/// The spanning curves do not cross inside the parameter grid.
class NoCrossingError : public std::runtime_error {
 public:
  NoCrossingError(const std::string& what, std::vector<CurvePoint> curves)
      : std::runtime_error(what), curves_(std::move(curves)) {}
  const std::vector<CurvePoint>& curves() const noexcept { return curves_; }

 private:
  std::vector<CurvePoint> curves_;
};

struct ThresholdOptions {
  std::size_t bootstrap = 200;
  double confidence = 0.95;
  unsigned threads = 0;
  BoundaryMode mode = BoundaryMode::free;
  int axis = 0;
};

/// Spanning indicator of one realization, by window mode.
bool percolates(const GilbertGraph& graph, int axis);

/// Finite-size-scaling estimate of the continuum threshold lambda_star.
/// Realization r at (size s, grid g) uses sample_poisson with seed
/// derive_seed(seed, {s, g}) and replicate r.
ThresholdEstimate estimate_lambda_star(double r_star, int dim, const std::vector<double>& sizes,
                                       const std::vector<double>& lambda_grid, std::size_t replicates,
                                       std::uint64_t seed, const ThresholdOptions& options = {});

/// Same protocol over the bond probability q at fixed lambda. Realization r
/// at size s uses seed derive_seed(seed, {s}); all q share the realization
/// and its per-edge uniforms.
ThresholdEstimate estimate_q_star_empirical(double lambda, double r_star, int dim, const std::vector<double>& sizes,
                                            const std::vector<double>& q_grid, std::size_t replicates,
                                            std::uint64_t seed, const ThresholdOptions& options = {});

/// Crossing estimate from spanning counts alone. counts[s][g] successes out
/// of replicates. Exposed for testing the estimator on synthetic curves.
ThresholdEstimate estimate_crossing(const std::string& parameter_name, const std::vector<double>& sizes,
                                    const std::vector<double>& grid,
                                    const std::vector<std::vector<std::size_t>>& counts, std::size_t replicates,
                                    std::uint64_t seed, const ThresholdOptions& options);

/// Sufficient bond probability lambda_star / lambda.
double compute_q_star_bound(double lambda, double lambda_star);

/// a^2 [ln(1 + q) - ln(1 - q)] / (2 phi_star).
double beta_star_bound(double q, double phi_star, double a);

/// CSV `L,param,spanning_prob,replicates,se`.
void write_threshold_csv(std::ostream& out, const ThresholdEstimate& estimate);
/// JSON `{parameter, estimate, ci_low, ci_high, seeds, grid, ...}`.
std::string threshold_json(const ThresholdEstimate& estimate);

}  // namespace qspin
