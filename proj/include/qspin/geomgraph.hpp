#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "qspin/pointprocess.hpp"

namespace qspin {

using VertexId = std::uint32_t;

/// Fixed-radius (Gilbert) graph: x ~ y iff |x - y| <= r_star.
/// Neighbor lists are sorted by vertex index.
struct GilbertGraph {
  BoxWindow window;
  std::vector<Vec> positions;
  double r_star = 0.0;
  std::vector<std::vector<VertexId>> adjacency;

  std::size_t num_vertices() const { return positions.size(); }
  std::size_t num_edges() const;
  std::size_t degree(VertexId v) const { return adjacency[v].size(); }
  std::vector<std::size_t> degrees() const;

  /// Edges {i, j} with i < j in lexicographic order.
  std::vector<std::pair<VertexId, VertexId>> edges() const;

  /// Throws InvalidParameter if symmetry, loop-freeness or sortedness fails.
  void validate() const;
};

/// Cell-list construction, expected O(n) at fixed mean degree.
GilbertGraph build_graph(const PointConfiguration& points, double r_star);

/// All-pairs construction with the same contract as build_graph.
GilbertGraph brute_force_graph(const PointConfiguration& points, double r_star);

/// Builds from an explicit edge list (i < j not required). Positions may be
/// empty when only topology matters.
GilbertGraph graph_from_edges(const BoxWindow& window, std::vector<Vec> positions, double r_star,
                              const std::vector<std::pair<VertexId, VertexId>>& edges);

/// w_alpha(x) = exp(-alpha |x|), |x| measured from the window center.
double weight(double alpha, const Vec& x, int dim = 3);

struct SparsityReport {
  double alpha = 0.0;
  double theta = 0.0;
  double a_gamma = 0.0;
  double b_gamma = 0.0;
  std::size_t max_degree = 0;
  double mean_degree = 0.0;
};

/// a_gamma = sum over edges of [w(x) + w(y)] [n(x) n(y)]^theta,
/// b_gamma = sum over vertices of w(x), both over the finite window.
SparsityReport sparsity_functionals(const GilbertGraph& graph, double alpha, double theta);

/// Integral of exp(-alpha |x|) over R^d: 2 pi / alpha^2 (d=2), 8 pi / alpha^3 (d=3).
double weight_integral(int dim, double alpha);

/// l_{2 theta + 1}(lambda V(2 r_star)) * weight_integral(dim, alpha): upper
/// bound on the mean of a_gamma under the Poisson law on R^d.
double expected_a_bound(double lambda, double alpha, double theta, double r_star, int dim);

void write_edges_csv(std::ostream& out, const GilbertGraph& graph);

struct EdgeList {
  std::size_t n = 0;
  double r_star = 0.0;
  std::vector<std::pair<VertexId, VertexId>> edges;
};
EdgeList read_edges_csv(std::istream& in);

}  // namespace qspin
