#include "qspin/geomgraph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "qspin/error.hpp"

namespace qspin {

std::size_t GilbertGraph::num_edges() const {
  std::size_t twice = 0;
  for (const auto& nb : adjacency) twice += nb.size();
  return twice / 2;
}

std::vector<std::size_t> GilbertGraph::degrees() const {
  std::vector<std::size_t> out(adjacency.size());
  for (std::size_t i = 0; i < adjacency.size(); ++i) out[i] = adjacency[i].size();
  return out;
}

std::vector<std::pair<VertexId, VertexId>> GilbertGraph::edges() const {
  std::vector<std::pair<VertexId, VertexId>> out;
  out.reserve(num_edges());
  for (VertexId i = 0; i < adjacency.size(); ++i)
    for (VertexId j : adjacency[i])
      if (i < j) out.emplace_back(i, j);
  return out;
}

void GilbertGraph::validate() const {
  if (adjacency.size() != positions.size() && !positions.empty())
    throw InvalidParameter("adjacency and positions differ in size");
  for (VertexId i = 0; i < adjacency.size(); ++i) {
    const auto& nb = adjacency[i];
    if (!std::is_sorted(nb.begin(), nb.end()) || std::adjacent_find(nb.begin(), nb.end()) != nb.end())
      throw InvalidParameter("neighbor list not strictly sorted");
    for (VertexId j : nb) {
      if (j == i) throw InvalidParameter("self-loop");
      if (j >= adjacency.size()) throw InvalidParameter("neighbor index out of range");
      const auto& back = adjacency[j];
      if (!std::binary_search(back.begin(), back.end(), i)) throw InvalidParameter("adjacency not symmetric");
    }
  }
}

namespace {

void check_radius(const PointConfiguration& points, double r_star) {
  points.window.validate();
  if (!(r_star > 0.0) || !std::isfinite(r_star)) throw InvalidParameter("r_star must be positive");
  if (points.window.boundary == BoundaryMode::torus && !(r_star < 0.5 * points.window.side))
    throw InvalidParameter("r_star must be < L/2 on a torus");
}

GilbertGraph empty_graph(const PointConfiguration& points, double r_star) {
  GilbertGraph g;
  g.window = points.window;
  g.positions = points.points;
  g.r_star = r_star;
  g.adjacency.assign(points.points.size(), {});
  return g;
}

void finalize(GilbertGraph& g) {
  for (auto& nb : g.adjacency) std::sort(nb.begin(), nb.end());
}

}  // namespace

GilbertGraph brute_force_graph(const PointConfiguration& points, double r_star) {
  check_radius(points, r_star);
  GilbertGraph g = empty_graph(points, r_star);
  const double r2 = r_star * r_star;
  const auto n = static_cast<VertexId>(points.size());
  for (VertexId i = 0; i < n; ++i)
    for (VertexId j = i + 1; j < n; ++j)
      if (squared_distance(points.window, points.points[i], points.points[j]) <= r2) {
        g.adjacency[i].push_back(j);
        g.adjacency[j].push_back(i);
      }
  finalize(g);
  return g;
}

GilbertGraph build_graph(const PointConfiguration& points, double r_star) {
  check_radius(points, r_star);
  const BoxWindow& w = points.window;
  const bool torus = w.boundary == BoundaryMode::torus;
  // Cells of side >= r_star; a torus needs >= 3 cells per axis so that the
  // wrapped 3-neighborhood does not visit a cell twice.
  const auto ncell = static_cast<long>(std::max(1.0, std::floor(w.side / r_star)));
  if (torus && ncell < 3) return brute_force_graph(points, r_star);
  const double cell_side = w.side / static_cast<double>(ncell);
  const long nz = w.dim == 3 ? ncell : 1;

  GilbertGraph g = empty_graph(points, r_star);
  const auto n = points.size();
  auto cell_coord = [&](double x) {
    const auto c = static_cast<long>(std::floor((x + 0.5 * w.side) / cell_side));
    return std::clamp(c, 0L, ncell - 1);
  };
  std::vector<long> cell_of(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = points.points[i];
    const long cz = w.dim == 3 ? cell_coord(p[2]) : 0;
    cell_of[i] = (cz * ncell + cell_coord(p[1])) * ncell + cell_coord(p[0]);
  }
  // Counting sort of vertices by cell.
  const auto ncells = static_cast<std::size_t>(ncell * ncell * nz);
  std::vector<std::size_t> start(ncells + 1, 0);
  for (auto c : cell_of) ++start[static_cast<std::size_t>(c) + 1];
  for (std::size_t c = 0; c < ncells; ++c) start[c + 1] += start[c];
  std::vector<VertexId> members(n);
  {
    auto fill = start;
    for (std::size_t i = 0; i < n; ++i) members[fill[static_cast<std::size_t>(cell_of[i])]++] = static_cast<VertexId>(i);
  }

  const double r2 = r_star * r_star;
  const long dz_lo = w.dim == 3 ? -1 : 0;
  const long dz_hi = w.dim == 3 ? 1 : 0;
  for (long cz = 0; cz < nz; ++cz)
    for (long cy = 0; cy < ncell; ++cy)
      for (long cx = 0; cx < ncell; ++cx) {
        const auto here = static_cast<std::size_t>((cz * ncell + cy) * ncell + cx);
        for (long dz = dz_lo; dz <= dz_hi; ++dz)
          for (long dy = -1; dy <= 1; ++dy)
            for (long dx = -1; dx <= 1; ++dx) {
              long ox = cx + dx, oy = cy + dy, oz = cz + dz;
              if (torus) {
                ox = (ox + ncell) % ncell;
                oy = (oy + ncell) % ncell;
                oz = (oz + nz) % nz;
              } else if (ox < 0 || oy < 0 || oz < 0 || ox >= ncell || oy >= ncell || oz >= nz) {
                continue;
              }
              const auto there = static_cast<std::size_t>((oz * ncell + oy) * ncell + ox);
              if (there < here) continue;  // each unordered cell pair once
              for (auto a = start[here]; a < start[here + 1]; ++a) {
                const VertexId i = members[a];
                for (auto b = (there == here ? a + 1 : start[there]); b < start[there + 1]; ++b) {
                  const VertexId j = members[b];
                  if (squared_distance(w, points.points[i], points.points[j]) <= r2) {
                    g.adjacency[i].push_back(j);
                    g.adjacency[j].push_back(i);
                  }
                }
              }
            }
      }
  finalize(g);
  return g;
}

GilbertGraph graph_from_edges(const BoxWindow& window, std::vector<Vec> positions, double r_star,
                              const std::vector<std::pair<VertexId, VertexId>>& edges) {
  GilbertGraph g;
  g.window = window;
  g.r_star = r_star;
  std::size_t n = positions.size();
  for (const auto& [i, j] : edges) n = std::max<std::size_t>(n, std::max(i, j) + std::size_t{1});
  if (!positions.empty() && n != positions.size()) throw InvalidParameter("edge references a missing vertex");
  g.positions = std::move(positions);
  g.adjacency.assign(n, {});
  for (const auto& [i, j] : edges) {
    if (i == j) throw InvalidParameter("self-loop in edge list");
    g.adjacency[i].push_back(j);
    g.adjacency[j].push_back(i);
  }
  for (auto& nb : g.adjacency) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return g;
}

double weight(double alpha, const Vec& x, int dim) {
  if (!(alpha > 0.0)) throw InvalidParameter("alpha must be positive");
  return std::exp(-alpha * norm(x, dim));
}

SparsityReport sparsity_functionals(const GilbertGraph& graph, double alpha, double theta) {
  if (!(alpha > 0.0) || !(theta > 0.0)) throw InvalidParameter("alpha and theta must be positive");
  SparsityReport r{alpha, theta, 0.0, 0.0, 0, 0.0};
  const auto n = graph.num_vertices();
  std::vector<double> w(n);
  std::size_t degree_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = weight(alpha, graph.positions[i], graph.window.dim);
    r.b_gamma += w[i];
    degree_sum += graph.degree(static_cast<VertexId>(i));
    r.max_degree = std::max(r.max_degree, graph.degree(static_cast<VertexId>(i)));
  }
  for (const auto& [i, j] : graph.edges()) {
    const double prod = static_cast<double>(graph.degree(i)) * static_cast<double>(graph.degree(j));
    r.a_gamma += (w[i] + w[j]) * std::pow(prod, theta);
  }
  r.mean_degree = n ? static_cast<double>(degree_sum) / static_cast<double>(n) : 0.0;
  return r;
}

double weight_integral(int dim, double alpha) {
  if (!(alpha > 0.0)) throw InvalidParameter("alpha must be positive");
  if (dim == 2) return 2.0 * std::numbers::pi / (alpha * alpha);
  if (dim == 3) return 8.0 * std::numbers::pi / (alpha * alpha * alpha);
  throw InvalidParameter("weight_integral supports d = 2 or 3");
}

double expected_a_bound(double lambda, double alpha, double theta, double r_star, int dim) {
  if (!(lambda > 0.0) || !(alpha > 0.0) || !(theta > 0.0) || !(r_star > 0.0))
    throw InvalidParameter("expected_a_bound parameters must be positive");
  const double kappa = lambda * ball_volume(dim, 2.0 * r_star);
  return poisson_weighted_moment(2.0 * theta + 1.0, kappa) * weight_integral(dim, alpha);
}

void write_edges_csv(std::ostream& out, const GilbertGraph& graph) {
  out << "# n=" << graph.num_vertices() << '\n' << "# r_star=" << format_double(graph.r_star) << '\n';
  for (const auto& [i, j] : graph.edges()) out << i << ',' << j << '\n';
}

EdgeList read_edges_csv(std::istream& in) {
  EdgeList list;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      if (key == "n") list.n = std::stoull(line.substr(eq + 1));
      else if (key == "r_star") list.r_star = std::stod(line.substr(eq + 1));
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw InvalidParameter("malformed edge row '" + line + "'");
    const auto i = std::stoul(line.substr(0, comma));
    const auto j = std::stoul(line.substr(comma + 1));
    if (i >= list.n || j >= list.n) throw InvalidParameter("edge index exceeds n");
    list.edges.emplace_back(static_cast<VertexId>(i), static_cast<VertexId>(j));
  }
  return list;
}

}  // namespace qspin
