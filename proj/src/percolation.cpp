#include "qspin/percolation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>

#include "json.hpp"

#include "qspin/error.hpp"
#include "qspin/parallel.hpp"
#include "qspin/rng.hpp"
#include "qspin/stats.hpp"
#include "qspin/union_find.hpp"

namespace qspin {

namespace {

void fill_spanning(const GilbertGraph& graph, ComponentLabeling& lab) {
  for (int axis = 0; axis < graph.window.dim; ++axis)
    lab.spanning[axis] = graph.window.boundary == BoundaryMode::torus ? wraps(graph, lab, axis) : spans(graph, lab, axis);
}

}  // namespace

ComponentLabeling connected_components(const GilbertGraph& graph) {
  const auto n = graph.num_vertices();
  UnionFind uf(n);
  for (VertexId i = 0; i < n; ++i)
    for (VertexId j : graph.adjacency[i])
      if (i < j) uf.unite(i, j);
  ComponentLabeling lab;
  lab.labels.assign(n, 0);
  lab.sizes.assign(n, 0);
  // Smallest member of each root's set; vertices are visited in increasing
  // order so the first visit of a root fixes its label.
  std::vector<VertexId> root_label(n, static_cast<VertexId>(n));
  for (VertexId v = 0; v < n; ++v) {
    const auto root = uf.find(v);
    if (root_label[root] == n) {
      root_label[root] = v;
      ++lab.num_components;
    }
    lab.labels[v] = root_label[root];
    ++lab.sizes[lab.labels[v]];
  }
  std::size_t best = 0;
  for (VertexId v = 0; v < n; ++v)
    if (lab.sizes[v] > best) {
      best = lab.sizes[v];
      lab.largest_label = v;
    }
  lab.largest_fraction = n ? static_cast<double>(best) / static_cast<double>(n) : 0.0;
  fill_spanning(graph, lab);
  return lab;
}

bool spans(const GilbertGraph& graph, const ComponentLabeling& labeling, int axis) {
  if (graph.window.boundary == BoundaryMode::torus) throw Unsupported("spans() needs a free window; use wraps()");
  if (axis < 0 || axis >= graph.window.dim) throw InvalidParameter("axis out of range");
  const double half = 0.5 * graph.window.side;
  const auto n = graph.num_vertices();
  std::vector<std::uint8_t> touches(n, 0);  // bit 0: low face, bit 1: high face
  for (VertexId v = 0; v < n; ++v) {
    const double x = graph.positions[v][axis];
    auto& t = touches[labeling.labels[v]];
    if (x <= -half + graph.r_star) t |= 1u;
    if (x >= half - graph.r_star) t |= 2u;
    if (t == 3u) return true;
  }
  return false;
}

bool wraps(const GilbertGraph& graph, const ComponentLabeling& labeling, int axis) {
  if (graph.window.boundary != BoundaryMode::torus) throw Unsupported("wraps() needs a torus window");
  if (axis < 0 || axis >= graph.window.dim) throw InvalidParameter("axis out of range");
  const auto n = graph.num_vertices();
  const double side = graph.window.side;
  // Unwrapped coordinate along `axis` by BFS; a non-tree edge whose
  // minimal-image step disagrees with the unwrapped offsets closes a cycle
  // that winds around the torus.
  std::vector<double> unwrapped(n, 0.0);
  std::vector<std::uint8_t> seen(n, 0);
  std::deque<VertexId> queue;
  for (VertexId root = 0; root < n; ++root) {
    if (seen[root] || labeling.labels[root] != root) continue;
    seen[root] = 1;
    unwrapped[root] = graph.positions[root][axis];
    queue.push_back(root);
    while (!queue.empty()) {
      const VertexId v = queue.front();
      queue.pop_front();
      for (VertexId u : graph.adjacency[v]) {
        const double step = displacement(graph.window, graph.positions[v], graph.positions[u])[axis];
        if (!seen[u]) {
          seen[u] = 1;
          unwrapped[u] = unwrapped[v] + step;
          queue.push_back(u);
        } else if (std::fabs(unwrapped[v] + step - unwrapped[u]) > 0.5 * side) {
          return true;
        }
      }
    }
  }
  return false;
}

double edge_uniform(std::uint64_t seed, std::uint64_t replicate, VertexId i, VertexId j) {
  if (i > j) std::swap(i, j);
  const Stream stream(seed, {static_cast<std::uint64_t>(Purpose::thinning), replicate});
  return stream.uniform_at((static_cast<std::uint64_t>(i) << 32) | j);
}

GilbertGraph bernoulli_thin(const GilbertGraph& graph, double q, std::uint64_t seed, std::uint64_t replicate) {
  if (!(q >= 0.0 && q <= 1.0)) throw InvalidParameter("q must lie in [0, 1]");
  GilbertGraph out = graph;
  for (auto& nb : out.adjacency) nb.clear();
  const Stream stream(seed, {static_cast<std::uint64_t>(Purpose::thinning), replicate});
  for (VertexId i = 0; i < graph.num_vertices(); ++i)
    for (VertexId j : graph.adjacency[i])
      if (i < j && stream.uniform_at((static_cast<std::uint64_t>(i) << 32) | j) < q) {
        out.adjacency[i].push_back(j);
        out.adjacency[j].push_back(i);
      }
  for (auto& nb : out.adjacency) std::sort(nb.begin(), nb.end());
  return out;
}

bool percolates(const GilbertGraph& graph, int axis) {
  const auto lab = connected_components(graph);
  return lab.spanning[axis];
}

namespace {

void check_sizes_grid(const std::vector<double>& sizes, const std::vector<double>& grid, std::size_t replicates) {
  if (sizes.size() < 2) throw InvalidParameter("threshold estimation needs >= 2 system sizes");
  if (grid.size() < 2) throw InvalidParameter("threshold estimation needs >= 2 grid points");
  if (!std::is_sorted(sizes.begin(), sizes.end()) || !std::is_sorted(grid.begin(), grid.end()))
    throw InvalidParameter("sizes and grid must be increasing");
  if (replicates < 1) throw InvalidParameter("replicates must be >= 1");
}

struct Standardizer {
  double center, scale;
  double to(double x) const { return (x - center) / scale; }
  double from(double z) const { return center + z * scale; }
};

// Crossing of consecutive-size logistic fits, averaged over pairs, in
// standardized parameter units. Empty result if any pair fails to cross
// inside the grid.
std::vector<double> pair_crossings(const std::vector<std::vector<double>>& counts, double replicates,
                                   const std::vector<double>& z) {
  std::vector<double> trials(z.size(), replicates);
  std::vector<stats::LogisticFit> fits;
  for (const auto& row : counts) fits.push_back(stats::fit_logistic(z, row, trials));
  std::vector<double> out;
  for (std::size_t s = 0; s + 1 < fits.size(); ++s) {
    const auto& a = fits[s];
    const auto& b = fits[s + 1];
    const double dslope = a.slope - b.slope;
    if (!(a.slope > 0.0) || !(b.slope > 0.0) || std::fabs(dslope) < 1e-12) return {};
    const double cross = (b.intercept - a.intercept) / dslope;
    if (!(cross >= z.front() && cross <= z.back())) return {};
    out.push_back(cross);
  }
  return out;
}

}  // namespace

ThresholdEstimate estimate_crossing(const std::string& parameter_name, const std::vector<double>& sizes,
                                    const std::vector<double>& grid,
                                    const std::vector<std::vector<std::size_t>>& counts, std::size_t replicates,
                                    std::uint64_t seed, const ThresholdOptions& options) {
  check_sizes_grid(sizes, grid, replicates);
  ThresholdEstimate est;
  est.parameter_name = parameter_name;
  est.sizes = sizes;
  est.grid = grid;
  est.seed = seed;
  const double r = static_cast<double>(replicates);
  std::vector<std::vector<double>> dcounts(sizes.size());
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    std::vector<double> probs, weights(grid.size(), r);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      dcounts[s].push_back(static_cast<double>(counts[s][g]));
      probs.push_back(static_cast<double>(counts[s][g]) / r);
    }
    const auto mono = stats::isotonic_regression(probs, weights);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const double p = probs[g];
      est.curves.push_back({sizes[s], grid[g], counts[s][g], replicates, p, std::sqrt(p * (1.0 - p) / r), mono[g]});
    }
  }
  const double lo = grid.front(), hi = grid.back();
  const Standardizer stdz{0.5 * (lo + hi), 0.5 * (hi - lo)};
  std::vector<double> z;
  for (double x : grid) z.push_back(stdz.to(x));

  const auto crossings = pair_crossings(dcounts, r, z);
  if (crossings.empty())
    throw NoCrossingError("spanning curves for different sizes do not cross inside the " + parameter_name + " grid",
                          est.curves);
  for (double c : crossings) est.pair_crossings.push_back(stdz.from(c));
  est.estimate = stdz.from(stats::mean(crossings));

  std::vector<double> boot(options.bootstrap, 0.0);
  std::vector<std::uint8_t> ok(options.bootstrap, 0);
  parallel_for(options.bootstrap, options.threads, [&](std::size_t b) {
    std::vector<std::vector<double>> resampled(sizes.size(), std::vector<double>(grid.size(), 0.0));
    for (std::size_t s = 0; s < sizes.size(); ++s)
      for (std::size_t g = 0; g < grid.size(); ++g) {
        Stream rng(seed, {static_cast<std::uint64_t>(Purpose::bootstrap), b, s, g});
        const double p = dcounts[s][g] / r;
        std::size_t k = 0;
        for (std::size_t i = 0; i < replicates; ++i) k += rng.uniform() < p;
        resampled[s][g] = static_cast<double>(k);
      }
    const auto c = pair_crossings(resampled, r, z);
    if (!c.empty()) {
      boot[b] = stdz.from(stats::mean(c));
      ok[b] = 1;
    }
  });
  std::vector<double> good;
  for (std::size_t b = 0; b < boot.size(); ++b)
    if (ok[b]) good.push_back(boot[b]);
  est.bootstrap_failures = options.bootstrap - good.size();
  if (good.empty()) {
    est.ci_low = est.ci_high = est.estimate;
  } else {
    const double tail = 0.5 * (1.0 - options.confidence);
    est.ci_low = std::min(stats::quantile(good, tail), est.estimate);
    est.ci_high = std::max(stats::quantile(good, 1.0 - tail), est.estimate);
  }
  return est;
}

ThresholdEstimate estimate_lambda_star(double r_star, int dim, const std::vector<double>& sizes,
                                       const std::vector<double>& lambda_grid, std::size_t replicates,
                                       std::uint64_t seed, const ThresholdOptions& options) {
  check_sizes_grid(sizes, lambda_grid, replicates);
  if (!(r_star > 0.0)) throw InvalidParameter("r_star must be positive");
  if (!(lambda_grid.front() > 0.0)) throw InvalidParameter("lambda grid must be positive");
  const std::size_t ns = sizes.size(), ng = lambda_grid.size();
  std::vector<std::uint8_t> hit(ns * ng * replicates, 0);
  parallel_for(ns * ng * replicates, options.threads, [&](std::size_t task) {
    const std::size_t rep = task % replicates;
    const std::size_t g = (task / replicates) % ng;
    const std::size_t s = task / (replicates * ng);
    const BoxWindow window{dim, sizes[s], options.mode};
    const auto points = sample_poisson(lambda_grid[g], window, derive_seed(seed, {s, g}), rep);
    hit[task] = percolates(build_graph(points, r_star), options.axis);
  });
  std::vector<std::vector<std::size_t>> counts(ns, std::vector<std::size_t>(ng, 0));
  for (std::size_t task = 0; task < hit.size(); ++task)
    counts[task / (replicates * ng)][(task / replicates) % ng] += hit[task];
  return estimate_crossing("lambda", sizes, lambda_grid, counts, replicates, seed, options);
}

ThresholdEstimate estimate_q_star_empirical(double lambda, double r_star, int dim, const std::vector<double>& sizes,
                                            const std::vector<double>& q_grid, std::size_t replicates,
                                            std::uint64_t seed, const ThresholdOptions& options) {
  check_sizes_grid(sizes, q_grid, replicates);
  if (!(lambda > 0.0) || !(r_star > 0.0)) throw InvalidParameter("lambda and r_star must be positive");
  if (!(q_grid.front() >= 0.0 && q_grid.back() <= 1.0)) throw InvalidParameter("q grid must lie in [0, 1]");
  const std::size_t ns = sizes.size(), ng = q_grid.size();
  std::vector<std::uint8_t> hit(ns * replicates * ng, 0);
  parallel_for(ns * replicates, options.threads, [&](std::size_t task) {
    const std::size_t rep = task % replicates;
    const std::size_t s = task / replicates;
    const BoxWindow window{dim, sizes[s], options.mode};
    const std::uint64_t cell_seed = derive_seed(seed, {s});
    const auto graph = build_graph(sample_poisson(lambda, window, cell_seed, rep), r_star);
    const auto edges = graph.edges();
    const Stream stream(cell_seed, {static_cast<std::uint64_t>(Purpose::thinning), rep});
    std::vector<double> u(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e)
      u[e] = stream.uniform_at((static_cast<std::uint64_t>(edges[e].first) << 32) | edges[e].second);
    for (std::size_t g = 0; g < ng; ++g) {
      std::vector<std::pair<VertexId, VertexId>> kept;
      for (std::size_t e = 0; e < edges.size(); ++e)
        if (u[e] < q_grid[g]) kept.push_back(edges[e]);
      const auto thinned = graph_from_edges(graph.window, graph.positions, r_star, kept);
      hit[task * ng + g] = percolates(thinned, options.axis);
    }
  });
  std::vector<std::vector<std::size_t>> counts(ns, std::vector<std::size_t>(ng, 0));
  for (std::size_t task = 0; task < ns * replicates; ++task)
    for (std::size_t g = 0; g < ng; ++g) counts[task / replicates][g] += hit[task * ng + g];
  return estimate_crossing("q", sizes, q_grid, counts, replicates, seed, options);
}

double compute_q_star_bound(double lambda, double lambda_star) {
  if (!(lambda_star > 0.0)) throw InvalidParameter("lambda_star must be positive");
  if (!(lambda >= lambda_star)) throw InvalidParameter("lambda below lambda_star: bound would exceed 1");
  return lambda_star / lambda;
}

double beta_star_bound(double q, double phi_star, double a) {
  if (!(q > 0.0 && q < 1.0)) throw InvalidParameter("q must lie in (0, 1)");
  if (!(phi_star > 0.0) || !(a > 0.0)) throw InvalidParameter("phi_star and a must be positive");
  return a * a * (std::log1p(q) - std::log1p(-q)) / (2.0 * phi_star);
}

void write_threshold_csv(std::ostream& out, const ThresholdEstimate& estimate) {
  out << "L,param,spanning_prob,replicates,se\n";
  for (const auto& c : estimate.curves)
    out << format_double(c.side) << ',' << format_double(c.param) << ',' << format_double(c.spanning_prob) << ','
        << c.replicates << ',' << format_double(c.se) << '\n';
}

std::string threshold_json(const ThresholdEstimate& estimate) {
  nlohmann::ordered_json j;
  j["parameter"] = estimate.parameter_name;
  j["estimate"] = estimate.estimate;
  j["ci_low"] = estimate.ci_low;
  j["ci_high"] = estimate.ci_high;
  j["seeds"] = {{"master", estimate.seed}, {"derivation", "derive_seed(master, {size_index[, grid_index]})"}};
  j["grid"] = estimate.grid;
  j["sizes"] = estimate.sizes;
  j["pair_crossings"] = estimate.pair_crossings;
  j["bootstrap_failures"] = estimate.bootstrap_failures;
  return j.dump(2) + "\n";
}

}  // namespace qspin
