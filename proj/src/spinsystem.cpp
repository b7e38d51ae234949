#include "qspin/spinsystem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qspin/error.hpp"
#include "qspin/percolation.hpp"
#include "qspin/quadrature.hpp"
#include "qspin/rng.hpp"
#include "qspin/stats.hpp"

namespace qspin {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// log(1e16): densities below 1e-16 of their peak are truncated.
constexpr double kTruncationLog = 36.841361487904734;

}  // namespace

// ---------------------------------------------------------------------------
// Single-spin measures

SingleSpinMeasure SingleSpinMeasure::ising() { return {MeasureKind::ising, 1.0, 0.0, 0.0}; }

SingleSpinMeasure SingleSpinMeasure::uniform(double half_width) {
  SingleSpinMeasure m{MeasureKind::uniform_interval, half_width, 0.0, 0.0};
  m.validate();
  return m;
}

SingleSpinMeasure SingleSpinMeasure::quartic(double v4, double v2) {
  SingleSpinMeasure m{MeasureKind::gibbs_density, 1.0, v4, v2};
  m.validate();
  return m;
}

SingleSpinMeasure SingleSpinMeasure::gaussian(double variance) {
  if (!(variance > 0.0)) throw InvalidParameter("gaussian variance must be positive");
  return quartic(0.0, 0.5 / variance);
}

SingleSpinMeasure SingleSpinMeasure::parse(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  std::vector<double> args;
  if (colon != std::string::npos) {
    std::stringstream ss(spec.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) args.push_back(std::stod(item));
  }
  if (name == "ising" && args.empty()) return ising();
  if (name == "uniform" && args.size() <= 1) return uniform(args.empty() ? 1.0 : args[0]);
  if (name == "quartic" && args.size() == 2) return quartic(args[0], args[1]);
  if (name == "double-well" && args.empty()) return quartic(1.0, -2.0);
  if (name == "gaussian" && args.size() <= 1) return gaussian(args.empty() ? 1.0 : args[0]);
  throw InvalidParameter("unrecognized measure spec '" + spec + "'");
}

std::string SingleSpinMeasure::describe() const {
  switch (kind) {
    case MeasureKind::ising:
      return "ising";
    case MeasureKind::uniform_interval:
      return "uniform:" + format_double(half_width);
    case MeasureKind::gibbs_density:
      return "quartic:" + format_double(v4) + "," + format_double(v2);
  }
  return "?";
}

void SingleSpinMeasure::validate() const {
  switch (kind) {
    case MeasureKind::ising:
      return;
    case MeasureKind::uniform_interval:
      if (!(half_width > 0.0) || !std::isfinite(half_width)) throw InvalidParameter("uniform half width must be positive");
      return;
    case MeasureKind::gibbs_density:
      if (!(v4 >= 0.0) || !std::isfinite(v4) || !std::isfinite(v2)) throw InvalidParameter("invalid quartic coefficients");
      if (v4 == 0.0 && !(v2 > 0.0)) throw InvalidParameter("density exp(-V) is not normalizable (need v4 > 0 or v2 > 0)");
      return;
  }
}

double SingleSpinMeasure::potential(double t) const {
  const double t2 = t * t;
  return v4 * t2 * t2 + v2 * t2;
}

double SingleSpinMeasure::log_density(double t) const {
  switch (kind) {
    case MeasureKind::uniform_interval:
      return std::fabs(t) <= half_width ? 0.0 : kNegInf;
    case MeasureKind::gibbs_density:
      return -potential(t);
    case MeasureKind::ising:
      break;
  }
  throw Unsupported("Ising measure has no density");
}

double SingleSpinMeasure::log_density_peak() const {
  if (kind == MeasureKind::uniform_interval) return 0.0;
  if (kind == MeasureKind::gibbs_density) return (v4 > 0.0 && v2 < 0.0) ? v2 * v2 / (4.0 * v4) : 0.0;
  throw Unsupported("Ising measure has no density");
}

double SingleSpinMeasure::support_limit() const {
  switch (kind) {
    case MeasureKind::ising:
      return 1.0;
    case MeasureKind::uniform_interval:
      return half_width;
    case MeasureKind::gibbs_density: {
      // V(T) = V_min + log(1e16), solved as a quadratic in T^2.
      const double target = -log_density_peak() + kTruncationLog;
      const double s = v4 > 0.0 ? (-v2 + std::sqrt(v2 * v2 + 4.0 * v4 * target)) / (2.0 * v4) : target / v2;
      return std::sqrt(s);
    }
  }
  return 1.0;
}

double SingleSpinMeasure::variance() const {
  switch (kind) {
    case MeasureKind::ising:
      return 1.0;
    case MeasureKind::uniform_interval:
      return half_width * half_width / 3.0;
    case MeasureKind::gibbs_density: {
      const double peak = log_density_peak();
      const double T = support_limit();
      auto rho = [&](double t) { return std::exp(log_density(t) - peak); };
      const double z = quad::integrate(rho, 0.0, T, 1e-14, 1e-13).value;
      const double m2 = quad::integrate([&](double t) { return t * t * rho(t); }, 0.0, T, 1e-14, 1e-13).value;
      return m2 / z;
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Interaction profile

double InteractionProfile::operator()(double r) const {
  if (r > r_star) return 0.0;
  if (shape == Shape::linear_taper) return phi_star * (2.0 - r / r_star);
  return phi_star;
}

void InteractionProfile::validate() const {
  if (!(phi_star > 0.0) || !std::isfinite(phi_star)) throw InvalidParameter("phi_star must be positive");
  if (!(r_star > 0.0) || !std::isfinite(r_star)) throw InvalidParameter("interaction range must be positive");
}

InteractionProfile InteractionProfile::scaled(double factor) const {
  InteractionProfile p = *this;
  p.phi_star *= factor;
  return p;
}

std::string to_string(InteractionProfile::Shape shape) {
  return shape == InteractionProfile::Shape::linear_taper ? "linear-taper" : "constant";
}

InteractionProfile::Shape parse_shape(const std::string& text) {
  if (text == "constant") return InteractionProfile::Shape::constant;
  if (text == "linear-taper") return InteractionProfile::Shape::linear_taper;
  throw InvalidParameter("unknown interaction shape '" + text + "'");
}

// ---------------------------------------------------------------------------
// States and energies

VertexMask collar_interior(const GilbertGraph& graph, double margin) {
  if (!(margin >= 0.0)) throw InvalidParameter("collar margin must be nonnegative");
  const double limit = 0.5 * graph.window.side - margin;
  VertexMask mask(graph.num_vertices(), 0);
  for (std::size_t v = 0; v < mask.size(); ++v) {
    bool inside = true;
    for (int k = 0; k < graph.window.dim; ++k) inside = inside && std::fabs(graph.positions[v][k]) <= limit;
    mask[v] = inside;
  }
  return mask;
}

std::vector<VertexId> mask_vertices(const VertexMask& mask) {
  std::vector<VertexId> out;
  for (std::size_t v = 0; v < mask.size(); ++v)
    if (mask[v]) out.push_back(static_cast<VertexId>(v));
  return out;
}

SpinState make_state(const GilbertGraph& graph, VertexMask interior, double boundary, double initial) {
  if (interior.size() != graph.num_vertices()) throw InvalidParameter("interior mask size mismatch");
  SpinState s;
  s.sigma.assign(graph.num_vertices(), 0.0);
  for (std::size_t v = 0; v < interior.size(); ++v)
    if (interior[v]) s.sigma[v] = initial;
  s.interior = std::move(interior);
  s.boundary = boundary;
  return s;
}

namespace {

double edge_coupling(const GilbertGraph& graph, const InteractionProfile& profile, VertexId x, VertexId y) {
  return profile(std::sqrt(squared_distance(graph.window, graph.positions[x], graph.positions[y])));
}

}  // namespace

double relative_energy(const GilbertGraph& graph, const SpinState& state, const InteractionProfile& profile) {
  double minus_e = 0.0;
  for (VertexId x = 0; x < graph.num_vertices(); ++x) {
    if (!state.is_interior(x)) continue;
    for (VertexId y : graph.adjacency[x]) {
      if (state.is_interior(y)) {
        if (x < y) minus_e += edge_coupling(graph, profile, x, y) * state.sigma[x] * state.sigma[y];
      } else {
        minus_e += edge_coupling(graph, profile, x, y) * state.sigma[x] * state.boundary;
      }
    }
  }
  return -minus_e;
}

double local_field(const GilbertGraph& graph, const SpinState& state, const InteractionProfile& profile, VertexId x) {
  double h = 0.0;
  for (VertexId y : graph.adjacency[x]) h += edge_coupling(graph, profile, x, y) * state.value(y);
  return h;
}

double heat_bath_ising(double beta, double h, double u) { return 2.0 * u - 1.0 < std::tanh(beta * h) ? 1.0 : -1.0; }

void heat_bath_step_ising(const GilbertGraph& graph, SpinState& state, const InteractionProfile& profile, VertexId x,
                          double beta, double u) {
  if (!state.is_interior(x)) throw InvalidParameter("update site must be interior");
  state.sigma[x] = heat_bath_ising(beta, local_field(graph, state, profile, x), u);
}

namespace {

struct MetropolisOutcome {
  double value;
  bool accepted;
};

MetropolisOutcome metropolis_move(const SingleSpinMeasure& measure, double sigma, double beta, double h, double width,
                                  double u1, double u2) {
  const double proposal = sigma + width * (2.0 * u1 - 1.0);
  const double log_ratio = beta * h * (proposal - sigma) + measure.log_density(proposal) - measure.log_density(sigma);
  const bool accept = u2 < std::exp(log_ratio);
  return {accept ? proposal : sigma, accept};
}

}  // namespace

double metropolis_continuous(const SingleSpinMeasure& measure, double sigma, double beta, double h, double width,
                             double u1, double u2) {
  return metropolis_move(measure, sigma, beta, h, width, u1, u2).value;
}

bool metropolis_step_continuous(const GilbertGraph& graph, SpinState& state, const InteractionProfile& profile,
                                const SingleSpinMeasure& measure, VertexId x, double beta, double width, double u1,
                                double u2) {
  if (!measure.continuous()) throw InvalidParameter("Metropolis update needs a continuous measure");
  if (!state.is_interior(x)) throw InvalidParameter("update site must be interior");
  const auto outcome =
      metropolis_move(measure, state.sigma[x], beta, local_field(graph, state, profile, x), width, u1, u2);
  state.sigma[x] = outcome.value;
  return outcome.accepted;
}

// ---------------------------------------------------------------------------
// Chains

void ChainConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidParameter("beta must be finite and >= 0");
  if (!(sweeps > burn_in)) throw InvalidParameter("sweeps must exceed burn_in");
  if (thin < 1) throw InvalidParameter("thin must be >= 1");
  if (!(proposal_width > 0.0)) throw InvalidParameter("proposal width must be positive");
}

namespace {

// Interior-only coupling table: neighbors as interior indices plus the
// summed boundary coupling.
struct Couplings {
  std::vector<VertexId> sites;
  std::vector<std::size_t> offset;
  std::vector<std::size_t> neighbor;  // interior index
  std::vector<double> phi;
  std::vector<double> boundary_phi;

  Couplings(const GilbertGraph& graph, const VertexMask& interior, const InteractionProfile& profile) {
    sites = mask_vertices(interior);
    std::vector<std::size_t> index(graph.num_vertices(), 0);
    for (std::size_t i = 0; i < sites.size(); ++i) index[sites[i]] = i;
    offset.push_back(0);
    boundary_phi.assign(sites.size(), 0.0);
    for (std::size_t i = 0; i < sites.size(); ++i) {
      for (VertexId y : graph.adjacency[sites[i]]) {
        const double c = edge_coupling(graph, profile, sites[i], y);
        if (interior[y]) {
          neighbor.push_back(index[y]);
          phi.push_back(c);
        } else {
          boundary_phi[i] += c;
        }
      }
      offset.push_back(neighbor.size());
    }
  }

  double field(std::size_t i, const std::vector<double>& spins, double boundary) const {
    double h = boundary_phi[i] * boundary;
    for (auto k = offset[i]; k < offset[i + 1]; ++k) h += phi[k] * spins[neighbor[k]];
    return h;
  }

  double energy(const std::vector<double>& spins, double boundary) const {
    double minus_e = 0.0;
    for (std::size_t i = 0; i < sites.size(); ++i) {
      minus_e += boundary_phi[i] * boundary * spins[i];
      for (auto k = offset[i]; k < offset[i + 1]; ++k)
        if (neighbor[k] > i) minus_e += phi[k] * spins[i] * spins[neighbor[k]];
    }
    return -minus_e;
  }
};

// Interior components with no coupling to the boundary (all of them when the
// boundary value is zero). Flipping one is a symmetry of the kernel.
std::vector<std::vector<std::size_t>> boundary_free_components(const Couplings& table, double boundary) {
  const std::size_t n = table.sites.size();
  std::vector<std::uint8_t> seen(n, 0);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    std::vector<std::size_t> comp{s};
    seen[s] = 1;
    bool touches = false;
    for (std::size_t k = 0; k < comp.size(); ++k) {
      const auto i = comp[k];
      touches = touches || (table.boundary_phi[i] != 0.0 && boundary != 0.0);
      for (auto e = table.offset[i]; e < table.offset[i + 1]; ++e)
        if (!seen[table.neighbor[e]]) {
          seen[table.neighbor[e]] = 1;
          comp.push_back(table.neighbor[e]);
        }
    }
    if (!touches) out.push_back(std::move(comp));
  }
  return out;
}

double draw_from_measure(const SingleSpinMeasure& measure, Stream& rng, bool mirrored) {
  auto u = [&] {
    const double v = rng.uniform();
    return mirrored ? 1.0 - v : v;
  };
  switch (measure.kind) {
    case MeasureKind::ising: {
      const double spin = rng.uniform() < 0.5 ? 1.0 : -1.0;
      return mirrored ? -spin : spin;
    }
    case MeasureKind::uniform_interval:
      return measure.half_width * (2.0 * u() - 1.0);
    case MeasureKind::gibbs_density: {
      const double T = measure.support_limit();
      const double peak = measure.log_density_peak();
      for (;;) {
        const double t = T * (2.0 * u() - 1.0);
        if (rng.uniform() < std::exp(measure.log_density(t) - peak)) return t;
      }
    }
  }
  return 0.0;
}

}  // namespace

ChainResult run_chain(const GilbertGraph& graph, const VertexMask& interior, const SingleSpinMeasure& measure,
                      const InteractionProfile& profile, double boundary, const ChainConfig& config,
                      const ChainOptions& options) {
  config.validate();
  measure.validate();
  profile.validate();
  if (interior.size() != graph.num_vertices()) throw InvalidParameter("interior mask size mismatch");
  const Couplings table(graph, interior, profile);
  const std::size_t n = table.sites.size();

  std::vector<double> spins(n, 0.0);
  if (options.initial_sigma) {
    if (options.initial_sigma->size() != graph.num_vertices()) throw InvalidParameter("initial state size mismatch");
    for (std::size_t i = 0; i < n; ++i) spins[i] = (*options.initial_sigma)[table.sites[i]];
  } else if (options.init == InitialState::aligned) {
    double start = boundary;
    if (measure.kind == MeasureKind::ising) start = boundary < 0.0 ? -1.0 : 1.0;
    else start = std::clamp(boundary, -measure.support_limit(), measure.support_limit());
    std::fill(spins.begin(), spins.end(), start);
  } else {
    Stream init(config.seed, {static_cast<std::uint64_t>(Purpose::initial_state), config.replicate});
    for (auto& s : spins) s = draw_from_measure(measure, init, options.mirrored);
  }

  // Magnetization subset as interior indices.
  std::vector<std::size_t> subset;
  {
    std::vector<std::size_t> index(graph.num_vertices(), n);
    for (std::size_t i = 0; i < n; ++i) index[table.sites[i]] = i;
    if (options.subset.empty()) {
      for (std::size_t i = 0; i < n; ++i) subset.push_back(i);
    } else {
      for (VertexId v : options.subset) {
        if (v >= graph.num_vertices() || index[v] == n) throw InvalidParameter("magnetization subset must be interior");
        subset.push_back(index[v]);
      }
    }
  }
  if (subset.empty()) throw InvalidParameter("magnetization subset is empty");

  Stream rng(config.seed, {static_cast<std::uint64_t>(Purpose::chain), config.replicate});
  Stream flip_rng(config.seed, {static_cast<std::uint64_t>(Purpose::component_flip), config.replicate});
  const auto free_components = boundary_free_components(table, boundary);
  const bool ising = measure.kind == MeasureKind::ising;
  const double beta = config.beta;
  std::size_t proposals = 0, accepted = 0;
  ChainResult result;
  for (std::size_t sweep = 1; sweep <= config.sweeps; ++sweep) {
    for (std::size_t i = 0; i < n; ++i) {
      const double h = table.field(i, spins, boundary);
      if (ising) {
        double u = rng.uniform();
        if (options.mirrored) u = 1.0 - u;
        spins[i] = heat_bath_ising(beta, h, u);
      } else {
        double u1 = rng.uniform();
        const double u2 = rng.uniform();
        if (options.mirrored) u1 = 1.0 - u1;
        const auto outcome = metropolis_move(measure, spins[i], beta, h, config.proposal_width, u1, u2);
        ++proposals;
        accepted += outcome.accepted;
        spins[i] = outcome.value;
      }
    }
    // Same decision in the mirrored chain, so trajectories stay negated.
    if (options.component_flips)
      for (const auto& comp : free_components)
        if (flip_rng.uniform() < 0.5)
          for (auto i : comp) spins[i] = -spins[i];
    if (sweep > config.burn_in && (sweep - config.burn_in) % config.thin == 0) {
      double m = 0.0;
      for (auto i : subset) m += spins[i];
      result.sweep.push_back(sweep);
      result.magnetization.push_back(m / static_cast<double>(subset.size()));
      result.energy.push_back(table.energy(spins, boundary));
      if (options.keep_trajectory) result.trajectory.push_back(spins);
    }
  }
  result.m_mean = stats::mean(result.magnetization);
  result.e_mean = stats::mean(result.energy);
  result.m_se = stats::batch_means_se(result.magnetization, 20);
  result.tau_int = stats::integrated_autocorrelation_time(result.magnetization);
  result.unreliable = result.tau_int > static_cast<double>(result.magnetization.size()) / 50.0;
  result.acceptance = proposals ? static_cast<double>(accepted) / static_cast<double>(proposals) : 1.0;
  result.final_sigma.assign(graph.num_vertices(), 0.0);
  for (std::size_t i = 0; i < n; ++i) result.final_sigma[table.sites[i]] = spins[i];
  return result;
}

double magnetization(const SpinState& state, const std::vector<VertexId>& subset) {
  if (subset.empty()) throw InvalidParameter("magnetization of an empty subset");
  double m = 0.0;
  for (VertexId v : subset) m += state.value(v);
  return m / static_cast<double>(subset.size());
}

std::vector<VertexId> central_subset(const GilbertGraph& graph, const VertexMask& interior) {
  const double quarter = 0.25 * graph.window.side;
  std::vector<VertexId> central;
  for (VertexId v = 0; v < graph.num_vertices(); ++v) {
    if (!interior[v]) continue;
    bool inside = true;
    for (int k = 0; k < graph.window.dim; ++k) inside = inside && std::fabs(graph.positions[v][k]) <= quarter;
    if (inside) central.push_back(v);
  }
  if (central.empty()) return central;
  const auto lab = connected_components(graph);
  VertexId best = lab.labels[central.front()];
  for (VertexId v : central) {
    const VertexId l = lab.labels[v];
    if (lab.sizes[l] > lab.sizes[best] || (lab.sizes[l] == lab.sizes[best] && l < best)) best = l;
  }
  std::vector<VertexId> out;
  for (VertexId v : central)
    if (lab.labels[v] == best) out.push_back(v);
  return out;
}

// ---------------------------------------------------------------------------
// Exact oracles

IsingMoments exact_enumeration_ising(const GilbertGraph& graph, const VertexMask& interior,
                                     const InteractionProfile& profile, double beta, double boundary) {
  const Couplings table(graph, interior, profile);
  const std::size_t n = table.sites.size();
  if (n > 16) throw InvalidParameter("exact enumeration supports at most 16 interior sites");
  IsingMoments out;
  out.vertices = table.sites;
  out.means.assign(n, 0.0);
  out.pairs.assign(n, std::vector<double>(n, 0.0));
  if (n == 0) return out;
  // The kernel factorizes over connected pieces of the interior graph, so
  // each piece is enumerated on its own. Within a piece, states come in
  // flip pairs (sigma, -sigma): the interior part of -E is even and the
  // boundary part odd, so a piece with no boundary coupling gets means of
  // exactly zero.
  std::vector<std::size_t> piece(n, n);
  std::vector<std::vector<std::size_t>> pieces;
  for (std::size_t r = 0; r < n; ++r) {
    if (piece[r] != n) continue;
    pieces.emplace_back();
    std::vector<std::size_t> stack{r};
    piece[r] = pieces.size() - 1;
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      pieces.back().push_back(i);
      for (auto k = table.offset[i]; k < table.offset[i + 1]; ++k)
        if (piece[table.neighbor[k]] == n) {
          piece[table.neighbor[k]] = piece[r];
          stack.push_back(table.neighbor[k]);
        }
    }
    std::sort(pieces.back().begin(), pieces.back().end());
  }
  out.log_partition = 0.0;
  for (const auto& sites : pieces) {
    const std::size_t m = sites.size();
    std::vector<std::size_t> local(n, m);
    for (std::size_t a = 0; a < m; ++a) local[sites[a]] = a;
    const std::size_t half = std::size_t{1} << (m - 1);
    std::vector<double> even(half), odd(half), spins(m);
    double max_log = kNegInf;
    for (std::size_t s = 0; s < half; ++s) {
      const std::size_t full = s | half;
      for (std::size_t a = 0; a < m; ++a) spins[a] = (full >> a) & 1u ? 1.0 : -1.0;
      double ev = 0.0, od = 0.0;
      for (std::size_t a = 0; a < m; ++a) {
        const auto i = sites[a];
        od += table.boundary_phi[i] * boundary * spins[a];
        for (auto k = table.offset[i]; k < table.offset[i + 1]; ++k)
          if (table.neighbor[k] > i) ev += table.phi[k] * spins[a] * spins[local[table.neighbor[k]]];
      }
      even[s] = beta * ev;
      odd[s] = beta * od;
      max_log = std::max(max_log, even[s] + std::fabs(odd[s]));
    }
    double z = 0.0;
    std::vector<double> means(m, 0.0);
    std::vector<std::vector<double>> pairs(m, std::vector<double>(m, 0.0));
    for (std::size_t s = 0; s < half; ++s) {
      const std::size_t full = s | half;
      const double wp = std::exp(even[s] + odd[s] - max_log);
      const double wm = std::exp(even[s] - odd[s] - max_log);
      const double sum = wp + wm, diff = wp - wm;
      z += sum;
      for (std::size_t a = 0; a < m; ++a) {
        const double sa = (full >> a) & 1u ? 1.0 : -1.0;
        means[a] += diff * sa;
        for (std::size_t b = a + 1; b < m; ++b) pairs[a][b] += sum * sa * ((full >> b) & 1u ? 1.0 : -1.0);
      }
    }
    for (std::size_t a = 0; a < m; ++a) {
      out.means[sites[a]] = means[a] / z;
      for (std::size_t b = a + 1; b < m; ++b) out.pairs[sites[a]][sites[b]] = pairs[a][b] / z;
    }
    out.log_partition += max_log + std::log(z);
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.pairs[i][i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (piece[i] != piece[j]) out.pairs[i][j] = out.means[i] * out.means[j];
      out.pairs[j][i] = out.pairs[i][j];
    }
  }
  return out;
}

namespace {

// Per-site discretization of chi tilted by the site's boundary field:
// nodes t_i and log weights.
struct SiteRule {
  std::vector<double> nodes;
  std::vector<double> log_weights;
};

double tilted_limit(const SingleSpinMeasure& measure, double tilt) {
  // Smallest T beyond the maximizer of g(t) = -V(t) + tilt t (t >= 0) with
  // g(T) <= max g - log(1e16) - 4.
  auto g = [&](double t) { return -measure.potential(t) + tilt * t; };
  double hi = std::max(1.0, measure.support_limit());
  while (g(hi) > g(0.0) - 1.0 || g(2.0 * hi) > g(hi)) hi *= 2.0;
  double gmax = kNegInf;
  const int steps = 4000;
  for (int k = 0; k <= steps; ++k) gmax = std::max(gmax, g(hi * k / steps));
  const double target = gmax - kTruncationLog - 4.0;
  while (g(hi) > target) hi *= 1.5;
  // shrink towards the tail crossing
  double lo = 0.0;
  for (int k = 0; k <= steps; ++k)
    if (g(hi * k / steps) == gmax) lo = hi * k / steps;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > target ? lo : hi) = mid;
  }
  return hi;
}

SiteRule site_rule(const SingleSpinMeasure& measure, double limit, std::size_t n) {
  SiteRule r;
  if (measure.kind == MeasureKind::ising) {
    r.nodes = {-1.0, 1.0};
    r.log_weights = {std::log(0.5), std::log(0.5)};
    return r;
  }
  const auto gl = quad::gauss_legendre(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = limit * gl.nodes[i];
    r.nodes.push_back(t);
    r.log_weights.push_back(std::log(gl.weights[i] * limit) + measure.log_density(t));
  }
  return r;
}

std::vector<double> tensor_means(const std::vector<SiteRule>& rules, const std::vector<std::vector<double>>& coupling,
                                 const std::vector<double>& field, double beta) {
  const std::size_t k = rules.size();
  // Shifted exponentials of each factor keep every product <= 1.
  std::vector<std::vector<double>> single(k);
  for (std::size_t s = 0; s < k; ++s) {
    std::vector<double> lw;
    for (std::size_t i = 0; i < rules[s].nodes.size(); ++i)
      lw.push_back(rules[s].log_weights[i] + beta * field[s] * rules[s].nodes[i]);
    const double mx = *std::max_element(lw.begin(), lw.end());
    for (double& v : lw) v = std::exp(v - mx);
    single[s] = std::move(lw);
  }
  // pair[p][q] matrices for p < q
  std::vector<std::vector<std::vector<double>>> pair(k * k);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t q = p + 1; q < k; ++q) {
      const auto& a = rules[p].nodes;
      const auto& b = rules[q].nodes;
      std::vector<std::vector<double>> m(a.size(), std::vector<double>(b.size()));
      double mx = kNegInf;
      for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) mx = std::max(mx, beta * coupling[p][q] * a[i] * b[j]);
      for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) m[i][j] = std::exp(beta * coupling[p][q] * a[i] * b[j] - mx);
      pair[p * k + q] = std::move(m);
    }
  double z = 0.0;
  std::vector<double> first(k, 0.0);
  if (k == 1) {
    for (std::size_t i = 0; i < single[0].size(); ++i) {
      z += single[0][i];
      first[0] += single[0][i] * rules[0].nodes[i];
    }
  } else if (k == 2) {
    const auto& m01 = pair[1];
    for (std::size_t i = 0; i < single[0].size(); ++i)
      for (std::size_t j = 0; j < single[1].size(); ++j) {
        const double w = single[0][i] * single[1][j] * m01[i][j];
        z += w;
        first[0] += w * rules[0].nodes[i];
        first[1] += w * rules[1].nodes[j];
      }
  } else {
    const auto& m01 = pair[0 * 3 + 1];
    const auto& m02 = pair[0 * 3 + 2];
    const auto& m12 = pair[1 * 3 + 2];
    for (std::size_t i = 0; i < single[0].size(); ++i)
      for (std::size_t j = 0; j < single[1].size(); ++j) {
        const double wij = single[0][i] * single[1][j] * m01[i][j];
        double zk = 0.0, tk = 0.0;
        for (std::size_t l = 0; l < single[2].size(); ++l) {
          const double w = single[2][l] * m02[i][l] * m12[j][l];
          zk += w;
          tk += w * rules[2].nodes[l];
        }
        z += wij * zk;
        first[0] += wij * zk * rules[0].nodes[i];
        first[1] += wij * zk * rules[1].nodes[j];
        first[2] += wij * tk;
      }
  }
  for (double& f : first) f /= z;
  return first;
}

}  // namespace

Marginals quadrature_marginals(const GilbertGraph& graph, const VertexMask& interior, const SingleSpinMeasure& measure,
                               const InteractionProfile& profile, double beta, double boundary) {
  measure.validate();
  const Couplings table(graph, interior, profile);
  const std::size_t k = table.sites.size();
  if (k == 0 || k > 3) throw InvalidParameter("quadrature_marginals supports 1 to 3 interior sites");
  std::vector<std::vector<double>> coupling(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i)
    for (auto e = table.offset[i]; e < table.offset[i + 1]; ++e) coupling[i][table.neighbor[e]] += table.phi[e];
  std::vector<double> field(k);
  for (std::size_t i = 0; i < k; ++i) field[i] = table.boundary_phi[i] * boundary;

  // Integration limits per site: the tilt bound depends on the neighbors'
  // limits, so iterate to a fixed point.
  std::vector<double> limit(k, measure.support_limit());
  if (measure.kind == MeasureKind::gibbs_density) {
    for (int iter = 0; iter < 50; ++iter) {
      bool changed = false;
      for (std::size_t i = 0; i < k; ++i) {
        double tilt = std::fabs(field[i]);
        for (std::size_t j = 0; j < k; ++j) tilt += std::fabs(coupling[i][j]) * limit[j];
        const double next = std::max(measure.support_limit(), tilted_limit(measure, beta * tilt));
        if (std::fabs(next - limit[i]) > 1e-9 * next) changed = true;
        limit[i] = next;
      }
      if (!changed) break;
    }
  }

  Marginals out;
  out.vertices = table.sites;
  const std::size_t cap = k == 1 ? (1u << 16) : (k == 2 ? 4096 : 256);
  std::vector<double> previous;
  for (std::size_t nodes = 16; nodes <= cap; nodes *= 2) {
    std::vector<SiteRule> rules;
    for (std::size_t i = 0; i < k; ++i) rules.push_back(site_rule(measure, limit[i], nodes));
    auto means = tensor_means(rules, coupling, field, beta);
    if (measure.kind == MeasureKind::ising) {
      out.means = std::move(means);
      out.nodes = 2;
      return out;
    }
    if (!previous.empty()) {
      double diff = 0.0;
      for (std::size_t i = 0; i < k; ++i) diff = std::max(diff, std::fabs(means[i] - previous[i]));
      if (diff <= 1e-11) {
        out.means = std::move(means);
        out.nodes = nodes;
        return out;
      }
    }
    previous = std::move(means);
  }
  throw ConvergenceError("quadrature_marginals did not converge within the node cap");
}

MomentCheck check_moment_condition(const SingleSpinMeasure& measure, double u, double kappa) {
  if (!(u > 2.0) || !(kappa > 0.0)) throw InvalidParameter("moment condition needs u > 2 and kappa > 0");
  measure.validate();
  switch (measure.kind) {
    case MeasureKind::ising:
      return {true, std::exp(kappa)};
    case MeasureKind::uniform_interval: {
      const double b = measure.half_width;
      auto f = [&](double t) { return std::exp(kappa * std::pow(t, u)); };
      return {true, quad::integrate(f, 0.0, b, 1e-13, 1e-13).value / b};
    }
    case MeasureKind::gibbs_density:
      break;
  }
  // Tail of exp(kappa t^u - V(t)): V grows like v4 t^4 (or v2 t^2 when v4 = 0).
  const double tail_power = measure.v4 > 0.0 ? 4.0 : 2.0;
  const double tail_coef = measure.v4 > 0.0 ? measure.v4 : measure.v2;
  if (u > tail_power || (u == tail_power && kappa >= tail_coef)) return {false, std::numeric_limits<double>::infinity()};
  auto g = [&](double t) { return kappa * std::pow(t, u) - measure.potential(t); };
  // Integration limit: past the maximizer, where g drops log(1e16) + 4 below it.
  double hi = 1.0;
  while (g(2.0 * hi) > g(hi) || hi < measure.support_limit()) hi *= 2.0;
  double gmax = kNegInf;
  for (int s = 0; s <= 4000; ++s) gmax = std::max(gmax, g(hi * s / 4000.0));
  while (g(hi) > gmax - kTruncationLog - 4.0) hi *= 1.25;
  const double peak = measure.log_density_peak();
  auto num = [&](double t) { return std::exp(g(t) - gmax); };
  auto den = [&](double t) { return std::exp(-measure.potential(t) - peak); };
  const double top = quad::integrate(num, 0.0, hi, 0.0, 1e-13).value;
  const double bottom = quad::integrate(den, 0.0, std::max(hi, measure.support_limit()), 0.0, 1e-13).value;
  return {true, std::exp(gmax + peak) * top / bottom};
}

double temperedness(const GilbertGraph& graph, const SpinState& state, double alpha) {
  if (!(alpha > 0.0)) throw InvalidParameter("alpha must be positive");
  double sum = 0.0;
  for (VertexId v = 0; v < graph.num_vertices(); ++v)
    if (state.is_interior(v)) sum += state.sigma[v] * state.sigma[v] * weight(alpha, graph.positions[v], graph.window.dim);
  return sum;
}

}  // namespace qspin
