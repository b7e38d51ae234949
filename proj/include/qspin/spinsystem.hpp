#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qspin/geomgraph.hpp"

namespace qspin {

enum class MeasureKind { ising, uniform_interval, gibbs_density };

/// A priori single-spin law chi, normalized to a probability measure and
/// symmetric under t -> -t.
///   ising:            atoms at +-1, weight 1/2 each
///   uniform_interval: uniform on [-half_width, half_width]
///   gibbs_density:    density proportional to exp(-(v4 t^4 + v2 t^2));
///                     v4 > 0, or v4 == 0 with v2 > 0 (Gaussian)
struct SingleSpinMeasure {
  MeasureKind kind = MeasureKind::ising;
  double half_width = 1.0;
  double v4 = 1.0;
  double v2 = 0.0;

  static SingleSpinMeasure ising();
  static SingleSpinMeasure uniform(double half_width);
  static SingleSpinMeasure quartic(double v4, double v2);
  /// Centered Gaussian with the given variance.
  static SingleSpinMeasure gaussian(double variance = 1.0);
  /// "ising", "uniform:B", "quartic:V4,V2", "gaussian[:VAR]".
  static SingleSpinMeasure parse(const std::string& spec);
  std::string describe() const;

  void validate() const;
  bool continuous() const { return kind != MeasureKind::ising; }
  /// Potential V(t) = v4 t^4 + v2 t^2 (gibbs_density only).
  double potential(double t) const;
  /// Unnormalized log density; -infinity outside the support. Continuous
  /// measures only.
  double log_density(double t) const;
  /// max over t of log_density.
  double log_density_peak() const;
  /// Support, truncated for densities where the density falls below
  /// 1e-16 of its peak.
  double support_limit() const;
  /// Var(chi) = E[t^2].
  double variance() const;
};

/// phi(r): constant phi_star on [0, r_star], or a linear taper from
/// 2 phi_star at r = 0 to phi_star at r = r_star; zero beyond r_star.
struct InteractionProfile {
  enum class Shape { constant, linear_taper };
  double phi_star = 1.0;
  double r_star = 1.0;
  Shape shape = Shape::constant;

  double operator()(double r) const;
  void validate() const;
  InteractionProfile scaled(double factor) const;
};

std::string to_string(InteractionProfile::Shape shape);
InteractionProfile::Shape parse_shape(const std::string& text);

using VertexMask = std::vector<std::uint8_t>;

/// Vertices whose sup-norm position is at most L/2 - margin; the rest form
/// the collar that carries the boundary spin.
VertexMask collar_interior(const GilbertGraph& graph, double margin);
std::vector<VertexId> mask_vertices(const VertexMask& mask);

/// Spin values on interior vertices; every exterior vertex carries the
/// constant boundary value.
struct SpinState {
  std::vector<double> sigma;  // indexed by vertex; exterior entries unused
  VertexMask interior;
  double boundary = 0.0;

  bool is_interior(VertexId v) const { return interior[v] != 0; }
  double value(VertexId v) const { return interior[v] ? sigma[v] : boundary; }
};

SpinState make_state(const GilbertGraph& graph, VertexMask interior, double boundary, double initial);

/// E with -E = sum_{interior pairs} phi sigma_x sigma_y
///           + sum_{interior x, exterior y} phi sigma_x s.
double relative_energy(const GilbertGraph& graph, const SpinState& state, const InteractionProfile& profile);

/// Coefficient of sigma_x in -E: sum over neighbors y of phi(|x-y|) times
/// sigma_y (interior) or s (exterior).
double local_field(const GilbertGraph& graph, const SpinState& state, const InteractionProfile& profile, VertexId x);

/// Heat-bath draw for an Ising spin in field h: +1 iff u < e^{bh}/(e^{bh}+e^{-bh}),
/// evaluated as 2u - 1 < tanh(beta h) so that (h, u) -> (-h, 1 - u)
/// returns exactly the opposite spin.
double heat_bath_ising(double beta, double h, double u);
void heat_bath_step_ising(const GilbertGraph& graph, SpinState& state, const InteractionProfile& profile,
                          VertexId x, double beta, double u);

/// Metropolis update for a continuous spin: proposal sigma + width (2 u1 - 1),
/// accepted iff u2 < exp(beta h (s' - s)) rho(s') / rho(s).
double metropolis_continuous(const SingleSpinMeasure& measure, double sigma, double beta, double h, double width,
                             double u1, double u2);
/// Returns true if the proposal was accepted.
bool metropolis_step_continuous(const GilbertGraph& graph, SpinState& state, const InteractionProfile& profile,
                                const SingleSpinMeasure& measure, VertexId x, double beta, double width, double u1,
                                double u2);

struct ChainConfig {
  double beta = 1.0;
  std::size_t sweeps = 1000;  // total, including burn-in
  std::size_t burn_in = 100;
  std::size_t thin = 1;
  double proposal_width = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;

  void validate() const;
};

enum class InitialState { aligned, random };

struct ChainOptions {
  InitialState init = InitialState::aligned;
  /// Uses 1 - u for the heat-bath uniform and for the Metropolis proposal
  /// uniform. With boundary -s and a negated start this reproduces the
  /// negated trajectory of the unmirrored chain.
  bool mirrored = false;
  /// Overrides `init` (indexed by vertex).
  std::optional<std::vector<double>> initial_sigma;
  /// Vertices averaged into the recorded magnetization; empty = all interior.
  std::vector<VertexId> subset;
  bool keep_trajectory = false;
  /// After each sweep, flip every interior component that has no coupling
  /// to the boundary with probability 1/2 (not mirrored).
  bool component_flips = true;
};

struct ChainResult {
  std::vector<std::size_t> sweep;
  std::vector<double> magnetization;
  std::vector<double> energy;
  double m_mean = 0.0;
  double m_se = 0.0;  // batch means, 20 batches
  double tau_int = 0.5;
  double e_mean = 0.0;
  double acceptance = 1.0;
  bool unreliable = false;  // tau_int > records / 50
  std::vector<double> final_sigma;
  std::vector<std::vector<double>> trajectory;  // interior spins per record
};

/// Systematic-scan MCMC for the finite-volume Gibbs kernel with constant
/// boundary value. Heat bath for Ising spins, Metropolis otherwise.
ChainResult run_chain(const GilbertGraph& graph, const VertexMask& interior, const SingleSpinMeasure& measure,
                      const InteractionProfile& profile, double boundary, const ChainConfig& config,
                      const ChainOptions& options = {});

/// Mean spin over `subset` (throws on an empty subset).
double magnetization(const SpinState& state, const std::vector<VertexId>& subset);

/// Interior vertices of the central half-window that belong to the largest
/// component meeting that region. Falls back to all central interior
/// vertices when no component qualifies.
std::vector<VertexId> central_subset(const GilbertGraph& graph, const VertexMask& interior);

struct IsingMoments {
  std::vector<VertexId> vertices;          // interior vertices, increasing
  std::vector<double> means;               // <sigma_x>
  std::vector<std::vector<double>> pairs;  // <sigma_x sigma_y>
  double log_partition = 0.0;
};

/// Exact Ising moments by summing all 2^n interior states (n <= 16).
IsingMoments exact_enumeration_ising(const GilbertGraph& graph, const VertexMask& interior,
                                     const InteractionProfile& profile, double beta, double boundary);

struct Marginals {
  std::vector<VertexId> vertices;
  std::vector<double> means;
  std::size_t nodes = 0;  // per-site rule size at convergence
};

/// Per-site means of the finite-volume kernel for <= 3 interior sites by
/// tensor-product Gauss-Legendre quadrature, doubling the node count until
/// successive means agree to 1e-11. Ising sites are summed exactly.
Marginals quadrature_marginals(const GilbertGraph& graph, const VertexMask& interior, const SingleSpinMeasure& measure,
                               const InteractionProfile& profile, double beta, double boundary);

struct MomentCheck {
  bool finite = false;
  double value = 0.0;  // integral of exp(kappa |t|^u) chi(dt) when finite
};

/// Exponential moment condition: int exp(kappa |t|^u) chi(dt) < infinity.
MomentCheck check_moment_condition(const SingleSpinMeasure& measure, double u, double kappa);

/// sum over interior x of sigma_x^2 w_alpha(x).
double temperedness(const GilbertGraph& graph, const SpinState& state, double alpha);

}  // namespace qspin
