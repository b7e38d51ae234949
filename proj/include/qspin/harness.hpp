#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qspin/config.hpp"
#include "qspin/geomgraph.hpp"
#include "qspin/percolation.hpp"
#include "qspin/spinsystem.hpp"
#include "qspin/wells.hpp"

namespace qspin {

inline constexpr const char* kArtifactVersion = "qspin-1.0.0";

struct RunManifest {
  std::string config_hash;
  std::map<std::string, std::uint64_t> seeds;
  std::string artifact_version = kArtifactVersion;
  double wall_clock_seconds = 0.0;
  std::string started_utc;
  std::vector<std::string> outputs;  // relative to the output directory

  std::string to_json() const;
};

/// One chain pair (+a and mirrored -a) on one realization.
struct PhaseCell {
  std::size_t lambda_index = 0, beta_index = 0, replicate = 0;
  double lambda = 0.0, beta = 0.0;
  std::size_t vertices = 0, interior = 0, subset = 0;
  double m_plus = 0.0, se_plus = 0.0;
  double m_minus = 0.0, se_minus = 0.0;
  double tau_int = 0.0;
  double acceptance = 1.0;
  bool unreliable = false;
};

/// Replicate aggregate of one (lambda, beta) grid cell.
struct PhaseSummary {
  double lambda = 0.0, beta = 0.0;
  double m_plus = 0.0, se_plus = 0.0;
  double m_minus = 0.0, se_minus = 0.0;
  double difference = 0.0;  // m_plus - m_minus
  double joint_se = 0.0;    // se_plus + se_minus
  double tau_int = 0.0;     // worst over replicates
  std::size_t unreliable = 0;
  bool evidence = false;    // difference > 3 joint_se
};

struct PhaseDiagramResult {
  std::string measure;
  double a = 1.0;
  double lambda_star = 0.0;
  std::vector<double> lambdas, betas;
  std::vector<PhaseCell> cells;          // long form, (lambda, replicate, beta) order
  std::vector<PhaseSummary> summary;     // (lambda, beta) order
  std::vector<std::optional<double>> onset;      // smallest beta with evidence
  std::vector<std::optional<double>> beta_star;  // sufficient bound, supercritical lambda only

  const PhaseSummary& at(std::size_t lambda_index, std::size_t beta_index) const {
    return summary[lambda_index * betas.size() + beta_index];
  }
};

/// Boundary magnitude used by the phase diagram: 1 for Ising, otherwise the
/// usable Wells value of the measure (unless `override_a` is set).
double boundary_magnitude(const SingleSpinMeasure& measure, std::optional<double> override_a = std::nullopt);

/// Critical intensity from the configured percolation pre-pass, or the
/// configured lambda_star when given.
double resolve_lambda_star(const ExperimentConfig& config, unsigned threads);

/// Phase-diagram sweep at a known lambda_star, with no check on the grid.
PhaseDiagramResult compute_phase_diagram(const ExperimentConfig& config, double lambda_star, unsigned threads);

/// Full pipeline: threshold pre-pass, supercriticality check, sweep.
/// Throws InvalidParameter when every lambda is at or below lambda_star.
PhaseDiagramResult run_phase_diagram(const ExperimentConfig& config, unsigned threads);

/// Threshold estimate for a percolation-sweep config (lambda-star or q-star).
/// Sizes default to {16, 32, 64} r_star.
ThresholdEstimate run_percolation_sweep(const ExperimentConfig& config, unsigned threads);

struct SparsityAggregate {
  double lambda = 0.0;
  std::size_t replicates = 0;
  double mean_a = 0.0, se_a = 0.0;
  double a_bound = 0.0;
  double mean_b = 0.0, se_b = 0.0;
  double expected_b = 0.0;  // lambda times the window integral of w_alpha
  bool a_within_bound = false;
  bool b_consistent = false;
};

struct SparsityResult {
  double alpha = 1.0, theta = 1.0;
  std::vector<SparsityReport> reports;  // (lambda, replicate) order
  std::vector<std::size_t> lambda_index;
  std::vector<SparsityAggregate> aggregates;
};

/// Integral of exp(-alpha |x|) over the window, by nested quadrature.
double window_weight_integral(const BoxWindow& window, double alpha);

SparsityResult run_sparsity_report(const ExperimentConfig& config, unsigned threads);

/// Tiny comparison instance: 1..3 interior sites plus 1..3 collar sites in a
/// 2-d box, Gilbert graph at r_star = 1.5, random coupling and temperature.
struct TinyInstance {
  GilbertGraph graph;
  VertexMask interior;
  InteractionProfile profile;
  double beta = 1.0;
};
TinyInstance random_tiny_instance(std::uint64_t seed, std::uint64_t index);

struct WellsSuiteEntry {
  SingleSpinMeasure measure;
  FeasibleA feasible;
  WellsCertificate certificate;
  std::size_t comparisons = 0;
  std::size_t comparisons_holding = 0;
  double worst_margin = 0.0;  // min over instances and sites of lhs - rhs
};

std::vector<WellsSuiteEntry> run_wells_suite(const ExperimentConfig& config, unsigned threads);

std::string phase_diagram_json(const PhaseDiagramResult& result);
void write_phase_diagram_csv(std::ostream& out, const PhaseDiagramResult& result);
std::string sparsity_json(const SparsityResult& result);
void write_sparsity_csv(std::ostream& out, const SparsityResult& result);
std::string wells_suite_json(const std::vector<WellsSuiteEntry>& entries);

/// Line chart: one polyline per series. Pure file output.
struct ChartSeries {
  std::string label;
  std::vector<double> x, y;
};
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<ChartSeries>& series);

/// Runs the experiment described by `config`, writing data files under
/// `output_dir` and `manifest.json` last. Data files are byte-identical for
/// any thread count.
RunManifest run_experiment(const ExperimentConfig& config, const std::string& output_dir, unsigned threads);

/// Checks recorded in aggregate JSON files under `output_dir`. Each entry is
/// (description, passed).
std::vector<std::pair<std::string, bool>> check_outputs(const std::string& output_dir);

/// Writes SVG charts for the aggregates found under `output_dir`; returns the
/// files written.
std::vector<std::string> render_report(const std::string& output_dir);

}  // namespace qspin
