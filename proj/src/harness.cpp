#include "qspin/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "qspin/error.hpp"
#include "qspin/parallel.hpp"
#include "qspin/quadrature.hpp"
#include "qspin/rng.hpp"
#include "qspin/stats.hpp"

namespace qspin {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Stream tags for harness-level seeds; kept apart from the per-module
// Purpose tags so adding a stage never moves another stage's seeds.
constexpr std::uint64_t kRealizationTag = 101;
constexpr std::uint64_t kChainTag = 102;
constexpr std::uint64_t kPrepassTag = 103;
constexpr std::uint64_t kInstanceTag = 104;

const std::string F(double x) { return format_double(x); }

json optional_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

InteractionProfile profile_from(const ExperimentConfig& c) {
  InteractionProfile p;
  p.phi_star = c.phi_star;
  p.r_star = c.r_star;
  p.shape = parse_shape(c.shape);
  p.validate();
  return p;
}

// Replicate aggregate SE: the spread across replicates, but never below the
// pooled within-chain error.
double aggregate_se(const std::vector<double>& means, const std::vector<double>& ses) {
  double pooled = 0.0;
  for (double s : ses) pooled += s * s;
  pooled = std::sqrt(pooled) / static_cast<double>(ses.size());
  if (means.size() < 2) return pooled;
  return std::max(stats::standard_error(means), pooled);
}

// Default pre-pass grid: mean degrees bracketing the known 2-d and 3-d
// continuum thresholds (about 4.51 and 2.74).
std::vector<double> default_prepass_grid(int dim, double r_star) {
  const double lo = dim == 2 ? 3.5 : 2.0;
  const double hi = dim == 2 ? 5.5 : 3.5;
  const double v = ball_volume(dim, r_star);
  std::vector<double> grid;
  for (int k = 0; k <= 8; ++k) grid.push_back((lo + (hi - lo) * k / 8.0) / v);
  return grid;
}

}  // namespace

std::string RunManifest::to_json() const {
  json j;
  j["artifact_version"] = artifact_version;
  j["config_hash"] = config_hash;
  j["seeds"] = seeds;
  j["outputs"] = outputs;
  j["started_utc"] = started_utc;
  j["wall_clock_seconds"] = wall_clock_seconds;
  return j.dump(2) + "\n";
}

double boundary_magnitude(const SingleSpinMeasure& measure, std::optional<double> override_a) {
  if (override_a) {
    if (!(*override_a > 0.0)) throw InvalidParameter("boundary magnitude a must be positive");
    return *override_a;
  }
  if (measure.kind == MeasureKind::ising) return 1.0;
  return find_a(measure).usable();
}

double resolve_lambda_star(const ExperimentConfig& config, unsigned threads) {
  if (config.lambda_star) return *config.lambda_star;
  std::vector<double> sizes = config.sizes;
  if (sizes.empty())
    for (double k : {8.0, 16.0, 32.0}) sizes.push_back(k * config.r_star);
  const auto grid = default_prepass_grid(config.dim, config.r_star);
  ThresholdOptions opt;
  opt.threads = threads;
  opt.bootstrap = 0;
  const auto est = estimate_lambda_star(config.r_star, config.dim, sizes, grid, 100,
                                        derive_seed(config.seed, {kPrepassTag}), opt);
  return est.estimate;
}

PhaseDiagramResult compute_phase_diagram(const ExperimentConfig& config, double lambda_star, unsigned threads) {
  config.validate();
  if (config.measures.size() != 1) throw InvalidParameter("a phase diagram takes exactly one measure");
  const auto measure = SingleSpinMeasure::parse(config.measures.front());
  const auto profile = profile_from(config);
  PhaseDiagramResult res;
  res.measure = measure.describe();
  res.a = boundary_magnitude(measure, config.a);
  res.lambda_star = lambda_star;
  res.lambdas = config.lambdas;
  res.betas = config.betas;
  const std::size_t nl = res.lambdas.size(), nb = res.betas.size(), nr = config.replicates;

  // Realizations, one per (lambda, replicate).
  struct Realization {
    GilbertGraph graph;
    VertexMask interior;
    std::vector<VertexId> subset;
  };
  std::vector<Realization> real(nl * nr);
  const BoxWindow window{config.dim, config.side, BoundaryMode::free};
  parallel_for(nl * nr, threads, [&](std::size_t task) {
    const std::size_t i = task / nr, r = task % nr;
    auto& R = real[task];
    R.graph = build_graph(sample_poisson(res.lambdas[i], window, derive_seed(config.seed, {kRealizationTag, i}), r),
                          config.r_star);
    R.interior = collar_interior(R.graph, config.r_star);
    R.subset = central_subset(R.graph, R.interior);
    if (R.subset.empty()) R.subset = mask_vertices(R.interior);
  });

  res.cells.resize(nl * nr * nb);
  parallel_for(nl * nr * nb, threads, [&](std::size_t task) {
    const std::size_t j = task % nb, r = (task / nb) % nr, i = task / (nb * nr);
    const auto& R = real[i * nr + r];
    auto& cell = res.cells[task];
    cell.lambda_index = i;
    cell.beta_index = j;
    cell.replicate = r;
    cell.lambda = res.lambdas[i];
    cell.beta = res.betas[j];
    cell.vertices = R.graph.num_vertices();
    cell.interior = static_cast<std::size_t>(std::count(R.interior.begin(), R.interior.end(), 1));
    cell.subset = R.subset.size();
    if (R.subset.empty()) {
      // No interior spins at all: both boundary conditions give nothing to measure.
      cell.m_plus = cell.m_minus = 0.0;
      return;
    }
    ChainConfig cc;
    cc.beta = res.betas[j];
    cc.sweeps = config.sweeps;
    cc.burn_in = config.burn_in;
    cc.thin = config.thin;
    cc.proposal_width = config.proposal_width;
    cc.seed = derive_seed(config.seed, {kChainTag, i, j});
    cc.replicate = r;
    ChainOptions opt;
    opt.init = config.init == "random" ? InitialState::random : InitialState::aligned;
    opt.subset = R.subset;
    const auto plus = run_chain(R.graph, R.interior, measure, profile, res.a, cc, opt);
    opt.mirrored = true;
    const auto minus = run_chain(R.graph, R.interior, measure, profile, -res.a, cc, opt);
    cell.m_plus = plus.m_mean;
    cell.se_plus = plus.m_se;
    cell.m_minus = minus.m_mean;
    cell.se_minus = minus.m_se;
    cell.tau_int = std::max(plus.tau_int, minus.tau_int);
    cell.acceptance = plus.acceptance;
    cell.unreliable = plus.unreliable || minus.unreliable;
  });

  res.summary.resize(nl * nb);
  for (std::size_t i = 0; i < nl; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      std::vector<double> mp, sp, mm, sm;
      auto& s = res.summary[i * nb + j];
      s.lambda = res.lambdas[i];
      s.beta = res.betas[j];
      for (std::size_t r = 0; r < nr; ++r) {
        const auto& c = res.cells[(i * nr + r) * nb + j];
        mp.push_back(c.m_plus);
        sp.push_back(c.se_plus);
        mm.push_back(c.m_minus);
        sm.push_back(c.se_minus);
        s.tau_int = std::max(s.tau_int, c.tau_int);
        s.unreliable += c.unreliable;
      }
      s.m_plus = stats::mean(mp);
      s.se_plus = aggregate_se(mp, sp);
      s.m_minus = stats::mean(mm);
      s.se_minus = aggregate_se(mm, sm);
      s.difference = s.m_plus - s.m_minus;
      s.joint_se = s.se_plus + s.se_minus;
      s.evidence = s.difference > 3.0 * s.joint_se;
    }

  res.onset.assign(nl, std::nullopt);
  res.beta_star.assign(nl, std::nullopt);
  for (std::size_t i = 0; i < nl; ++i) {
    for (std::size_t j = 0; j < nb; ++j)
      if (res.at(i, j).evidence) {
        res.onset[i] = res.betas[j];
        break;
      }
    if (lambda_star > 0.0 && res.lambdas[i] > lambda_star)
      res.beta_star[i] = beta_star_bound(compute_q_star_bound(res.lambdas[i], lambda_star), config.phi_star, res.a);
  }
  return res;
}

PhaseDiagramResult run_phase_diagram(const ExperimentConfig& config, unsigned threads) {
  const double lambda_star = resolve_lambda_star(config, threads);
  const bool any_super =
      std::any_of(config.lambdas.begin(), config.lambdas.end(), [&](double l) { return l > lambda_star; });
  if (!any_super)
    throw InvalidParameter("every lambda in the grid is at or below the estimated critical intensity " +
                           F(lambda_star) + " (mean degree " + F(lambda_star * ball_volume(config.dim, config.r_star)) +
                           "); no long-range order is expected, add supercritical values");
  return compute_phase_diagram(config, lambda_star, threads);
}

ThresholdEstimate run_percolation_sweep(const ExperimentConfig& config, unsigned threads) {
  config.validate();
  ThresholdOptions opt;
  opt.threads = threads;
  opt.bootstrap = config.bootstrap;
  opt.mode = parse_boundary_mode(config.boundary_mode);
  std::vector<double> sizes = config.sizes;
  if (sizes.empty())
    for (double k : {16.0, 32.0, 64.0}) sizes.push_back(k * config.r_star);
  if (config.estimate == "lambda-star") {
    const auto grid = config.grid.empty() ? default_prepass_grid(config.dim, config.r_star) : config.grid;
    return estimate_lambda_star(config.r_star, config.dim, sizes, grid, config.replicates, config.seed, opt);
  }
  if (config.grid.empty()) throw InvalidParameter("q-star estimation needs a q grid");
  if (!(config.lambda_for_q > 0.0)) throw InvalidParameter("q-star estimation needs q_lambda > 0");
  return estimate_q_star_empirical(config.lambda_for_q, config.r_star, config.dim, sizes, config.grid,
                                   config.replicates, config.seed, opt);
}

double window_weight_integral(const BoxWindow& window, double alpha) {
  window.validate();
  if (!(alpha > 0.0)) throw InvalidParameter("alpha must be positive");
  const double h = 0.5 * window.side;
  const double tol = 1e-13;
  if (window.dim == 2) {
    auto outer = [&](double x) {
      return quad::integrate([&](double y) { return std::exp(-alpha * std::hypot(x, y)); }, 0.0, h, tol, 1e-13).value;
    };
    return 4.0 * quad::integrate(outer, 0.0, h, tol, 1e-12).value;
  }
  auto outer = [&](double x) {
    auto middle = [&](double y) {
      return quad::integrate([&](double z) { return std::exp(-alpha * std::sqrt(x * x + y * y + z * z)); }, 0.0, h,
                             tol, 1e-12)
          .value;
    };
    return quad::integrate(middle, 0.0, h, tol, 1e-11).value;
  };
  return 8.0 * quad::integrate(outer, 0.0, h, tol, 1e-10).value;
}

SparsityResult run_sparsity_report(const ExperimentConfig& config, unsigned threads) {
  config.validate();
  SparsityResult res;
  res.alpha = config.alpha;
  res.theta = config.theta;
  const std::size_t nl = config.lambdas.size(), nr = config.replicates;
  const BoxWindow window{config.dim, config.side, parse_boundary_mode(config.boundary_mode)};
  res.reports.resize(nl * nr);
  res.lambda_index.resize(nl * nr);
  parallel_for(nl * nr, threads, [&](std::size_t task) {
    const std::size_t i = task / nr, r = task % nr;
    const auto graph = build_graph(
        sample_poisson(config.lambdas[i], window, derive_seed(config.seed, {kRealizationTag, i}), r), config.r_star);
    res.reports[task] = sparsity_functionals(graph, config.alpha, config.theta);
    res.lambda_index[task] = i;
  });
  const double wint = window_weight_integral(window, config.alpha);
  for (std::size_t i = 0; i < nl; ++i) {
    std::vector<double> as, bs;
    for (std::size_t r = 0; r < nr; ++r) {
      as.push_back(res.reports[i * nr + r].a_gamma);
      bs.push_back(res.reports[i * nr + r].b_gamma);
    }
    SparsityAggregate g;
    g.lambda = config.lambdas[i];
    g.replicates = nr;
    g.mean_a = stats::mean(as);
    g.se_a = stats::standard_error(as);
    g.a_bound = expected_a_bound(g.lambda, config.alpha, config.theta, config.r_star, config.dim);
    g.mean_b = stats::mean(bs);
    g.se_b = stats::standard_error(bs);
    g.expected_b = g.lambda * wint;
    g.a_within_bound = g.mean_a <= g.a_bound + 3.0 * g.se_a;
    g.b_consistent = std::fabs(g.mean_b - g.expected_b) <= 3.0 * g.se_b + 1e-12 * g.expected_b;
    res.aggregates.push_back(g);
  }
  return res;
}

TinyInstance random_tiny_instance(std::uint64_t seed, std::uint64_t index) {
  Stream rng(derive_seed(seed, {kInstanceTag, index}), {static_cast<std::uint64_t>(Purpose::instance)});
  const std::size_t k = 1 + static_cast<std::size_t>(3.0 * rng.uniform());
  const std::size_t e = 1 + static_cast<std::size_t>(3.0 * rng.uniform());
  PointConfiguration pc;
  pc.window = BoxWindow{2, 2.0, BoundaryMode::free};
  for (std::size_t v = 0; v < k + e; ++v) pc.points.push_back({2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0, 0.0});
  TinyInstance inst;
  inst.graph = brute_force_graph(pc, 1.5);
  inst.interior.assign(k + e, 0);
  for (std::size_t v = 0; v < k; ++v) inst.interior[v] = 1;
  inst.profile.r_star = 1.5;
  inst.profile.phi_star = 0.2 + 0.8 * rng.uniform();
  inst.profile.shape = rng.uniform() < 0.5 ? InteractionProfile::Shape::constant : InteractionProfile::Shape::linear_taper;
  inst.beta = 0.2 + 1.3 * rng.uniform();
  return inst;
}

std::vector<WellsSuiteEntry> run_wells_suite(const ExperimentConfig& config, unsigned threads) {
  config.validate();
  std::vector<WellsSuiteEntry> out;
  for (std::size_t mi = 0; mi < config.measures.size(); ++mi) {
    WellsSuiteEntry entry;
    entry.measure = SingleSpinMeasure::parse(config.measures[mi]);
    entry.feasible = find_a(entry.measure);
    const double a = config.a ? *config.a : entry.feasible.usable();
    entry.certificate = verify_one_site_positivity(entry.measure, a, config.max_exponent);
    std::vector<double> margin(config.instances, 0.0);
    std::vector<std::uint8_t> holds(config.instances, 0);
    const std::uint64_t seed = derive_seed(config.seed, {mi});
    parallel_for(config.instances, threads, [&](std::size_t n) {
      const auto inst = random_tiny_instance(seed, n);
      const auto cmp = finite_volume_wells_check(inst.graph, inst.interior, entry.measure, inst.profile, a, inst.beta);
      double worst = INFINITY;
      for (std::size_t s = 0; s < cmp.lhs.size(); ++s) worst = std::min(worst, cmp.lhs[s] - cmp.rhs[s]);
      margin[n] = worst;
      holds[n] = cmp.holds;
    });
    entry.comparisons = config.instances;
    entry.comparisons_holding = static_cast<std::size_t>(std::count(holds.begin(), holds.end(), 1));
    entry.worst_margin = margin.empty() ? 0.0 : *std::min_element(margin.begin(), margin.end());
    out.push_back(entry);
  }
  return out;
}

std::string phase_diagram_json(const PhaseDiagramResult& r) {
  json j;
  j["measure"] = r.measure;
  j["a"] = r.a;
  j["lambda_star"] = r.lambda_star;
  j["lambdas"] = r.lambdas;
  j["betas"] = r.betas;
  json rows = json::array();
  for (const auto& s : r.summary)
    rows.push_back({{"lambda", s.lambda},
                    {"beta", s.beta},
                    {"m_plus", s.m_plus},
                    {"se_plus", s.se_plus},
                    {"m_minus", s.m_minus},
                    {"se_minus", s.se_minus},
                    {"difference", s.difference},
                    {"joint_se", s.joint_se},
                    {"tau_int", s.tau_int},
                    {"unreliable_replicates", s.unreliable},
                    {"evidence", s.evidence}});
  j["cells"] = rows;
  json onset = json::array(), bstar = json::array();
  for (std::size_t i = 0; i < r.lambdas.size(); ++i) {
    onset.push_back(optional_json(r.onset[i]));
    bstar.push_back(optional_json(r.beta_star[i]));
  }
  j["onset_beta"] = onset;
  j["beta_star"] = bstar;
  return j.dump(2) + "\n";
}

void write_phase_diagram_csv(std::ostream& out, const PhaseDiagramResult& r) {
  out << "lambda,beta,replicate,vertices,interior,subset,m_plus,se_plus,m_minus,se_minus,tau_int,acceptance,"
         "unreliable\n";
  for (const auto& c : r.cells)
    out << F(c.lambda) << ',' << F(c.beta) << ',' << c.replicate << ',' << c.vertices << ',' << c.interior << ','
        << c.subset << ',' << F(c.m_plus) << ',' << F(c.se_plus) << ',' << F(c.m_minus) << ',' << F(c.se_minus)
        << ',' << F(c.tau_int) << ',' << F(c.acceptance) << ',' << (c.unreliable ? 1 : 0) << '\n';
}

std::string sparsity_json(const SparsityResult& r) {
  json j;
  j["alpha"] = r.alpha;
  j["theta"] = r.theta;
  json rows = json::array();
  for (const auto& g : r.aggregates)
    rows.push_back({{"lambda", g.lambda},
                    {"replicates", g.replicates},
                    {"mean_a", g.mean_a},
                    {"se_a", g.se_a},
                    {"a_bound", g.a_bound},
                    {"mean_b", g.mean_b},
                    {"se_b", g.se_b},
                    {"expected_b", g.expected_b},
                    {"a_within_bound", g.a_within_bound},
                    {"b_consistent", g.b_consistent}});
  j["aggregates"] = rows;
  return j.dump(2) + "\n";
}

void write_sparsity_csv(std::ostream& out, const SparsityResult& r) {
  out << "lambda,replicate,a_gamma,b_gamma,max_degree,mean_degree\n";
  std::vector<std::size_t> seen(r.aggregates.size(), 0);
  for (std::size_t t = 0; t < r.reports.size(); ++t) {
    const auto i = r.lambda_index[t];
    const auto& s = r.reports[t];
    out << F(r.aggregates[i].lambda) << ',' << seen[i]++ << ',' << F(s.a_gamma) << ',' << F(s.b_gamma) << ','
        << s.max_degree << ',' << F(s.mean_degree) << '\n';
  }
}

std::string wells_suite_json(const std::vector<WellsSuiteEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) {
    json j;
    j["measure"] = e.measure.describe();
    j["find_a"] = e.feasible.a;
    j["attained"] = e.feasible.attained;
    j["certificate"] = json::parse(certificate_json(e.certificate));
    j["comparisons"] = e.comparisons;
    j["comparisons_holding"] = e.comparisons_holding;
    j["worst_margin"] = e.worst_margin;
    arr.push_back(j);
  }
  return json{{"measures", arr}}.dump(2) + "\n";
}

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<ChartSeries>& series) {
  const double W = 640, H = 420, left = 70, right = 150, top = 40, bottom = 50;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, s.y[k]);
      y1 = std::max(y1, s.y[k]);
    }
  if (!(x1 > x0)) {
    x0 -= 1.0;
    x1 += 1.0;
  }
  if (!(y1 > y0)) {
    y0 -= 1.0;
    y1 += 1.0;
  }
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (W - left - right); };
  auto py = [&](double y) { return H - bottom - (y - y0) / (y1 - y0) * (H - top - bottom); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  std::ostringstream o;
  o.precision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
    << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    o << "<text x=\"" << px(xv) << "\" y=\"" << H - bottom + 16 << "\" text-anchor=\"middle\" font-size=\"11\">" << xv
      << "</text>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << yv
      << "</text>\n";
  }
  o << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"13\">"
    << x_label << "</text>\n";
  o << "<text x=\"16\" y=\"" << (top + H - bottom) / 2 << "\" transform=\"rotate(-90 16 " << (top + H - bottom) / 2
    << ")\" text-anchor=\"middle\" font-size=\"13\">" << y_label << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* c = colors[s % 7];
    o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < series[s].x.size(); ++k) o << px(series[s].x[k]) << ',' << py(series[s].y[k]) << ' ';
    o << "\"/>\n";
    o << "<text x=\"" << W - right + 10 << "\" y=\"" << top + 16 * (s + 1) << "\" fill=\"" << c
      << "\" font-size=\"12\">" << series[s].label << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

RunManifest run_experiment(const ExperimentConfig& config, const std::string& output_dir, unsigned threads) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RunManifest m;
  m.started_utc = utc_now();
  m.config_hash = config.hash();
  m.seeds["master"] = config.seed;
  const fs::path root(output_dir);
  for (const char* sub : {"points", "graphs", "sweeps"}) fs::create_directories(root / sub);
  auto emit = [&](const std::string& rel, const std::string& text) {
    write_text(root / rel, text);
    m.outputs.push_back(rel);
  };
  for (std::size_t i = 0; i < config.lambdas.size(); ++i)
    m.seeds["realization/lambda" + std::to_string(i)] = derive_seed(config.seed, {kRealizationTag, i});

  if (config.kind == "percolation-sweep") {
    const auto est = run_percolation_sweep(config, threads);
    std::ostringstream csv;
    write_threshold_csv(csv, est);
    emit("sweeps/threshold.csv", csv.str());
    emit("threshold.json", threshold_json(est));
  } else if (config.kind == "chain") {
    const auto measure = SingleSpinMeasure::parse(config.measures.front());
    const auto profile = profile_from(config);
    const BoxWindow window{config.dim, config.side, BoundaryMode::free};
    const auto points = sample_poisson(config.lambdas.front(), window, derive_seed(config.seed, {kRealizationTag, 0}));
    const auto graph = build_graph(points, config.r_star);
    const auto interior = collar_interior(graph, config.r_star);
    std::ostringstream pts, edges;
    write_points_csv(pts, points);
    write_edges_csv(edges, graph);
    emit("points/points.csv", pts.str());
    emit("graphs/edges.csv", edges.str());
    const double s = config.boundary_value;
    std::vector<ChainResult> runs(config.replicates);
    ChainConfig cc;
    cc.beta = config.betas.front();
    cc.sweeps = config.sweeps;
    cc.burn_in = config.burn_in;
    cc.thin = config.thin;
    cc.proposal_width = config.proposal_width;
    cc.seed = derive_seed(config.seed, {kChainTag, 0, 0});
    m.seeds["chain"] = cc.seed;
    ChainOptions opt;
    opt.init = config.init == "random" ? InitialState::random : InitialState::aligned;
    parallel_for(config.replicates, threads, [&](std::size_t r) {
      auto c = cc;
      c.replicate = r;
      runs[r] = run_chain(graph, interior, measure, profile, s, c, opt);
    });
    json summary = json::array();
    for (std::size_t r = 0; r < runs.size(); ++r) {
      std::ostringstream traj;
      traj << "sweep,magnetization,energy\n";
      for (std::size_t k = 0; k < runs[r].sweep.size(); ++k)
        traj << runs[r].sweep[k] << ',' << F(runs[r].magnetization[k]) << ',' << F(runs[r].energy[k]) << '\n';
      emit("sweeps/chain_r" + std::to_string(r) + ".csv", traj.str());
      summary.push_back({{"replicate", r},
                         {"beta", cc.beta},
                         {"lambda", config.lambdas.front()},
                         {"s", s},
                         {"m_mean", runs[r].m_mean},
                         {"m_se", runs[r].m_se},
                         {"tau_int", runs[r].tau_int},
                         {"e_mean", runs[r].e_mean},
                         {"acceptance", runs[r].acceptance},
                         {"unreliable", runs[r].unreliable},
                         {"seeds", {{"points", points.seed}, {"chain", cc.seed}}}});
    }
    json j{{"measure", measure.describe()}, {"runs", summary}};
    emit("chain.json", j.dump(2) + "\n");
  } else if (config.kind == "phase-diagram") {
    const auto res = run_phase_diagram(config, threads);
    if (!config.lambda_star) m.seeds["prepass"] = derive_seed(config.seed, {kPrepassTag});
    for (std::size_t i = 0; i < config.lambdas.size(); ++i)
      for (std::size_t j = 0; j < config.betas.size(); ++j)
        m.seeds["chain/lambda" + std::to_string(i) + "/beta" + std::to_string(j)] =
            derive_seed(config.seed, {kChainTag, i, j});
    // Replicate 0 of each lambda, for inspection.
    const BoxWindow window{config.dim, config.side, BoundaryMode::free};
    for (std::size_t i = 0; i < config.lambdas.size(); ++i) {
      const auto seed = derive_seed(config.seed, {kRealizationTag, i});
      m.seeds["realization/lambda" + std::to_string(i)] = seed;
      const auto points = sample_poisson(config.lambdas[i], window, seed, 0);
      std::ostringstream pts, edges;
      write_points_csv(pts, points);
      write_edges_csv(edges, build_graph(points, config.r_star));
      emit("points/lambda" + std::to_string(i) + "_r0.csv", pts.str());
      emit("graphs/lambda" + std::to_string(i) + "_r0.csv", edges.str());
    }
    std::ostringstream csv;
    write_phase_diagram_csv(csv, res);
    emit("sweeps/phase_diagram.csv", csv.str());
    emit("phase_diagram.json", phase_diagram_json(res));
  } else if (config.kind == "sparsity-report") {
    const auto res = run_sparsity_report(config, threads);
    std::ostringstream csv;
    write_sparsity_csv(csv, res);
    emit("sweeps/sparsity.csv", csv.str());
    emit("sparsity.json", sparsity_json(res));
  } else if (config.kind == "wells-suite") {
    for (std::size_t mi = 0; mi < config.measures.size(); ++mi)
      m.seeds["instances/measure" + std::to_string(mi)] = derive_seed(config.seed, {mi});
    emit("wells.json", wells_suite_json(run_wells_suite(config, threads)));
  }
  emit("config.txt", config.source.canonical());
  m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_text(root / "manifest.json", m.to_json());
  return m;
}

std::vector<std::pair<std::string, bool>> check_outputs(const std::string& output_dir) {
  const fs::path root(output_dir);
  std::vector<std::pair<std::string, bool>> checks;
  if (fs::exists(root / "phase_diagram.json")) {
    const auto j = json::parse(read_text(root / "phase_diagram.json"));
    const auto lambdas = j["lambdas"].get<std::vector<double>>();
    const auto betas = j["betas"].get<std::vector<double>>();
    const auto& cells = j["cells"];
    std::size_t violations = 0;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      if (j["beta_star"][i].is_null()) continue;
      for (std::size_t b = 0; b + 1 < betas.size(); ++b) {
        const auto& c0 = cells[i * betas.size() + b];
        const auto& c1 = cells[i * betas.size() + b + 1];
        const double se = std::hypot(c0["se_plus"].get<double>(), c1["se_plus"].get<double>());
        if (c1["m_plus"].get<double>() < c0["m_plus"].get<double>() - 3.0 * se) ++violations;
      }
    }
    const std::size_t allowed = (cells.size() + 19) / 20;
    checks.push_back({"phase diagram: m(+a) non-decreasing in beta (" + std::to_string(violations) +
                          " 3-SE violations, allowed " + std::to_string(allowed) + ")",
                      violations <= allowed});
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      if (j["beta_star"][i].is_null()) continue;
      const double bs = j["beta_star"][i].get<double>();
      // First grid beta at or above the bound; the onset may not come later.
      auto it = std::lower_bound(betas.begin(), betas.end(), bs);
      if (it == betas.end()) continue;
      const bool ok = !j["onset_beta"][i].is_null() && j["onset_beta"][i].get<double>() <= *it;
      checks.push_back({"phase diagram: onset at lambda=" + F(lambdas[i]) + " no later than beta*=" + F(bs), ok});
    }
  }
  if (fs::exists(root / "sparsity.json")) {
    const auto j = json::parse(read_text(root / "sparsity.json"));
    for (const auto& g : j["aggregates"]) {
      const std::string at = "lambda=" + F(g["lambda"].get<double>());
      checks.push_back({"sparsity: mean a_gamma within bound + 3 SE at " + at, g["a_within_bound"].get<bool>()});
      checks.push_back({"sparsity: mean b_gamma within 3 SE of expectation at " + at, g["b_consistent"].get<bool>()});
    }
  }
  if (fs::exists(root / "wells.json")) {
    const auto j = json::parse(read_text(root / "wells.json"));
    for (const auto& e : j["measures"]) {
      const std::string name = e["measure"].get<std::string>();
      checks.push_back({"wells: one-site integrals nonnegative for " + name,
                        e["certificate"]["all_nonnegative"].get<bool>()});
      checks.push_back({"wells: finite-volume comparison holds for " + name,
                        e["comparisons_holding"].get<std::size_t>() == e["comparisons"].get<std::size_t>()});
    }
  }
  if (fs::exists(root / "threshold.json")) {
    const auto j = json::parse(read_text(root / "threshold.json"));
    const double est = j["estimate"].get<double>();
    checks.push_back({"threshold: confidence interval brackets the estimate",
                      j["ci_low"].get<double>() <= est && est <= j["ci_high"].get<double>()});
  }
  return checks;
}

std::vector<std::string> render_report(const std::string& output_dir) {
  const fs::path root(output_dir);
  std::vector<std::string> written;
  if (fs::exists(root / "phase_diagram.json")) {
    const auto j = json::parse(read_text(root / "phase_diagram.json"));
    const auto lambdas = j["lambdas"].get<std::vector<double>>();
    const auto betas = j["betas"].get<std::vector<double>>();
    std::vector<ChartSeries> series;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      ChartSeries s;
      s.label = "lambda=" + F(lambdas[i]);
      for (std::size_t b = 0; b < betas.size(); ++b) {
        s.x.push_back(betas[b]);
        s.y.push_back(j["cells"][i * betas.size() + b]["m_plus"].get<double>());
      }
      series.push_back(s);
    }
    write_text(root / "phase_diagram.svg", svg_line_chart("m(+a) by beta", "beta", "m(+a)", series));
    written.push_back("phase_diagram.svg");
  }
  if (fs::exists(root / "sweeps" / "threshold.csv")) {
    std::ifstream in(root / "sweeps" / "threshold.csv");
    std::string line;
    std::getline(in, line);
    std::map<double, ChartSeries> by_size;
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string L, p, prob;
      std::getline(ss, L, ',');
      std::getline(ss, p, ',');
      std::getline(ss, prob, ',');
      auto& s = by_size[std::stod(L)];
      s.label = "L=" + L;
      s.x.push_back(std::stod(p));
      s.y.push_back(std::stod(prob));
    }
    std::vector<ChartSeries> series;
    for (auto& [size, s] : by_size) series.push_back(s);
    write_text(root / "threshold.svg", svg_line_chart("spanning probability", "parameter", "P(span)", series));
    written.push_back("threshold.svg");
  }
  return written;
}

}  // namespace qspin
