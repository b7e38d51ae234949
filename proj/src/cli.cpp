#include "qspin/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "qspin/config.hpp"
#include "qspin/error.hpp"
#include "qspin/harness.hpp"
#include "qspin/percolation.hpp"
#include "qspin/pointprocess.hpp"

namespace qspin {

namespace {

namespace fs = std::filesystem;

// Raw string values of the flags a subcommand was given, keyed by config key.
using Flags = std::map<std::string, std::string>;

void flag(CLI::App* app, Flags& flags, const std::string& name, const std::string& key, const std::string& help) {
  app->add_option(name, flags[key], help);
}

KeyValueDocument to_document(const Flags& flags, const std::string& base_file = "") {
  KeyValueDocument doc;
  if (!base_file.empty()) {
    std::ifstream in(base_file);
    if (!in) throw InvalidParameter("cannot read config file '" + base_file + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    doc = KeyValueDocument::parse(ss.str());
  }
  for (const auto& [key, value] : flags)
    if (!value.empty()) doc.set(key, value);
  return doc;
}

void set_default(KeyValueDocument& doc, const std::string& key, const std::string& value) {
  if (!doc.has(key)) doc.set(key, value);
}

std::string hash_text(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Single-file outputs keep their manifest next to them.
void write_file_with_manifest(const std::string& path, const std::string& payload, const KeyValueDocument& doc,
                              std::map<std::string, std::uint64_t> seeds,
                              std::chrono::steady_clock::time_point started) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << payload;
  }
  RunManifest m;
  m.config_hash = hash_text(doc.canonical());
  m.seeds = std::move(seeds);
  m.outputs = {fs::path(path).filename().string()};
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  m.started_utc = buf;
  m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::ofstream mf(path + ".manifest.json", std::ios::binary);
  mf << m.to_json();
}

void emit(const std::string& output, const std::string& payload, const KeyValueDocument& doc,
          std::map<std::string, std::uint64_t> seeds, std::chrono::steady_clock::time_point started,
          std::ostream& out) {
  if (output.empty()) out << payload;
  else write_file_with_manifest(output, payload, doc, std::move(seeds), started);
}

PointConfiguration points_from(const KeyValueDocument& doc) {
  if (doc.has("points")) {
    std::ifstream in(doc.get_string("points", ""));
    if (!in) throw InvalidParameter("cannot read points file '" + doc.get_string("points", "") + "'");
    return read_points_csv(in);
  }
  if (!doc.has("lambda") || !doc.has("side")) throw InvalidParameter("need --points or --lambda and --side");
  BoxWindow w;
  w.dim = static_cast<int>(doc.get_int("dim", 2));
  w.side = doc.get_double("side", 0.0);
  w.boundary = parse_boundary_mode(doc.get_string("boundary_mode", "free"));
  w.validate();
  return sample_poisson(doc.get_double("lambda", 0.0), w, doc.get_uint("seed", 0), doc.get_uint("replicate", 0));
}

void add_generation_flags(CLI::App* app, Flags& f) {
  flag(app, f, "--lambda", "lambda", "Poisson intensity");
  flag(app, f, "--dim", "dim", "dimension (2 or 3)");
  flag(app, f, "--side", "side", "window side length");
  flag(app, f, "--boundary", "boundary_mode", "free or torus");
  flag(app, f, "--seed", "seed", "master seed");
  flag(app, f, "--replicate", "replicate", "replicate index");
}

void add_model_flags(CLI::App* app, Flags& f) {
  flag(app, f, "--lambda", "lambda", "intensity or comma-separated grid");
  flag(app, f, "--dim", "dim", "dimension (2 or 3)");
  flag(app, f, "--side", "side", "window side length");
  flag(app, f, "--rstar", "r_star", "interaction radius");
  flag(app, f, "--phi", "phi_star", "coupling strength on [0, r*]");
  flag(app, f, "--shape", "shape", "constant or linear-taper");
  flag(app, f, "--measure", "measure", "ising, uniform:B, quartic:V4,V2, double-well, gaussian[:VAR]");
  flag(app, f, "--beta", "beta", "inverse temperature or grid");
  flag(app, f, "--a", "a", "boundary magnitude (default from the measure)");
  flag(app, f, "--lambda-star", "lambda_star", "critical intensity (skips the pre-pass)");
  flag(app, f, "--sweeps", "sweeps", "total sweeps per chain");
  flag(app, f, "--burn-in", "burn_in", "burn-in sweeps");
  flag(app, f, "--thin", "thin", "record every n-th sweep");
  flag(app, f, "--width", "proposal_width", "Metropolis proposal half-width");
  flag(app, f, "--replicates", "replicates", "independent replicates");
  flag(app, f, "--init", "init", "aligned or random");
  flag(app, f, "--boundary-value", "boundary", "boundary spin (chain)");
  flag(app, f, "--seed", "seed", "master seed");
}

int finish_report(const std::string& dir, bool check, bool svg, std::ostream& out, std::ostream& err) {
  if (!fs::is_directory(dir)) throw InvalidParameter("no such output directory '" + dir + "'");
  if (svg)
    for (const auto& f : render_report(dir)) out << "wrote " << (fs::path(dir) / f).string() << "\n";
  const auto checks = check_outputs(dir);
  bool ok = true;
  for (const auto& [what, passed] : checks) {
    out << (passed ? "PASS " : "FAIL ") << what << "\n";
    ok = ok && passed;
  }
  if (check && checks.empty()) {
    err << "no checkable aggregates under " << dir << "\n";
    return kExitCheckFailed;
  }
  return check && !ok ? kExitCheckFailed : kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"qspin: quenched spin systems on Poisson point configurations", "qspin"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = available parallelism)");

  Flags gen_f, graph_f, perc_f, thin_f, chain_f, sweep_f, wells_f;
  std::string output, config_file, report_dir;
  bool check = false, svg = false;

  auto* gen = app.add_subcommand("gen", "sample a Poisson point configuration");
  add_generation_flags(gen, gen_f);
  gen->add_option("-o,--output", output, "point CSV (stdout if omitted)");

  auto* graph = app.add_subcommand("graph", "build the Gilbert graph");
  add_generation_flags(graph, graph_f);
  flag(graph, graph_f, "--points", "points", "point CSV to read instead of sampling");
  flag(graph, graph_f, "--rstar", "r_star", "connection radius");
  flag(graph, graph_f, "--alpha", "alpha", "emit sparsity functionals at this alpha");
  flag(graph, graph_f, "--theta", "theta", "degree exponent for the sparsity functional");
  graph->add_option("-o,--output", output, "edge CSV (stdout if omitted)");

  auto* perc = app.add_subcommand("percolate", "finite-size-scaling threshold estimate");
  flag(perc, perc_f, "--estimate", "estimate", "lambda-star or q-star");
  flag(perc, perc_f, "--dim", "dim", "dimension");
  flag(perc, perc_f, "--rstar", "r_star", "connection radius");
  flag(perc, perc_f, "--sizes", "sizes", "window sides, comma-separated");
  flag(perc, perc_f, "--grid", "grid", "lambda or q grid, comma-separated");
  flag(perc, perc_f, "--lambda", "q_lambda", "intensity for q-star");
  flag(perc, perc_f, "--replicates", "replicates", "realizations per grid point");
  flag(perc, perc_f, "--bootstrap", "bootstrap", "bootstrap resamples");
  flag(perc, perc_f, "--boundary", "boundary_mode", "free (spanning) or torus (wrapping)");
  flag(perc, perc_f, "--seed", "seed", "master seed");
  perc->add_option("--config", config_file, "config file");
  std::string csv_out;
  perc->add_option("--csv", csv_out, "also write the spanning curves as CSV");
  perc->add_option("-o,--output", output, "JSON file (stdout if omitted)");

  auto* thin = app.add_subcommand("thin", "Bernoulli bond thinning of the Gilbert graph");
  add_generation_flags(thin, thin_f);
  flag(thin, thin_f, "--points", "points", "point CSV to read instead of sampling");
  flag(thin, thin_f, "--rstar", "r_star", "connection radius");
  flag(thin, thin_f, "--q", "q", "retention probability");
  thin->add_option("-o,--output", output, "edge CSV (stdout if omitted)");

  auto* chain = app.add_subcommand("chain", "run MCMC chains on one realization");
  add_model_flags(chain, chain_f);
  chain->add_option("--config", config_file, "config file");
  chain->add_option("-o,--output", output, "output directory");

  auto* sweep = app.add_subcommand("sweep", "run the experiment described by a config file");
  sweep->add_option("config", config_file, "config file")->required();
  flag(sweep, sweep_f, "--seed", "seed", "override the master seed");
  sweep->add_option("-o,--output", output, "output directory (overrides output_dir)");

  auto* wells = app.add_subcommand("wells", "one-site positivity certificate and finite-volume comparisons");
  flag(wells, wells_f, "--measure", "measure", "measure specs, comma-separated");
  flag(wells, wells_f, "--a", "a", "boundary magnitude (default: feasible supremum)");
  flag(wells, wells_f, "-M,--max-exponent", "max_exponent", "largest exponent checked");
  flag(wells, wells_f, "--instances", "instances", "random tiny comparison instances");
  flag(wells, wells_f, "--seed", "seed", "master seed");
  wells->add_option("-o,--output", output, "output directory (JSON to stdout if omitted)");

  auto* report = app.add_subcommand("report", "summarize an output directory");
  report->add_option("dir", report_dir, "output directory")->required();
  report->add_flag("--check", check, "exit 3 if any recorded check fails");
  report->add_flag("--svg", svg, "write SVG charts next to the aggregates");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitInvalid;
  }

  const auto started = std::chrono::steady_clock::now();
  try {
    if (gen->parsed()) {
      const auto doc = to_document(gen_f);
      if (!doc.has("lambda") || !doc.has("side")) throw InvalidParameter("gen needs --lambda and --side");
      const auto pts = points_from(doc);
      std::ostringstream csv;
      write_points_csv(csv, pts);
      emit(output, csv.str(), doc, {{"points", pts.seed}}, started, out);
    } else if (graph->parsed()) {
      const auto doc = to_document(graph_f);
      if (!doc.has("r_star")) throw InvalidParameter("graph needs --rstar");
      const auto g = build_graph(points_from(doc), doc.get_double("r_star", 0.0));
      std::ostringstream payload;
      if (doc.has("alpha") || doc.has("theta")) {
        const auto s = sparsity_functionals(g, doc.get_double("alpha", 1.0), doc.get_double("theta", 1.0));
        nlohmann::ordered_json j{{"alpha", s.alpha},       {"theta", s.theta},           {"a_gamma", s.a_gamma},
                                 {"b_gamma", s.b_gamma},   {"max_degree", s.max_degree}, {"mean_degree", s.mean_degree},
                                 {"vertices", g.num_vertices()}, {"edges", g.num_edges()}};
        payload << j.dump(2) << "\n";
      } else {
        write_edges_csv(payload, g);
      }
      emit(output, payload.str(), doc, {{"points", doc.get_uint("seed", 0)}}, started, out);
    } else if (perc->parsed()) {
      auto doc = to_document(perc_f, config_file);
      doc.set("kind", "percolation-sweep");
      set_default(doc, "replicates", "200");
      if (perc_f["estimate"].empty() && !doc.has("estimate")) doc.set("estimate", "lambda-star");
      const auto config = ExperimentConfig::from_document(doc);
      const auto est = run_percolation_sweep(config, threads);
      if (!csv_out.empty()) {
        std::ostringstream csv;
        write_threshold_csv(csv, est);
        write_file_with_manifest(csv_out, csv.str(), doc, {{"master", config.seed}}, started);
      }
      emit(output, threshold_json(est), doc, {{"master", config.seed}}, started, out);
    } else if (thin->parsed()) {
      const auto doc = to_document(thin_f);
      if (!doc.has("r_star") || !doc.has("q")) throw InvalidParameter("thin needs --rstar and --q");
      const double q = doc.get_double("q", 1.0);
      if (!(q >= 0.0 && q <= 1.0)) throw InvalidParameter("q must lie in [0, 1]");
      const auto g = build_graph(points_from(doc), doc.get_double("r_star", 0.0));
      const auto seed = doc.get_uint("seed", 0);
      std::ostringstream payload;
      write_edges_csv(payload, bernoulli_thin(g, q, seed, doc.get_uint("replicate", 0)));
      emit(output, payload.str(), doc, {{"thinning", seed}}, started, out);
    } else if (chain->parsed()) {
      auto doc = to_document(chain_f, config_file);
      doc.set("kind", "chain");
      const auto config = ExperimentConfig::from_document(doc);
      const auto dir = output.empty() ? config.output_dir : output;
      const auto m = run_experiment(config, dir, threads);
      out << "wrote " << m.outputs.size() << " files and manifest.json to " << dir << "\n";
    } else if (sweep->parsed()) {
      auto doc = to_document(sweep_f, config_file);
      const auto config = ExperimentConfig::from_document(doc);
      const auto dir = output.empty() ? config.output_dir : output;
      const auto m = run_experiment(config, dir, threads);
      out << "wrote " << m.outputs.size() << " files and manifest.json to " << dir << "\n";
    } else if (wells->parsed()) {
      auto doc = to_document(wells_f);
      doc.set("kind", "wells-suite");
      set_default(doc, "measure", "ising,uniform:1,double-well");
      const auto config = ExperimentConfig::from_document(doc);
      if (output.empty()) {
        out << wells_suite_json(run_wells_suite(config, threads));
      } else {
        const auto m = run_experiment(config, output, threads);
        out << "wrote " << m.outputs.size() << " files and manifest.json to " << output << "\n";
      }
    } else if (report->parsed()) {
      return finish_report(report_dir, check, svg, out, err);
    }
  } catch (const InvalidParameter& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const Unsupported& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace qspin
