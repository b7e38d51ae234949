#include "qspin/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "qspin/error.hpp"

namespace qspin {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto t = trim(text);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw InvalidParameter("config key '" + key + "': not a number: '" + text + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, ',')) out.push_back(unquote(trim(item)));
  return out;
}

void require_increasing(const std::string& key, const std::vector<double>& xs) {
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1])) throw InvalidParameter("grid '" + key + "' must be strictly increasing");
}

const std::set<std::string> kKnownKeys{
    "kind",      "dim",        "side",         "boundary_mode",  "sizes",    "lambda",        "r_star",
    "phi_star",  "shape",      "measure",      "beta",           "a",        "lambda_star",   "estimate",
    "grid",      "q_lambda",   "replicates",   "sweeps",         "burn_in",  "thin",          "proposal_width",
    "init",      "boundary",   "alpha",        "theta",          "max_exponent", "instances", "bootstrap",
    "seed",      "output_dir"};

}  // namespace

KeyValueDocument KeyValueDocument::parse(const std::string& text) {
  KeyValueDocument doc;
  std::stringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidParameter("config line " + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw InvalidParameter("config line " + std::to_string(lineno) + ": empty key");
    if (doc.values_.count(key)) throw InvalidParameter("config key '" + key + "' given twice");
    doc.values_[key] = trim(line.substr(eq + 1));
  }
  return doc;
}

std::string KeyValueDocument::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : unquote(it->second);
}

double KeyValueDocument::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : to_double(key, it->second);
}

std::int64_t KeyValueDocument::get_int(const std::string& key, std::int64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::int64_t v = 0;
  const auto t = trim(it->second);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw InvalidParameter("config key '" + key + "': not an integer");
  return v;
}

std::uint64_t KeyValueDocument::get_uint(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::uint64_t v = 0;
  const auto t = trim(it->second);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw InvalidParameter("config key '" + key + "': not a nonnegative integer");
  return v;
}

std::vector<double> KeyValueDocument::get_list(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(it->second)) out.push_back(to_double(key, item));
  return out;
}

std::string KeyValueDocument::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

ExperimentConfig ExperimentConfig::from_document(const KeyValueDocument& doc) {
  for (const auto& [key, value] : doc.values())
    if (!kKnownKeys.count(key)) throw InvalidParameter("unknown config key '" + key + "'");
  ExperimentConfig c;
  c.source = doc;
  c.kind = doc.get_string("kind", c.kind);
  c.dim = static_cast<int>(doc.get_int("dim", c.dim));
  c.side = doc.get_double("side", c.side);
  c.boundary_mode = doc.get_string("boundary_mode", c.boundary_mode);
  c.sizes = doc.get_list("sizes", c.sizes);
  c.lambdas = doc.get_list("lambda", c.lambdas);
  c.r_star = doc.get_double("r_star", c.r_star);
  c.phi_star = doc.get_double("phi_star", c.phi_star);
  c.shape = doc.get_string("shape", c.shape);
  if (doc.has("measure")) c.measures = split_list(doc.get_string("measure", ""));
  c.betas = doc.get_list("beta", c.betas);
  if (doc.has("a") && doc.get_string("a", "") != "auto") c.a = doc.get_double("a", 0.0);
  if (doc.has("lambda_star")) c.lambda_star = doc.get_double("lambda_star", 0.0);
  c.estimate = doc.get_string("estimate", c.estimate);
  c.grid = doc.get_list("grid", c.grid);
  c.lambda_for_q = doc.get_double("q_lambda", c.lambda_for_q);
  c.replicates = doc.get_uint("replicates", c.replicates);
  c.sweeps = doc.get_uint("sweeps", c.sweeps);
  c.burn_in = doc.get_uint("burn_in", c.burn_in);
  c.thin = doc.get_uint("thin", c.thin);
  c.proposal_width = doc.get_double("proposal_width", c.proposal_width);
  c.init = doc.get_string("init", c.init);
  c.boundary_value = doc.get_double("boundary", c.boundary_value);
  c.alpha = doc.get_double("alpha", c.alpha);
  c.theta = doc.get_double("theta", c.theta);
  c.max_exponent = static_cast<int>(doc.get_int("max_exponent", c.max_exponent));
  c.instances = doc.get_uint("instances", c.instances);
  c.bootstrap = doc.get_uint("bootstrap", c.bootstrap);
  c.seed = doc.get_uint("seed", c.seed);
  c.output_dir = doc.get_string("output_dir", c.output_dir);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
  return from_document(KeyValueDocument::parse(text));
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidParameter("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

void ExperimentConfig::validate() const {
  static const std::set<std::string> kinds{"percolation-sweep", "chain", "phase-diagram", "wells-suite",
                                           "sparsity-report"};
  if (!kinds.count(kind)) throw InvalidParameter("unknown experiment kind '" + kind + "'");
  if (dim != 2 && dim != 3) throw InvalidParameter("dim must be 2 or 3");
  if (!(side > 0.0)) throw InvalidParameter("side must be positive");
  if (boundary_mode != "free" && boundary_mode != "torus") throw InvalidParameter("boundary_mode must be free or torus");
  if (!(r_star > 0.0) || !(phi_star > 0.0)) throw InvalidParameter("r_star and phi_star must be positive");
  if (replicates < 1) throw InvalidParameter("replicates must be >= 1");
  if (!(sweeps > burn_in)) throw InvalidParameter("sweeps must exceed burn_in");
  if (thin < 1) throw InvalidParameter("thin must be >= 1");
  if (init != "aligned" && init != "random") throw InvalidParameter("init must be aligned or random");
  if (estimate != "lambda-star" && estimate != "q-star") throw InvalidParameter("estimate must be lambda-star or q-star");
  require_increasing("lambda", lambdas);
  require_increasing("beta", betas);
  require_increasing("sizes", sizes);
  require_increasing("grid", grid);
  for (double l : lambdas)
    if (!(l > 0.0)) throw InvalidParameter("lambda values must be positive");
  for (double b : betas)
    if (!(b >= 0.0)) throw InvalidParameter("beta values must be >= 0");
  if (measures.empty()) throw InvalidParameter("at least one measure is required");
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : source.canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace qspin
