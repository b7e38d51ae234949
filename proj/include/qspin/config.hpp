#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qspin {

/// Flat `key = value` document (TOML subset: comments with '#', lists as
/// comma-separated values, optional double quotes around strings).
class KeyValueDocument {
 public:
  static KeyValueDocument parse(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  /// Keys sorted, one `key = value` per line; the hashed identity of a run.
  std::string canonical() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Everything a harness run needs; a run is fully determined by this.
struct ExperimentConfig {
  std::string kind = "phase-diagram";  // percolation-sweep | chain | phase-diagram | wells-suite | sparsity-report
  int dim = 2;
  double side = 24.0;
  std::string boundary_mode = "free";
  std::vector<double> sizes;  // percolation sweeps
  std::vector<double> lambdas{1.0};
  double r_star = 1.0;
  double phi_star = 1.0;
  std::string shape = "constant";
  std::vector<std::string> measures{"ising"};
  std::vector<double> betas{1.0};
  std::optional<double> a;             // boundary magnitude; default from the measure
  std::optional<double> lambda_star;   // skips the percolation pre-pass
  std::string estimate = "lambda-star";
  std::vector<double> grid;            // lambda or q grid for percolation sweeps
  double lambda_for_q = 0.0;
  std::size_t replicates = 1;
  std::size_t sweeps = 2000;
  std::size_t burn_in = 500;
  std::size_t thin = 1;
  double proposal_width = 1.0;
  std::string init = "aligned";
  double boundary_value = 1.0;         // chain kind
  double alpha = 1.0;
  double theta = 1.0;
  int max_exponent = 8;
  std::size_t instances = 50;          // wells-suite random comparisons
  std::size_t bootstrap = 200;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  KeyValueDocument source;

  static ExperimentConfig from_document(const KeyValueDocument& doc);
  static ExperimentConfig from_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
  void validate() const;
  /// FNV-1a 64 of the canonical document, hex.
  std::string hash() const;
};

}  // namespace qspin
