#pragma once

#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qcx {

using Json = nlohmann::json;

// thrown for malformed or semantically invalid scenario files
struct ScenarioError : std::runtime_error {
  explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

struct AnalysisSpec {
  std::string name;
  Json params;   // analysis-specific parameters, may be empty
  bool gate = true;  // participates in the process exit status
};

struct Scenario {
  std::string name;
  std::string kind;  // bohm_1d, bohm_magnetic_2d, spin_static, pauli_1d,
                     // pauli_2d, finite_algebra_suite, quasiprob_suite
  Json grid;         // {dim, n, length} when applicable
  Json config;       // potential / vector_potential / b_field
  Json initial_state;
  std::string scheme = "split_step";
  double dt = 1e-3;
  int steps = 0;
  int snapshot_stride = 10;
  std::uint64_t seed = 1;
  std::string output_dir;
  std::vector<AnalysisSpec> analyses;
  Json raw;

  static Scenario parse_file(const std::string& path);
  static Scenario parse_json(const Json& j);
};

struct AnalysisResult {
  std::string name;
  std::map<std::string, double> values;
  std::map<std::string, double> tolerances;  // value key -> bound
  bool pass = true;
  std::string note;
};

struct RunReport {
  std::string scenario_name;
  std::vector<AnalysisResult> results;
  double wall_seconds = 0.0;
  std::string config_digest;
  std::string code_version;

  bool all_pass() const {
    for (const auto& r : results)
      if (!r.pass) return false;
    return true;
  }
  Json to_json() const;
};

struct RunOptions {
  std::string out_dir_override;
  std::optional<std::uint64_t> seed_override;
  int threads = 1;
  bool strict = false;
};

RunReport run_scenario(const Scenario& sc, const RunOptions& opt = {});

struct CatalogEntry {
  std::string name;
  std::string verifies;  // the identity or statistic the analysis checks
  std::string params;    // parameter schema summary
};
const std::vector<CatalogEntry>& analysis_catalog();

std::string config_digest(const Json& j);

}  // namespace qcx
