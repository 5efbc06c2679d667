// Scenario runner: conditional-expectation dynamics on grids, two-level spin
// systems, Pauli channels, and finite-dimensional operator algebras.

#include <CLI11.hpp>
#include <cstdio>

#include "qcx/scenario.hpp"

namespace {

int cmd_run(const std::string& path, const qcx::RunOptions& opt) {
  qcx::Scenario sc;
  try {
    sc = qcx::Scenario::parse_file(path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  qcx::RunReport rep = qcx::run_scenario(sc, opt);
  for (const auto& r : rep.results) {
    std::printf("[%s] %s", r.pass ? "PASS" : "FAIL", r.name.c_str());
    for (const auto& [k, v] : r.values) {
      auto it = r.tolerances.find(k);
      if (it != r.tolerances.end())
        std::printf("  %s=%.3e (<= %.3e)", k.c_str(), v, it->second);
      else
        std::printf("  %s=%.3e", k.c_str(), v);
    }
    if (!r.note.empty()) std::printf("  [%s]", r.note.c_str());
    std::printf("\n");
  }
  std::printf("%s: %s in %.2f s (digest %s)\n", rep.scenario_name.c_str(),
              rep.all_pass() ? "all analyses passed" : "TOLERANCE FAILURES",
              rep.wall_seconds, rep.config_digest.c_str());
  return rep.all_pass() ? 0 : 1;
}

int cmd_validate(const std::string& path) {
  try {
    qcx::Scenario sc = qcx::Scenario::parse_file(path);
    std::printf("%s: valid (%zu analyses, kind %s)\n", sc.name.c_str(),
                sc.analyses.size(), sc.kind.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

int cmd_list() {
  for (const auto& e : qcx::analysis_catalog()) {
    std::printf("%-32s %s\n", e.name.c_str(), e.verifies.c_str());
    std::printf("%-32s parameters: %s\n", "", e.params.c_str());
  }
  std::printf("%zu analyses available\n", qcx::analysis_catalog().size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qcondex: quantum conditional-expectation dynamics"};
  app.require_subcommand(1);

  std::string path;
  qcx::RunOptions opt;
  long long seed = -1;

  CLI::App* run = app.add_subcommand("run", "run a scenario file");
  run->add_option("file", path, "scenario JSON file")->required();
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--out-dir", opt.out_dir_override, "output directory");
  run->add_option("--threads", opt.threads, "worker cap for analyses");
  run->add_flag("--strict", opt.strict, "fail on any tolerance breach");

  CLI::App* validate = app.add_subcommand("validate", "parse and check a scenario");
  validate->add_option("file", path, "scenario JSON file")->required();

  app.add_subcommand("list", "list available analyses");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (run->parsed()) {
    if (seed >= 0) opt.seed_override = static_cast<std::uint64_t>(seed);
    return cmd_run(path, opt);
  }
  if (validate->parsed()) return cmd_validate(path);
  return cmd_list();
}
