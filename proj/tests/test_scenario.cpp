#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "qcx/io.hpp"
#include "qcx/scenario.hpp"
#include "qcx/states.hpp"

using namespace qcx;

namespace {
Json minimal_scenario() {
  return Json::parse(R"({
    "name": "minimal",
    "kind": "bohm_1d",
    "grid": {"dim": 1, "n": 256, "length": 24.0},
    "initial_state": {"type": "gaussian", "center": [0,0,0], "sigma": 1.0, "k": [0,0,0]},
    "analyses": [{"name": "weak_value_checks"}]
  })");
}
}  // namespace

TEST_CASE("scenario parsing fills defaults and validates") {
  Scenario sc = Scenario::parse_json(minimal_scenario());
  CHECK(sc.dt == 1e-3);
  CHECK(sc.snapshot_stride == 10);
  CHECK(sc.scheme == "split_step");
  CHECK(sc.seed == 1);

  Json bad = minimal_scenario();
  bad["analyses"][0]["name"] = "no_such_analysis";
  CHECK_THROWS_AS(Scenario::parse_json(bad), ScenarioError);

  Json badpol = minimal_scenario();
  badpol["analyses"][0]["params"]["a_policy"] = -1.0;
  CHECK_THROWS_AS(Scenario::parse_json(badpol), ScenarioError);

  Json badgrid = minimal_scenario();
  badgrid["grid"]["n"] = 100;
  CHECK_THROWS_AS(Scenario::parse_json(badgrid), ScenarioError);

  Json badkind = minimal_scenario();
  badkind["kind"] = "unknown";
  CHECK_THROWS_AS(Scenario::parse_json(badkind), ScenarioError);
}

TEST_CASE("catalog is populated") {
  CHECK(analysis_catalog().size() >= 30);
  bool has_bridge = false, has_two_fluid = false;
  for (const auto& e : analysis_catalog()) {
    if (e.name == "bridge_identity") has_bridge = true;
    if (e.name == "two_fluid") has_two_fluid = true;
    CHECK(!e.verifies.empty());
  }
  CHECK(has_bridge);
  CHECK(has_two_fluid);
}

TEST_CASE("run produces a report and honors seeds deterministically") {
  Scenario sc = Scenario::parse_json(minimal_scenario());
  RunReport a = run_scenario(sc);
  RunReport b = run_scenario(sc);
  CHECK(a.all_pass());
  REQUIRE(a.results.size() == b.results.size());
  for (std::size_t i = 0; i < a.results.size(); ++i)
    for (const auto& [k, v] : a.results[i].values)
      CHECK(v == b.results[i].values.at(k));  // bit-identical rerun
  CHECK(a.config_digest == b.config_digest);
}

TEST_CASE("field snapshot files round-trip") {
  UniformGrid g(1, 64, 10.0);
  GridWaveFunction f = gaussian_state(g, {0.2, 0, 0}, 0.8, {1.0, 0, 0});
  const std::string dir = std::filesystem::temp_directory_path().string();
  write_field_csv(dir + "/qcx_f.csv", f);
  GridWaveFunction back = read_field_csv(dir + "/qcx_f.csv");
  CHECK(back.grid == f.grid);
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(std::abs(back.amp[i] - f.amp[i]) < 1e-15);

  write_field_binary(dir + "/qcx_f.qcxf", f);
  GridWaveFunction bb = read_field_binary(dir + "/qcx_f.qcxf");
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(bb.amp[i] == f.amp[i]);  // binary round-trip is exact

  CHECK_THROWS(read_field_csv(dir + "/qcx_missing.csv"));
}

TEST_CASE("threaded analysis execution matches serial") {
  Json j = minimal_scenario();
  j["analyses"] = Json::array({Json{{"name", "weak_value_checks"}},
                               Json{{"name", "conditional_variance_identity"}},
                               Json{{"name", "fisher_identities"}}});
  Scenario sc = Scenario::parse_json(j);
  RunOptions serial;
  RunOptions threaded;
  threaded.threads = 3;
  RunReport a = run_scenario(sc, serial);
  RunReport b = run_scenario(sc, threaded);
  REQUIRE(a.results.size() == b.results.size());
  for (std::size_t i = 0; i < a.results.size(); ++i) {
    CHECK(a.results[i].pass == b.results[i].pass);
    for (const auto& [k, v] : a.results[i].values)
      CHECK(v == b.results[i].values.at(k));
  }
}
