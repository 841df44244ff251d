#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pbsurf/error.hpp"
#include "pbsurf/examples.hpp"
#include "scenario.hpp"

using namespace pbsurf;
using namespace pbsurf::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = PBSURF_SCENARIO_DIR;
const std::string kTool = PBSURF_TOOL_PATH;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pbsurf_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const ReportRow& row(const ScenarioResult& r, const std::string& check) {
  for (const auto& x : r.rows) {
    if (x.check == check) return x;
  }
  FAIL("no row " << check);
  return r.rows.front();
}

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("malformed scenario reports a parse error with its position") {
  const fs::path dir = scratch("parse");
  write_text(dir / "bad.json", "{\n  \"id\": \"x\",\n  \"cover\": {\n");
  try {
    run_scenario(dir / "bad.json");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse);
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  CHECK(shell(kTool + " run " + (dir / "bad.json").string()) == 2);
}

TEST_CASE("unknown ids and missing files are rejected before any work") {
  const fs::path dir = scratch("unknown");
  write_text(dir / "s.json",
             R"({"cover": {"builtin": "two_caps"}, "chart": {"kind": "sphere", "n": 16},
                 "checks": [{"type": "no_such_check"}]})");
  CHECK_THROWS_AS(run_scenario(dir / "s.json"), Error);
  CHECK(shell(kTool + " run " + (dir / "s.json").string()) == 2);
  CHECK(shell(kTool + " run " + (dir / "missing.json").string()) == 2);
  CHECK(shell(kTool + " verify --cover a.json") == 2);
}

TEST_CASE("a sweep over no values writes only the header") {
  const fs::path dir = scratch("empty_plot");
  write_text(dir / "s.json",
             R"({"id": "empty", "cover": {"builtin": "two_caps"}, "chart": {"kind": "sphere", "n": 16},
                 "plots": [{"kind": "sharpness_sweep", "d": []}]})");
  Overrides ov;
  ov.out = dir / "out";
  const auto r = run_scenario(dir / "s.json", ov);
  CHECK(r.exit_code == 0);
  CHECK(slurp(dir / "out" / "sharpness_sweep.dat") == "# inv_d north_integral\n");
  CHECK(slurp(dir / "out" / "report.csv") == csv_header() + "\n");
}

TEST_CASE("sharpness scenario rows") {
  Overrides ov;
  ov.out = scratch("d4");
  const auto r = run_scenario(kScenarios / "sharpness_d4.json", ov);
  CHECK(r.exit_code == 0);
  const auto& north = row(r, "confined_essential_north[0]");
  CHECK(north.value == doctest::Approx(1.25).epsilon(1e-6));
  CHECK(north.bound == 1.0);
  CHECK(north.status == "pass");
  CHECK(north.grid == "256x256");
  CHECK(row(r, "validate").status == "pass");
  const std::string csv = slurp(*ov.out / "report.csv");
  CHECK(csv.rfind(csv_header() + "\n", 0) == 0);
  CHECK(csv.find("sharpness_d4,confined_essential_north[0],1.25,1,0.25,pass,256x256,NA") != std::string::npos);
}

TEST_CASE("two caps: vanishing invariant and skipped inequalities") {
  Overrides ov;
  ov.out = scratch("two_caps");
  const auto r = run_scenario(kScenarios / "two_caps.json", ov);
  CHECK(r.exit_code == 0);
  CHECK(row(r, "pb_sup").value == 0.0);
  CHECK(row(r, "pb_sup").status == "pass");
  CHECK(row(r, "pb_bound:area_form").status == "skipped:hypotheses");
  int skipped_star = 0;
  for (const auto& x : r.rows) {
    if (x.check.rfind("star@", 0) == 0) {
      CHECK(x.status == "skipped:hypotheses");
      ++skipped_star;
    }
  }
  CHECK(skipped_star == 1);
}

TEST_CASE("reports are byte-identical across runs and grid overrides apply") {
  Overrides a, b;
  a.out = scratch("det_a");
  b.out = scratch("det_b");
  run_scenario(kScenarios / "torus_lattice.json", a);
  run_scenario(kScenarios / "torus_lattice.json", b);
  const std::string ra = slurp(*a.out / "report.csv");
  CHECK(!ra.empty());
  CHECK(ra == slurp(*b.out / "report.csv"));

  Overrides c;
  c.out = scratch("det_c");
  c.grid = 64;
  const auto r = run_scenario(kScenarios / "two_caps.json", c);
  CHECK(row(r, "pb_sup").grid == "64x64");
  c.timing = true;
  const auto t = run_scenario(kScenarios / "two_caps.json", c);
  CHECK(row(t, "pb_sup").runtime_ms >= 0.0);
}

TEST_CASE("saved cover and collection reload and verify the same") {
  const fs::path dir = scratch("roundtrip");
  SharpnessParams p;
  p.d = 4;
  p.n_theta = 256;
  p.n_z = 256;
  const auto ex = build_sharpness_example(p);
  save_cover(ex.cover, dir / "cover");
  save_collection(ex.collection, dir / "collection");

  const Cover U = cover_from_json(read_json(dir / "cover" / "cover.json"), dir / "cover");
  const PositiveCollection F =
      collection_from_json(read_json(dir / "collection" / "collection.json"), dir / "collection", U.chart_ptr());
  REQUIRE(U.size() == ex.cover.size());
  REQUIRE(F.size() == ex.collection.size());
  CHECK(U.declared_localization() == ex.cover.declared_localization());
  for (std::size_t i = 0; i < U.size(); ++i) CHECK(U.disc(i).mask() == ex.cover.disc(i).mask());
  CHECK(integrate(pb_function(F)) == integrate(pb_function(ex.collection)));
  CHECK(check_confined_essential(U, F, 0).value == check_confined_essential(ex.cover, ex.collection, 0).value);

  const std::string cmd = kTool + " verify --cover " + (dir / "cover" / "cover.json").string() + " --collection " +
                          (dir / "collection" / "collection.json").string() + " --check star --at 0,0.99";
  CHECK(shell(cmd) == 0);
}

TEST_CASE("optimizer scenario writes its trace and optimized collection") {
  Overrides ov;
  ov.out = scratch("opt");
  const auto r = run_scenario(kScenarios / "two_caps_optimize.json", ov);
  CHECK(r.exit_code == 0);
  const auto& opt = row(r, "optimizer:pb_integral");
  CHECK(opt.status == "pass");
  CHECK(opt.value <= 1e-3);
  CHECK(fs::exists(*ov.out / "optimizer_trace.dat"));
  std::istringstream trace(slurp(*ov.out / "optimizer_trace.dat"));
  std::string header;
  std::getline(trace, header);
  CHECK(header == "# iteration objective");
  std::vector<double> objective;
  double it = 0, value = 0;
  while (trace >> it >> value) objective.push_back(value);
  REQUIRE(objective.size() > 1);
  CHECK(std::is_sorted(objective.rbegin(), objective.rend()));
  CHECK(fs::exists(*ov.out / "optimized" / "collection.json"));
}

TEST_CASE("bundled sweep: four rows decreasing toward one") {
  Overrides ov;
  ov.out = scratch("sweep");
  const auto r = run_scenario(kScenarios / "sharpness_sweep.json", ov);
  CHECK(r.exit_code == 0);
  std::istringstream in(slurp(*ov.out / "sharpness_sweep.dat"));
  std::string header;
  std::getline(in, header);
  CHECK(header == "# inv_d north_integral");
  std::vector<std::pair<double, double>> rows;
  double x = 0, y = 0;
  while (in >> x >> y) rows.emplace_back(x, y);
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].second < rows[i - 1].second);
    CHECK(rows[i].second > 1.0);
  }
  CHECK(rows.back().second == doctest::Approx(1.0 + rows.back().first).epsilon(0.02));
}
