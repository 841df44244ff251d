#include <algorithm>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pbsurf/error.hpp"
#include "pbsurf/examples.hpp"
#include "scenario.hpp"

namespace fs = std::filesystem;
using namespace pbsurf;
using namespace pbsurf::cli;

namespace {

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::parse:
    case ErrorCode::io:
      return 2;
    default:
      return 1;
  }
}

ChartPoint parse_point(const std::string& text) {
  double u = 0.0, v = 0.0;
  char comma = 0;
  std::istringstream in(text);
  if (!(in >> u >> comma >> v) || comma != ',' || !in.eof()) {
    throw Error(ErrorCode::parse, "expected a point written u,v but got '" + text + "'");
  }
  return {u, v};
}

Overrides overrides_from(const std::optional<int>& grid, const std::optional<unsigned>& threads,
                         const std::string& out, const std::optional<std::uint64_t>& seed, bool timing) {
  Overrides o;
  o.grid = grid;
  o.threads = threads;
  if (!out.empty()) o.out = out;
  o.seed = seed;
  o.timing = timing;
  return o;
}

int cmd_run(const std::string& scenario, const Overrides& ov) {
  const ScenarioResult r = run_scenario(scenario, ov);
  std::cout << csv_header() << '\n';
  for (const auto& row : r.rows) std::cout << csv_line(row) << '\n';
  for (const auto& f : r.files) log(LogLevel::info, "wrote " + f.string());
  return r.exit_code;
}

int cmd_example(int d, int grid, const std::string& out) {
  SharpnessParams p;
  p.d = d;
  p.n_theta = grid;
  p.n_z = grid;
  const SharpnessExample ex = build_sharpness_example(p);
  const auto col = bracket_column_sum(ex.collection, {ex.north});
  const double north = integrate_values(ex.collection.chart(), col);
  const double total = integrate(pb_function(ex.collection));
  const auto s = ex.collection.sum().values();
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  std::printf("d=%d grid=%dx%d\n", d, grid, grid);
  std::printf("north_integral=%.10g\n", north);
  std::printf("pb_integral=%.10g\n", total);
  std::printf("sum_range=[%.10g, %.10g]\n", *lo, *hi);
  if (!out.empty()) {
    save_cover(ex.cover, fs::path(out) / "cover");
    save_collection(ex.collection, fs::path(out) / "collection");
    log(LogLevel::info, "saved cover and collection under " + out);
  }
  return 0;
}

int cmd_verify(const std::string& cover_path, const std::string& collection_path, const std::string& check,
               const std::vector<std::string>& at, const std::vector<int>& discs, double tolerance) {
  const fs::path cp(cover_path);
  const fs::path fp(collection_path);
  const Cover U = cover_from_json(read_json(cp), cp.parent_path());
  const PositiveCollection F = collection_from_json(read_json(fp), fp.parent_path(), U.chart_ptr());
  const Hypotheses hyp = assess_hypotheses(U, F);
  VerifyOptions opt;
  opt.tolerance = tolerance;
  opt.hypotheses = &hyp;

  std::vector<ReportRow> rows;
  auto add = [&](const std::string& id, auto&& fn) {
    try {
      rows.push_back(row_from_report("cli", id, fn(), U.chart()));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::hypotheses_unmet) throw;
      ReportRow r;
      r.scenario = "cli";
      r.check = id;
      r.value = r.bound = r.margin = std::numeric_limits<double>::quiet_NaN();
      r.status = "skipped:hypotheses";
      r.grid = std::to_string(U.chart().n1()) + "x" + std::to_string(U.chart().n2());
      rows.push_back(r);
      log(LogLevel::info, id + " skipped: " + e.what());
    }
  };

  if (check == "star") {
    if (at.empty()) throw Error(ErrorCode::parse, "--check star needs --at u,v");
    for (const auto& text : at) {
      const ChartPoint at_point = parse_point(text);
      const NodeIndex x = U.chart().nearest_node(at_point);
      char label[64];
      std::snprintf(label, sizeof label, "star@(%.4g;%.4g)", at_point.u, at_point.v);
      add(label, [&] { return check_star(U, F, x, opt); });
    }
  } else if (check == "confined_essential") {
    const std::vector<int> js = discs.empty() ? confined_essential_discs(U) : discs;
    for (int j : js) {
      add("confined_essential[" + std::to_string(j) + "]", [&] { return check_confined_essential(U, F, j, opt); });
    }
  } else if (check == "pb_bound") {
    const Measure mu = Measure::area_form(U.chart_ptr());
    add("pb_bound:area_form", [&] { return check_pb_bound(U, F, mu, opt); });
  } else if (check == "half_capacity") {
    add("half_capacity", [&] { return check_half_capacity_bound(U, F, opt); });
  } else if (check == "essential_count") {
    add("essential_count", [&] { return check_essential_count(U, F, opt); });
  } else {
    throw Error(ErrorCode::parse, "unknown check id '" + check + "'");
  }

  std::cout << csv_header() << '\n';
  int code = 0;
  for (const auto& r : rows) {
    std::cout << csv_line(r) << '\n';
    if (r.counts_as_failure()) code = 1;
  }
  return code;
}

int cmd_optimize(const std::string& scenario, const Overrides& ov) {
  const OptimizeOutcome oc = run_scenario_optimizer(scenario, ov);
  std::printf("initial_pb_integral=%.10g\n", oc.initial_pb);
  std::printf("final_pb_integral=%.10g\n", oc.result.pb_trace.back());
  std::printf("iterations=%d best_restart=%d softabs_eps=%.10g\n", oc.result.iterations, oc.result.best_restart,
              oc.result.softabs_eps);
  for (const auto& f : oc.files) log(LogLevel::info, "wrote " + f.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Poisson-bracket invariants of covers of surfaces"};
  app.require_subcommand(1);

  std::string scenario, out;
  std::optional<int> grid;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
  bool timing = false;

  auto* run = app.add_subcommand("run", "run a scenario file and write report.csv");
  run->add_option("scenario", scenario, "scenario JSON")->required();
  run->add_option("--grid", grid, "override the grid to N x N");
  run->add_option("--threads", threads, "worker threads");
  run->add_option("--out", out, "output directory");
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_flag("--timing", timing, "record runtimes in the report");

  auto* example = app.add_subcommand("example", "build a built-in example");
  auto* sharp = example->add_subcommand("sharpness", "the round-sphere family");
  example->require_subcommand(1);
  int d = 4;
  int ex_grid = 256;
  std::string ex_out;
  sharp->add_option("--d", d, "number of wedge functions")->required()->check(CLI::PositiveNumber);
  sharp->add_option("--grid", ex_grid, "grid size N for an N x N chart")->check(CLI::PositiveNumber);
  sharp->add_option("--out", ex_out, "save cover and collection here");

  auto* verify = app.add_subcommand("verify", "evaluate inequalities on saved data");
  std::string cover_path, collection_path, check = "star";
  std::vector<std::string> at;
  std::vector<int> discs;
  double tolerance = 0.05;
  verify->add_option("--cover", cover_path, "cover.json")->required();
  verify->add_option("--collection", collection_path, "collection.json")->required();
  verify->add_option("--check", check, "check id");
  verify->add_option("--at", at, "evaluation point u,v (repeatable)");
  verify->add_option("--disc", discs, "disc index (repeatable)");
  verify->add_option("--tolerance", tolerance, "relative tolerance");

  auto* optimize = app.add_subcommand("optimize", "run a scenario's optimizer block");
  optimize->add_option("--scenario", scenario, "scenario JSON")->required();
  optimize->add_option("--out", out, "output directory");
  optimize->add_option("--seed", seed, "override the optimizer seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const Overrides ov = overrides_from(grid, threads, out, seed, timing);
    if (*run) return cmd_run(scenario, ov);
    if (*sharp) return cmd_example(d, ex_grid, ex_out);
    if (*verify) return cmd_verify(cover_path, collection_path, check, at, discs, tolerance);
    if (*optimize) return cmd_optimize(scenario, ov);
  } catch (const Error& e) {
    std::cerr << "pbsurf: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "pbsurf: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
