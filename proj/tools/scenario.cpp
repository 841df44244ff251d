#include "scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "pbsurf/error.hpp"
#include "pbsurf/examples.hpp"
#include "pbsurf/fields.hpp"
#include "pbsurf/lift.hpp"
#include "pbsurf/parallel.hpp"

namespace fs = std::filesystem;

namespace pbsurf::cli {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("PBSURF_LOG");
    const std::string v = env ? env : "";
    if (v == "debug") return LogLevel::debug;
    if (v == "info") return LogLevel::info;
    return LogLevel::error;
  }();
  return level;
}

void log(LogLevel level, const std::string& message) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  static const char* names[] = {"error", "info", "debug"};
  std::cerr << "[pbsurf " << names[static_cast<int>(level)] << "] " << message << '\n';
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::parse, path.string() + ": " + e.what());
  }
}

namespace {

std::string fmt(double x) {
  if (std::isnan(x)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

ChartPoint point_of(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::parse, "expected a point [u, v], got " + j.dump());
  return {j[0].get<double>(), j[1].get<double>()};
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

Profile profile_from_json(const Json& j) {
  if (j.is_null()) return Profile::smoothstep(5);
  const std::string kind = j.value("kind", "smoothstep");
  if (kind == "smoothstep") return Profile::smoothstep(j.value("degree", 5));
  if (kind == "poly_bump") return Profile::poly_bump(j.value("degree", 4));
  if (kind == "table") {
    return Profile::table(j.at("knots").get<std::vector<double>>(), j.at("values").get<std::vector<double>>());
  }
  throw Error(ErrorCode::parse, "unknown profile kind '" + kind + "'");
}

SharpnessParams sharpness_params(const Json& j, int n_theta, int n_z) {
  SharpnessParams p;
  p.d = j.value("d", p.d);
  p.n_theta = n_theta;
  p.n_z = n_z;
  p.a = j.value("a", p.a);
  p.b = j.value("b", p.b);
  p.t0_fraction = j.value("t0_fraction", p.t0_fraction);
  p.margin = j.value("margin", p.margin);
  if (j.contains("h_profile")) p.h_profile = profile_from_json(j["h_profile"]);
  if (j.contains("w_profile")) p.w_profile = profile_from_json(j["w_profile"]);
  return p;
}

}  // namespace

ChartPtr chart_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const int n1 = j.contains("n") ? j["n"].get<int>() : j.at("n1").get<int>();
  const int n2 = j.contains("n") ? j["n"].get<int>() : j.at("n2").get<int>();
  if (kind == "torus") {
    std::optional<double> area;
    if (j.contains("area")) area = j["area"].get<double>();
    return SurfaceChart::torus(n1, n2, j.value("length1", 1.0), j.value("length2", 1.0), area);
  }
  if (kind == "sphere") return SurfaceChart::sphere(n1, n2, j.value("pole_band", 0.05));
  throw Error(ErrorCode::parse, "unknown chart kind '" + kind + "'");
}

Json chart_to_json(const SurfaceChart& c) {
  Json j;
  j["kind"] = c.kind() == ChartKind::torus ? "torus" : "sphere";
  j["n1"] = c.n1();
  j["n2"] = c.n2();
  if (c.kind() == ChartKind::torus) {
    j["length1"] = c.length1();
    j["length2"] = c.length2();
    j["area"] = c.declared_area();
  } else {
    j["pole_band"] = c.pole_band();
  }
  return j;
}

Cover cover_from_json(const Json& j, const fs::path& base_dir, const ChartPtr& chart_in) {
  const ChartPtr chart = chart_in ? chart_in : chart_from_json(j.at("chart"));
  std::vector<Disc> discs;
  for (const auto& d : j.at("discs")) {
    const std::string type = d.at("type").get<std::string>();
    if (type == "geometric") {
      discs.push_back(Disc::geometric(chart, point_of(d.at("center")), d.at("radius").get<double>()));
    } else if (type == "implicit") {
      const FieldDump dump = read_field_dump(resolve(base_dir, d.at("field").get<std::string>()).string());
      const ScalarField level = field_from_dump(chart, dump);
      discs.push_back(Disc::implicit(chart, {level.values().begin(), level.values().end()}));
    } else if (type == "cap") {
      discs.push_back(Disc::cap(chart, d.at("z0").get<double>(), d.value("north", true)));
    } else {
      throw Error(ErrorCode::parse, "unknown disc type '" + type + "'");
    }
  }
  Cover U(chart, std::move(discs));
  if (j.contains("localization")) {
    std::vector<NodeIndex> pts;
    for (const auto& p : j["localization"]) pts.push_back(chart->nearest_node(point_of(p)));
    if (!U.check_localized(pts)) {
      throw Error(ErrorCode::parse, "declared localization points share a disc");
    }
    U.declare_localization(std::move(pts));
  }
  return U;
}

PositiveCollection collection_from_json(const Json& j, const fs::path& base_dir, const ChartPtr& chart) {
  const std::string mode_name = j.value("mode", "partition");
  CollectionMode mode;
  if (mode_name == "partition") {
    mode = CollectionMode::partition;
  } else if (mode_name == "positive") {
    mode = CollectionMode::positive;
  } else {
    throw Error(ErrorCode::parse, "unknown collection mode '" + mode_name + "'");
  }
  std::map<std::string, PositiveCollection> families;
  std::vector<ScalarField> fields;
  std::vector<int> disc_of;
  for (const auto& f : j.at("fields")) {
    disc_of.push_back(f.at("disc").get<int>());
    if (f.contains("bump")) {
      const Json& b = f["bump"];
      fields.push_back(bump_disc(chart, point_of(b.at("center")), b.at("r_inner").get<double>(),
                                 b.at("r_outer").get<double>(), profile_from_json(b.value("profile", Json()))));
    } else if (f.contains("dump")) {
      const FieldDump dump = read_field_dump(resolve(base_dir, f["dump"].get<std::string>()).string());
      fields.push_back(field_from_dump(chart, dump));
    } else if (f.contains("formula")) {
      const std::string name = f["formula"].get<std::string>();
      if (name != "sharpness") throw Error(ErrorCode::parse, "unknown formula id '" + name + "'");
      const SharpnessParams p = sharpness_params(f, chart->n1(), chart->n2());
      const std::string key = f.value("params", Json::object()).dump() + "/" + std::to_string(p.d);
      auto it = families.find(key);
      if (it == families.end()) it = families.emplace(key, build_sharpness_example(p).collection).first;
      const int index = f.at("index").get<int>();
      if (index < 0 || static_cast<std::size_t>(index) >= it->second.size()) {
        throw Error(ErrorCode::parse, "formula index out of range");
      }
      fields.push_back(ScalarField(chart, {it->second.field(static_cast<std::size_t>(index)).values().begin(),
                                           it->second.field(static_cast<std::size_t>(index)).values().end()}));
    } else {
      throw Error(ErrorCode::parse, "field entry needs one of bump, dump or formula");
    }
  }
  return PositiveCollection(chart, std::move(fields), std::move(disc_of), mode);
}

std::vector<fs::path> save_cover(const Cover& U, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> files;
  Json j;
  j["chart"] = chart_to_json(U.chart());
  j["discs"] = Json::array();
  for (std::size_t i = 0; i < U.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "disc_%02zu.pbsf", i);
    const auto level = U.disc(i).level();
    write_field_dump((dir / name).string(), ScalarField(U.chart_ptr(), {level.begin(), level.end()}));
    files.push_back(dir / name);
    j["discs"].push_back({{"type", "implicit"}, {"field", name}});
  }
  if (!U.declared_localization().empty()) {
    j["localization"] = Json::array();
    for (NodeIndex k : U.declared_localization()) {
      const ChartPoint p = U.chart().point(k);
      j["localization"].push_back({p.u, p.v});
    }
  }
  std::ofstream(dir / "cover.json") << j.dump(2) << '\n';
  files.push_back(dir / "cover.json");
  return files;
}

std::vector<fs::path> save_collection(const PositiveCollection& F, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> files;
  Json j;
  j["mode"] = to_string(F.mode());
  j["fields"] = Json::array();
  for (std::size_t i = 0; i < F.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "field_%02zu.pbsf", i);
    write_field_dump((dir / name).string(), F.field(i));
    files.push_back(dir / name);
    j["fields"].push_back({{"disc", F.disc_of(i)}, {"dump", name}});
  }
  std::ofstream(dir / "collection.json") << j.dump(2) << '\n';
  files.push_back(dir / "collection.json");
  return files;
}

std::string csv_header() { return "scenario_id,check_id,value,bound,margin,pass,grid,runtime_ms"; }

std::string csv_line(const ReportRow& r) {
  return r.scenario + "," + r.check + "," + fmt(r.value) + "," + fmt(r.bound) + "," + fmt(r.margin) + "," +
         r.status + "," + r.grid + "," + (r.runtime_ms < 0 ? std::string("NA") : fmt(r.runtime_ms));
}

void write_csv(const fs::path& path, const std::vector<ReportRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << csv_header() << '\n';
  for (const auto& r : rows) out << csv_line(r) << '\n';
}

void write_columns(const fs::path& path, const std::string& x_name, const std::string& y_name,
                   const std::vector<std::pair<double, double>>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << "# " << x_name << ' ' << y_name << '\n';
  for (const auto& [x, y] : rows) out << fmt(x) << ' ' << fmt(y) << '\n';
}

ReportRow row_from_report(const std::string& scenario, const std::string& check, const CheckReport& r,
                          const SurfaceChart& chart) {
  ReportRow row;
  row.scenario = scenario;
  row.check = check;
  row.value = r.value;
  row.bound = r.bound;
  row.margin = r.margin;
  row.status = r.pass ? "pass" : "fail";
  row.grid = std::to_string(chart.n1()) + "x" + std::to_string(chart.n2());
  return row;
}

std::vector<std::pair<double, double>> sharpness_sweep(const std::vector<int>& ds, int n_theta, int n_z) {
  std::vector<std::pair<double, double>> rows;
  for (int d : ds) {
    SharpnessParams p;
    p.d = d;
    p.n_theta = n_theta;
    p.n_z = n_z;
    const auto ex = build_sharpness_example(p);
    const auto col = bracket_column_sum(ex.collection, {ex.north});
    rows.emplace_back(1.0 / d, integrate_values(ex.collection.chart(), col));
    log(LogLevel::info, "sweep d=" + std::to_string(d) + " north integral " + fmt(rows.back().second));
  }
  return rows;
}

namespace {

struct Instance {
  Cover cover;
  PositiveCollection collection;
};

struct Context {
  Json scenario;
  fs::path dir;
  std::string id;
  std::uint64_t seed = 1;
  Overrides overrides;
};

Json effective_chart(const Context& ctx) {
  Json chart = ctx.scenario.value("chart", Json::object());
  if (ctx.overrides.grid) {
    chart.erase("n");
    chart["n1"] = *ctx.overrides.grid;
    chart["n2"] = *ctx.overrides.grid;
  }
  return chart;
}

int chart_n(const Json& chart, const char* key) {
  if (chart.contains("n")) return chart["n"].get<int>();
  return chart.at(key).get<int>();
}

Instance build_instance(const Context& ctx) {
  const Json& sc = ctx.scenario;
  const Json chart = effective_chart(ctx);
  const Json& cj = sc.at("cover");
  if (cj.contains("builtin")) {
    const std::string name = cj["builtin"].get<std::string>();
    const int n1 = chart_n(chart, "n1");
    const int n2 = chart_n(chart, "n2");
    if (name == "sharpness") {
      auto ex = build_sharpness_example(sharpness_params(cj, n1, n2));
      PositiveCollection F = ex.collection;
      if (cj.value("normalized", false)) F = F.normalized();
      return {std::move(ex.cover), std::move(F)};
    }
    if (name == "two_caps") {
      const double wave = cj.value("theta_wave", 0.0);
      auto cc = wave != 0.0 ? two_cap_wavy(n1, n2, wave) : two_cap_partition(n1, n2);
      return {std::move(cc.cover), std::move(cc.collection)};
    }
    if (name == "torus_lattice") {
      if (n1 != n2) throw Error(ErrorCode::parse, "torus_lattice needs a square grid");
      TorusBumpParams p;
      p.n = n1;
      p.per_side = cj.value("per_side", p.per_side);
      p.ramp = cj.value("ramp", p.ramp);
      p.jitter = cj.value("jitter", p.jitter);
      p.amplitude_spread = cj.value("amplitude_spread", p.amplitude_spread);
      p.seed = cj.value("seed", ctx.seed);
      const std::string mode = cj.value("mode", "partition");
      if (mode != "partition" && mode != "positive") throw Error(ErrorCode::parse, "unknown mode '" + mode + "'");
      p.mode = mode == "partition" ? CollectionMode::partition : CollectionMode::positive;
      auto cc = torus_bump_collection(p);
      return {std::move(cc.cover), std::move(cc.collection)};
    }
    throw Error(ErrorCode::parse, "unknown builtin '" + name + "'");
  }

  std::optional<Cover> cover;
  if (cj.contains("file")) {
    const fs::path file = resolve(ctx.dir, cj["file"].get<std::string>());
    cover = cover_from_json(read_json(file), file.parent_path());
  } else {
    cover = cover_from_json(cj, ctx.dir, chart_from_json(chart));
  }
  const Json& fj = sc.at("collection");
  if (fj.contains("file")) {
    const fs::path file = resolve(ctx.dir, fj["file"].get<std::string>());
    return {*cover, collection_from_json(read_json(file), file.parent_path(), cover->chart_ptr())};
  }
  return {*cover, collection_from_json(fj, ctx.dir, cover->chart_ptr())};
}

Instance apply_covering_map(const Context& ctx, Instance in) {
  if (!ctx.scenario.contains("covering_map")) return in;
  const Json& m = ctx.scenario["covering_map"];
  const std::string kind = m.at("kind").get<std::string>();
  const ChartPtr& base = in.cover.chart_ptr();
  std::optional<CoveringMap> p;
  if (kind == "torus_unroll") {
    p = CoveringMap::torus_unroll(base, m.value("k1", 2), m.value("k2", 1));
  } else if (kind == "sphere_square") {
    p = CoveringMap::sphere_square(base);
  } else if (kind == "weierstrass") {
    p = CoveringMap::weierstrass(base, m.value("side", 1.0), m.at("n").get<int>());
  } else {
    throw Error(ErrorCode::parse, "unknown covering map kind '" + kind + "'");
  }
  log(LogLevel::info, "lifting along " + p->label());
  LiftedCover lc = lift_cover(*p, in.cover);
  PositiveCollection G = lift_collection(*p, in.collection, lc);
  if (p->branch_points().empty()) return {std::move(lc.cover), std::move(G)};
  const CorrectedForm form =
      corrected_area_form(*p, m.value("branch_radius", 0.2), m.value("epsilon", 1e-2), &G);
  log(LogLevel::info, "corrected area form adds " + fmt(form.added_area));
  return {rebind(lc.cover, form.chart), rebind(G, form.chart)};
}

const std::set<std::string>& known_checks() {
  static const std::set<std::string> names{"confined_essential", "star",          "pb_bound",
                                           "half_capacity",      "essential_count", "partition_refinement",
                                           "partition_disjoint", "pb_sup",        "pb_integral",
                                           "validate",           "averaging"};
  return names;
}

// Reports for quantities that must stay at or below a bound.
CheckReport upper_report(std::string check, double value, double bound, double rel_tol) {
  CheckReport r;
  r.check = std::move(check);
  r.value = value;
  r.bound = bound;
  r.margin = bound - value;
  r.tolerance = rel_tol * std::abs(bound);
  r.pass = r.margin >= -r.tolerance;
  r.provenance = "upper bound";
  return r;
}

std::string point_label(ChartPoint p) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "(%.4g;%.4g)", p.u, p.v);
  return buf;
}

std::vector<NodeIndex> points_of(const Json& j, const Cover& U, std::mt19937_64& rng) {
  const SurfaceChart& c = U.chart();
  std::vector<NodeIndex> out;
  if (j.contains("at")) out.push_back(c.nearest_node(point_of(j["at"])));
  if (j.contains("points")) {
    for (const auto& p : j["points"]) out.push_back(c.nearest_node(point_of(p)));
  }
  if (j.value("localization", false)) {
    for (NodeIndex k : U.declared_localization()) out.push_back(k);
  }
  if (j.contains("random")) {
    std::uniform_int_distribution<NodeIndex> pick(0, c.size() - 1);
    const int n = j["random"].get<int>();
    for (int i = 0; i < n; ++i) {
      NodeIndex k = pick(rng);
      while (c.in_pole_band(c.j_of(k))) k = pick(rng);
      out.push_back(k);
    }
  }
  return out;
}

Measure measure_of(const Json& j, const Cover& U, std::mt19937_64& rng) {
  const std::string kind = j.value("measure", "area");
  if (kind == "area") return Measure::area_form(U.chart_ptr());
  if (kind == "dirac") return Measure::dirac_sum(U.chart_ptr(), points_of(j, U, rng));
  throw Error(ErrorCode::parse, "unknown measure '" + kind + "'");
}

void validate_scenario(const Json& sc) {
  if (!sc.is_object()) throw Error(ErrorCode::parse, "scenario must be a JSON object");
  if (!sc.contains("cover")) throw Error(ErrorCode::parse, "scenario needs a cover block");
  if (!sc["cover"].contains("builtin") && !sc.contains("collection")) {
    throw Error(ErrorCode::parse, "scenario needs a collection block");
  }
  for (const auto& c : sc.value("checks", Json::array())) {
    const std::string type = c.at("type").get<std::string>();
    if (!known_checks().count(type)) throw Error(ErrorCode::parse, "unknown check id '" + type + "'");
  }
  for (const auto& p : sc.value("plots", Json::array())) {
    const std::string kind = p.at("kind").get<std::string>();
    if (kind != "sharpness_sweep") throw Error(ErrorCode::parse, "unknown plot kind '" + kind + "'");
  }
}

Context load_context(const fs::path& path, const Overrides& ov) {
  Context ctx;
  ctx.scenario = read_json(path);
  ctx.dir = path.parent_path();
  ctx.overrides = ov;
  try {
    validate_scenario(ctx.scenario);
    ctx.id = ctx.scenario.value("id", path.stem().string());
    ctx.seed = ov.seed ? *ov.seed : ctx.scenario.value("seed", std::uint64_t{1});
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse, path.string() + ": " + e.what());
  }
  if (ov.threads) {
    set_thread_count(*ov.threads);
  } else if (ctx.scenario.contains("threads")) {
    set_thread_count(ctx.scenario["threads"].get<unsigned>());
  }
  return ctx;
}

fs::path output_dir(const Context& ctx) {
  if (ctx.overrides.out) return *ctx.overrides.out;
  if (ctx.scenario.contains("output")) return ctx.scenario["output"].get<std::string>();
  return fs::path("out") / ctx.id;
}

OptimizerParams optimizer_params(const Json& j, std::uint64_t seed) {
  OptimizerParams p;
  const std::string obj = j.value("objective", "l1_pb");
  if (obj == "l1_pb") {
    p.objective = Objective::l1_pb;
  } else if (obj == "smoothed_linf") {
    p.objective = Objective::smoothed_linf;
  } else {
    throw Error(ErrorCode::parse, "unknown objective '" + obj + "'");
  }
  const std::string proj = j.value("projection", "partition");
  if (proj == "partition") {
    p.projection = Projection::partition;
  } else if (proj == "positive") {
    p.projection = Projection::positive;
  } else {
    throw Error(ErrorCode::parse, "unknown projection '" + proj + "'");
  }
  p.softabs_eps = j.value("softabs_eps", p.softabs_eps);
  p.linf_beta = j.value("linf_beta", p.linf_beta);
  p.initial_step = j.value("initial_step", p.initial_step);
  p.backtrack = j.value("backtrack", p.backtrack);
  p.armijo = j.value("armijo", p.armijo);
  p.max_backtracks = j.value("max_backtracks", p.max_backtracks);
  p.sobolev_length = j.value("sobolev_length", p.sobolev_length);
  p.conjugate = j.value("conjugate", p.conjugate);
  p.iterations = j.value("iterations", p.iterations);
  p.restarts = j.value("restarts", p.restarts);
  p.restart_noise = j.value("restart_noise", p.restart_noise);
  p.stop_pb_integral = j.value("stop_pb_integral", p.stop_pb_integral);
  p.seed = j.value("seed", seed);
  return p;
}

struct OptimizerRun {
  OptimizeOutcome outcome;
  ReportRow row;
};

OptimizerRun optimize_instance(const Context& ctx, const Instance& in, const fs::path& out) {
  const Json& j = ctx.scenario.at("optimizer");
  const OptimizerParams prm = optimizer_params(j, ctx.seed);
  const auto t0 = std::chrono::steady_clock::now();
  OptimizeOutcome oc{minimize_pb(in.cover, in.collection, prm), {}, 0.0};
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  oc.initial_pb = oc.result.pb_trace.front();
  log(LogLevel::info, "optimizer: " + std::to_string(oc.result.iterations) + " steps, softabs eps " +
                          fmt(oc.result.softabs_eps) + ", integral of P " + fmt(oc.initial_pb) + " -> " +
                          fmt(oc.result.pb_trace.back()));

  std::vector<std::pair<double, double>> trace;
  for (std::size_t i = 0; i < oc.result.trace.size(); ++i) trace.emplace_back(static_cast<double>(i), oc.result.trace[i]);
  write_columns(out / "optimizer_trace.dat", "iteration", "objective", trace);
  oc.files.push_back(out / "optimizer_trace.dat");
  for (auto& f : save_collection(oc.result.best, out / "optimized")) oc.files.push_back(f);

  const double tol = j.value("tolerance", ctx.scenario.value("tolerance", 0.05));
  const double final_pb = oc.result.pb_trace.back();
  CheckReport r;
  std::string check = "optimizer:pb_integral";
  if (j.contains("expect_max")) {
    r = upper_report("optimizer", final_pb, j["expect_max"].get<double>(), tol);
  } else if (j.contains("expect_min")) {
    const Json& e = j["expect_min"];
    double bound;
    if (e.is_string()) {
      if (e.get<std::string>() != "area_over_capacity") throw Error(ErrorCode::parse, "unknown expect_min");
      bound = in.cover.chart().total_area() / in.cover.capacity();
    } else {
      bound = e.get<double>();
    }
    r = make_report("optimizer", final_pb, bound, tol, "optimizer floor");
  } else {
    // Only the smoothed objective is monotone; the plain integral may rise.
    check = "optimizer:objective";
    r = upper_report("optimizer", oc.result.trace.back(), oc.result.trace.front(), 0.0);
  }
  ReportRow row = row_from_report(ctx.id, check, r, in.cover.chart());
  if (ctx.overrides.timing) row.runtime_ms = ms;
  return {std::move(oc), std::move(row)};
}

}  // namespace

ScenarioResult run_scenario(const fs::path& path, const Overrides& ov) {
  Context ctx = load_context(path, ov);
  ScenarioResult result;
  result.id = ctx.id;
  const fs::path out = output_dir(ctx);
  fs::create_directories(out);

  std::optional<Instance> in;
  try {
    in = apply_covering_map(ctx, build_instance(ctx));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse, path.string() + ": " + e.what());
  }
  const Cover& U = in->cover;
  const PositiveCollection& F = in->collection;
  const SurfaceChart& chart = U.chart();
  log(LogLevel::info, ctx.id + ": " + std::to_string(U.size()) + " discs, " + std::to_string(F.size()) +
                          " fields on a " + std::to_string(chart.n1()) + "x" + std::to_string(chart.n2()) + " grid");

  const Hypotheses hyp = assess_hypotheses(U, F);
  if (!hyp.summary.empty()) log(LogLevel::info, "hypotheses: " + hyp.summary);
  std::mt19937_64 rng(ctx.seed);
  const std::string grid = std::to_string(chart.n1()) + "x" + std::to_string(chart.n2());

  auto run = [&](const std::string& check, const std::function<CheckReport()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    ReportRow row;
    try {
      row = row_from_report(ctx.id, check, fn(), chart);
    } catch (const Error& e) {
      row.scenario = ctx.id;
      row.check = check;
      row.value = row.bound = row.margin = std::numeric_limits<double>::quiet_NaN();
      row.grid = grid;
      if (e.code() == ErrorCode::hypotheses_unmet) {
        row.status = "skipped:hypotheses";
        log(LogLevel::info, check + " skipped: " + e.what());
      } else {
        row.status = std::string("error:") + to_string(e.code());
        log(LogLevel::error, check + ": " + e.what());
      }
    }
    if (ctx.overrides.timing) {
      row.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    log(LogLevel::debug, csv_line(row));
    result.rows.push_back(std::move(row));
  };

  try {
    for (const auto& c : ctx.scenario.value("checks", Json::array())) {
      const std::string type = c.at("type").get<std::string>();
      const std::string id = c.value("id", type);
      VerifyOptions opt;
      opt.tolerance = c.value("tolerance", ctx.scenario.value("tolerance", 0.05));
      opt.hypotheses = &hyp;

      if (type == "confined_essential") {
        std::vector<int> discs;
        if (c.contains("disc")) {
          discs.push_back(c["disc"].get<int>());
        } else {
          discs = confined_essential_discs(U);
        }
        if (discs.empty()) {
          run(id, [&]() -> CheckReport {
            throw Error(ErrorCode::hypotheses_unmet, "no confined essential disc");
          });
        }
        for (int j : discs) {
          run(id + "[" + std::to_string(j) + "]", [&] { return check_confined_essential(U, F, j, opt); });
        }
      } else if (type == "star") {
        for (NodeIndex x : points_of(c, U, rng)) {
          run(id + "@" + point_label(chart.point(x)), [&] { return check_star(U, F, x, opt); });
        }
      } else if (type == "pb_bound") {
        const Measure mu = measure_of(c, U, rng);
        run(id + ":" + to_string(mu.kind()), [&] { return check_pb_bound(U, F, mu, opt); });
      } else if (type == "half_capacity") {
        run(id, [&] { return check_half_capacity_bound(U, F, opt); });
      } else if (type == "essential_count") {
        run(id, [&] { return check_essential_count(U, F, opt); });
      } else if (type == "partition_refinement") {
        const int j = c.at("disc").get<int>();
        run(id + "[" + std::to_string(j) + "]", [&] { return check_partition_refinement(U, F, j, opt); });
      } else if (type == "partition_disjoint") {
        const auto discs = c.at("discs").get<std::vector<int>>();
        run(id, [&] { return check_partition_disjoint(U, F, discs, opt); });
      } else if (type == "pb_sup") {
        const double bound = c.at("max").get<double>();
        run(id, [&] { return upper_report("pb_sup", sup_norm(pb_function(F)), bound, opt.tolerance); });
      } else if (type == "pb_integral") {
        const double value = integrate(pb_function(F));
        if (c.contains("max")) {
          run(id, [&] { return upper_report("pb_integral", value, c["max"].get<double>(), opt.tolerance); });
        } else {
          run(id, [&] { return make_report("pb_integral", value, c.at("min").get<double>(), opt.tolerance, "lower bound"); });
        }
      } else if (type == "validate") {
        run(id, [&] {
          const auto rep = validate(F, U);
          double failing = 0;
          for (const auto& item : rep.items) failing += item.pass ? 0 : 1;
          return upper_report("validate", failing, 0.0, 0.0);
        });
      } else if (type == "averaging") {
        const Measure mu = measure_of(c, U, rng);
        run(id + ":" + to_string(mu.kind()), [&] {
          const AveragingReport a = averaging_report(U, F, mu, opt);
          CheckReport r = make_report("averaging", a.pb_integral, a.lower, opt.tolerance, "averaging chain");
          r.pass = a.chain_holds;
          return r;
        });
      }
    }

    if (ctx.scenario.contains("optimizer")) {
      OptimizerRun o = optimize_instance(ctx, *in, out);
      for (auto& f : o.outcome.files) result.files.push_back(f);
      result.rows.push_back(std::move(o.row));
    }

    for (const auto& p : ctx.scenario.value("plots", Json::array())) {
      const auto ds = p.value("d", std::vector<int>{});
      const int nt = ov.grid ? *ov.grid : p.value("n_theta", 1024);
      const int nz = ov.grid ? *ov.grid : p.value("n_z", 1024);
      const fs::path file = out / p.value("file", std::string("sharpness_sweep.dat"));
      write_columns(file, "inv_d", "north_integral", sharpness_sweep(ds, nt, nz));
      result.files.push_back(file);
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse, path.string() + ": " + e.what());
  }

  write_csv(out / "report.csv", result.rows);
  result.files.insert(result.files.begin(), out / "report.csv");
  result.exit_code = 0;
  for (const auto& r : result.rows) {
    if (r.counts_as_failure()) result.exit_code = 1;
  }
  return result;
}

OptimizeOutcome run_scenario_optimizer(const fs::path& path, const Overrides& ov) {
  Context ctx = load_context(path, ov);
  if (!ctx.scenario.contains("optimizer")) throw Error(ErrorCode::parse, path.string() + ": no optimizer block");
  const fs::path out = output_dir(ctx);
  fs::create_directories(out);
  try {
    const Instance in = apply_covering_map(ctx, build_instance(ctx));
    OptimizerRun o = optimize_instance(ctx, in, out);
    return std::move(o.outcome);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::parse, path.string() + ": " + e.what());
  }
}

}  // namespace pbsurf::cli
