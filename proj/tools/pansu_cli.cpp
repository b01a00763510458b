// Command-line front end. Every output embeds the run record and the library
// version; see docs/cli.md for flags and schemas.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "pansu/pansu.hpp"

using namespace pansu;
using Json = nlohmann::ordered_json;

namespace {

enum Exit { kPass = 0, kVerdictFail = 1, kUsage = 2, kRuntime = 3 };

struct RunConfig {
  std::string subcommand;
  double kappa = 0.0, lambda = 1.0;
  // trace
  double theta = 0.0, smax = 1.0, step = kDefaultStep;
  // sphere / stability grids
  int n_theta = 64, n_s = 64;
  double focus_tol = 1e-6;
  // stability
  std::string mode = "meanzero";
  int trials = 1000, m = 8, n = 8;
  std::uint64_t seed = 42;
  std::string radial = "cos";
  double fd_h = 1e-2;
  // isoper
  std::string isoper = "volume";
  double volume = 0.0;
  int resolution = 1000;
  double v_min = M_PI * M_PI, v_max = 10.0 * M_PI * M_PI;
  int rows = 101;
  // holonomy
  double center_x = 0.0, center_y = 0.0, radius = 0.5, polar_angle = 1.0;
  bool clockwise = true;
  int samples = 4096;
  // outputs
  std::string out, mesh;
};

// Field list shared by both directions; keys keep declaration order.
template <class F>
void visit_fields(RunConfig& c, F&& f) {
  f("subcommand", c.subcommand);
  f("kappa", c.kappa);
  f("lambda", c.lambda);
  f("theta", c.theta);
  f("smax", c.smax);
  f("step", c.step);
  f("n_theta", c.n_theta);
  f("n_s", c.n_s);
  f("focus_tol", c.focus_tol);
  f("mode", c.mode);
  f("trials", c.trials);
  f("m", c.m);
  f("n", c.n);
  f("seed", c.seed);
  f("radial", c.radial);
  f("fd_h", c.fd_h);
  f("isoper", c.isoper);
  f("volume", c.volume);
  f("resolution", c.resolution);
  f("v_min", c.v_min);
  f("v_max", c.v_max);
  f("rows", c.rows);
  f("center_x", c.center_x);
  f("center_y", c.center_y);
  f("radius", c.radius);
  f("polar_angle", c.polar_angle);
  f("clockwise", c.clockwise);
  f("samples", c.samples);
  f("out", c.out);
  f("mesh", c.mesh);
}

void to_json(Json& j, const RunConfig& c) {
  j = Json::object();
  visit_fields(const_cast<RunConfig&>(c), [&](const char* k, const auto& v) { j[k] = v; });
}

// Missing keys keep their defaults.
void from_json(const Json& j, RunConfig& c) {
  visit_fields(c, [&](const char* k, auto& v) {
    if (j.contains(k)) j.at(k).get_to(v);
  });
}

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string num(double x) {
  if (std::isnan(x)) return "null";
  if (std::isinf(x)) return x > 0 ? "1e999" : "-1e999";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// nlohmann prints shortest round-trip floats; the frozen format is %.17g.
void dump(const Json& j, std::string& o, int indent, int depth) {
  // indent < 0: single line
  auto nl = [&](int d) {
    if (indent < 0) return;
    o += '\n';
    o.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        o += "{}";
        return;
      }
      o += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) o += ',';
        first = false;
        nl(depth + 1);
        o += Json(it.key()).dump() + (indent < 0 ? ":" : ": ");
        dump(it.value(), o, indent, depth + 1);
      }
      nl(depth);
      o += '}';
      return;
    }
    case Json::value_t::array: {
      o += '[';
      for (std::size_t k = 0; k < j.size(); ++k) {
        if (k) o += indent < 0 ? "," : ", ";
        dump(j[k], o, indent, depth + 1);
      }
      o += ']';
      return;
    }
    case Json::value_t::number_float: o += num(j.get<double>()); return;
    default: o += j.dump();
  }
}

std::string to_text(const Json& j, int indent = 2) {
  std::string o;
  dump(j, o, indent, 0);
  return o;
}

void write_atomic(const std::string& path, const std::string& text) {
  try {
    detail::write_atomic(path, text);
  } catch (const MeshIOError& e) {
    throw std::runtime_error(e.what());
  }
}

Json envelope(const RunConfig& cfg) {
  Json j;
  j["version"] = kVersion;
  j["run"] = cfg;
  return j;
}

void write_json(const RunConfig& cfg, const Json& result) {
  Json j = envelope(cfg);
  j["result"] = result;
  write_atomic(cfg.out, to_text(j) + "\n");
}

std::string csv_preamble(const RunConfig& cfg) {
  Json run = cfg;
  return std::string("# version=") + kVersion + "\n# run=" + to_text(run, -1) + "\n";
}

SpaceForm space_of(const RunConfig& c) { return make_space(c.kappa); }

// ---------------------------------------------------------------- trace

int cmd_trace(const RunConfig& c) {
  SpaceForm sp = space_of(c);
  ChartPoint p = origin(sp);
  GeodesicPath g = shoot(sp, p, c.theta, c.lambda, c.smax, c.step);
  std::vector<double> res = ode_residuals(g);
  std::string text = csv_preamble(c);
  const bool s3 = sp.model == Model::sphere3;
  text += s3 ? "s,q0,q1,q2,q3,v0,v1,v2,v3,residual\n" : "s,x,y,t,vx,vy,vt,residual\n";
  for (std::size_t k = 0; k < g.samples.size(); ++k) {
    const auto& sm = g.samples[k];
    text += num(sm.s);
    for (Eigen::Index i = 0; i < sm.point.size(); ++i) text += "," + num(sm.point[i]);
    for (Eigen::Index i = 0; i < sm.velocity.size(); ++i) text += "," + num(sm.velocity[i]);
    text += "," + num(res[k]) + "\n";
  }
  write_atomic(c.out, text);
  if (!g.complete()) {
    std::cerr << "trace: geodesic left the chart at s = " << num(*g.exit_s) << "; partial trace written\n";
    return kRuntime;
  }
  return kPass;
}

// ---------------------------------------------------------------- sphere

int cmd_sphere(const RunConfig& c) {
  if (!cut_length(c.lambda, c.kappa)) throw UsageError("sphere: requires lambda^2 + kappa > 0");
  SpaceForm sp = space_of(c);
  PansuSphere S = build_sphere(sp, origin(sp), c.lambda, c.n_theta, c.n_s, c.step, c.focus_tol);
  Json r;
  r["area"] = area(S);
  if (sp.model == Model::sphere3) {
    r["volume"] = enclosed_volume_slicing(S);
    r["volume_qmc"] = enclosed_volume_qmc(S);
  } else {
    r["volume"] = enclosed_volume(S);
  }
  r["meridian_length"] = S.meridian_length;
  r["pole_spread"] = S.pole_spread;
  r["tau"] = S.tau_root;
  if (!c.mesh.empty()) {
    export_mesh(S, c.mesh);
    r["mesh"] = c.mesh;
  }
  write_json(c, r);
  return kPass;
}

// ---------------------------------------------------------------- stability

RadialFunction named_radial(const std::string& name, double tau) {
  if (name == "cos")
    return {[tau](double s) { return std::cos(tau * s); }, [tau](double s) { return -tau * std::sin(tau * s); }};
  if (name == "bump")
    return {[tau](double s) { return std::pow(1.0 - std::cos(tau * s), 2); },
            [tau](double s) { return 2.0 * (1.0 - std::cos(tau * s)) * tau * std::sin(tau * s); }};
  if (name == "exp")
    return {[tau](double s) { return std::exp(std::cos(tau * s)); },
            [tau](double s) { return -tau * std::sin(tau * s) * std::exp(std::cos(tau * s)); }};
  throw UsageError("unknown radial function: " + name);
}

Json report_json(const StabilityReport& r) {
  Json j;
  j["mode"] = mode_name(r.mode);
  j["value"] = r.value;
  j["trials"] = r.trials;
  j["seed"] = r.seed;
  j["pass"] = r.pass;
  j["per_trial"] = r.per_trial;
  return j;
}

int cmd_stability(const RunConfig& c) {
  if (!cut_length(c.lambda, c.kappa)) throw UsageError("stability: requires lambda^2 + kappa > 0");
  SpaceForm sp = space_of(c);
  PansuSphere S = build_sphere(sp, origin(sp), c.lambda, c.n_theta, c.n_s, c.step, c.focus_tol);
  Json r;
  bool pass = false;
  if (c.mode == "wirtinger-poles" || c.mode == "wirtinger-equator") {
    auto mode = c.mode == "wirtinger-poles" ? StabilityMode::wirtinger_poles : StabilityMode::wirtinger_equator;
    StabilityReport rep = wirtinger_scan(S, mode, c.trials, c.m, c.n, c.seed);
    r = report_json(rep);
    pass = rep.pass;
  } else if (c.mode == "meanzero") {
    StabilityReport rep = meanzero_scan(S, c.trials, c.m, c.n, c.seed);
    r = report_json(rep);
    pass = rep.pass;
  } else if (c.mode == "parallel") {
    Richardson d = second_variation_fd(S, {VariationKind::parallel, {}}, c.fd_h);
    pass = d.value >= 0.0;
    r["mode"] = mode_name(StabilityMode::parallel);
    r["value"] = d.value;
    r["d_h"] = d.d_h;
    r["d_h2"] = d.d_h2;
    r["d_h4"] = d.d_h4;
    r["pass"] = pass;
  } else if (c.mode == "fd") {
    RadialFunction g = named_radial(c.radial, S.tau_root);
    SurfaceFunction u = vertical_normal_speed(S, g);
    const double quad = index_form(S, u, u);
    Richardson d = second_variation_fd(S, {VariationKind::vertical, g}, c.fd_h);
    const double gap = std::abs(d.value - quad) / std::max(std::abs(quad), 1e-300);
    pass = gap < 1e-3;
    r["mode"] = mode_name(StabilityMode::fd_crosscheck);
    r["radial"] = c.radial;
    r["value"] = d.value;
    r["quadrature"] = quad;
    r["relative_gap"] = gap;
    r["pass"] = pass;
  } else {
    throw UsageError("unknown stability mode: " + c.mode);
  }
  write_json(c, r);
  return pass ? kPass : kVerdictFail;
}

// ---------------------------------------------------------------- isoper

Json comparison_json(const Comparison& x) {
  Json j;
  j["volume"] = x.volume;
  j["winner"] = family_name(x.winner);
  j["sphere_admissible"] = x.sphere_admissible;
  j["sphere_area"] = x.sphere_area;
  j["torus_area"] = x.torus_area;
  return j;
}

int cmd_isoper(const RunConfig& c) {
  if (c.isoper == "volume") {
    write_json(c, comparison_json(compare_at_volume(c.volume)));
  } else if (c.isoper == "scan") {
    IntervalScan s = scan_interval(c.resolution, c.v_min, c.v_max);
    Json r;
    r["v_low"] = s.v_low;
    r["v_high"] = s.v_high;
    r["area_crossings"] = s.crossings;
    write_json(c, r);
  } else if (c.isoper == "table") {
    std::string text = csv_preamble(c) + "volume,sphere_area,torus_area,sphere_admissible,winner\n";
    for (const auto& x : profile_table(c.v_min, c.v_max, c.rows))
      text += num(x.volume) + "," + num(x.sphere_area) + "," + num(x.torus_area) + "," +
              (x.sphere_admissible ? "1" : "0") + "," + family_name(x.winner) + "\n";
    write_atomic(c.out, text);
  } else {
    throw UsageError("isoper: choose one of --volume, --scan, --table");
  }
  return kPass;
}

// ---------------------------------------------------------------- holonomy

int cmd_holonomy(const RunConfig& c) {
  if (c.kappa != -1.0 && c.kappa != 0.0 && c.kappa != 1.0) throw UsageError("holonomy: kappa must be -1, 0 or 1");
  SpaceForm sp = space_of(c);
  const double sg = c.clockwise ? -1.0 : 1.0;
  PlanarCurve curve;
  curve.s0 = 0.0;
  curve.s1 = 2.0 * M_PI;
  ChartPoint start;
  double enclosed;
  if (sp.model == Model::sphere3) {
    const double a = c.polar_angle;
    if (!(a > 0.0 && a < M_PI)) throw UsageError("holonomy: polar angle must lie in (0, pi)");
    curve.point = [=](double s) -> Eigen::VectorXd {
      return Eigen::Vector3d(std::sin(a) * std::cos(sg * s), std::sin(a) * std::sin(sg * s), std::cos(a));
    };
    curve.velocity = [=](double s) -> Eigen::VectorXd {
      return Eigen::Vector3d(-sg * std::sin(a) * std::sin(sg * s), sg * std::sin(a) * std::cos(sg * s), 0.0);
    };
    // a point of S³ over b = (sin a, 0, cos a) under the Hopf map
    const Eigen::Vector3d b = curve.point(0.0);
    const double h = 0.5 * std::acos(std::clamp(b[0], -1.0, 1.0)), phi = std::atan2(-b[1], b[2]);
    start = ChartPoint(4);
    start << std::cos(h), 0.0, std::cos(phi) * std::sin(h), std::sin(phi) * std::sin(h);
    // base S² carries the round metric scaled by 1/4
    enclosed = 0.5 * M_PI * (1.0 - std::cos(a));
  } else {
    const double cx = c.center_x, cy = c.center_y, r = c.radius;
    if (!(r > 0.0)) throw UsageError("holonomy: radius must be positive");
    curve.point = [=](double s) -> Eigen::VectorXd {
      return Eigen::Vector2d(cx + r * std::cos(sg * s), cy + r * std::sin(sg * s));
    };
    curve.velocity = [=](double s) -> Eigen::VectorXd {
      return Eigen::Vector2d(-sg * r * std::sin(sg * s), sg * r * std::cos(sg * s));
    };
    start = ChartPoint(3);
    start << cx + r, cy, 0.0;
    if (sp.model == Model::heisenberg) {
      enclosed = M_PI * r * r;
    } else {
      // ∫ρ² over the disk, ρ = 1/(1 − |z|²), by Gauss–Legendre in polar coordinates
      QuadratureRule qr = gauss_legendre(64, 0.0, r), qt = gauss_legendre(64, 0.0, 2.0 * M_PI);
      enclosed = 0.0;
      for (std::size_t i = 0; i < qt.nodes.size(); ++i)
        enclosed += qt.weights[i] * integrate(qr, [&](double rr) {
                      const double x = cx + rr * std::cos(qt.nodes[i]), y = cy + rr * std::sin(qt.nodes[i]);
                      const double rho = 1.0 / (1.0 - x * x - y * y);
                      return rho * rho * rr;
                    });
    }
  }
  LiftedCurve L = horizontal_lift(sp, curve, start, c.samples);
  // displacement is +2A for clockwise curves and −2A otherwise
  const double signed_area = c.clockwise ? enclosed : -enclosed;
  double err = L.displacement - 2.0 * signed_area;
  // the fiber of S³ has length 2π
  if (sp.model == Model::sphere3) err = std::remainder(err, 2.0 * M_PI);
  const bool pass = std::abs(err) < 1e-6;
  Json r;
  r["displacement"] = L.displacement;
  r["enclosed_area"] = enclosed;
  r["signed_area"] = signed_area;
  r["twice_signed_area"] = 2.0 * signed_area;
  r["error"] = err;
  r["pass"] = pass;
  write_json(c, r);
  return pass ? kPass : kVerdictFail;
}

int dispatch(const RunConfig& c) {
  if (c.out.empty()) throw UsageError("--out is required");
  if (c.subcommand == "trace") return cmd_trace(c);
  if (c.subcommand == "sphere") return cmd_sphere(c);
  if (c.subcommand == "stability") return cmd_stability(c);
  if (c.subcommand == "isoper") return cmd_isoper(c);
  if (c.subcommand == "holonomy") return cmd_holonomy(c);
  throw UsageError("unknown subcommand: " + c.subcommand);
}

// The run record of a previous output: the "run" key of a JSON report, or
// the "# run=" line of a CSV.
RunConfig load_record(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  Json rec;
  if (text.rfind("# version=", 0) == 0) {
    const auto a = text.find("# run=");
    if (a == std::string::npos) throw UsageError("no run record in " + path);
    const auto b = text.find('\n', a);
    rec = Json::parse(text.substr(a + 6, b - a - 6));
  } else {
    Json doc = Json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.contains("run")) throw UsageError("no run record in " + path);
    rec = doc["run"];
  }
  return rec.get<RunConfig>();
}

void add_space_flags(CLI::App* app, RunConfig& c) {
  app->add_option("--kappa", c.kappa, "Webster curvature of the model")->required();
  app->add_option("--lambda", c.lambda, "geodesic curvature / mean curvature");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical toolkit for Pansu spheres in Sasakian space forms"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  RunConfig c;
  std::string record;

  auto* trace = app.add_subcommand("trace", "integrate one geodesic and write a CSV trace");
  add_space_flags(trace, c);
  trace->add_option("--theta", c.theta, "initial direction angle");
  trace->add_option("--smax", c.smax, "arclength")->check(CLI::PositiveNumber);
  trace->add_option("--step", c.step, "RK4 step")->check(CLI::PositiveNumber);
  trace->add_option("--out", c.out, "CSV output")->required();

  auto* sphere = app.add_subcommand("sphere", "build a Pansu sphere and report area and volume");
  add_space_flags(sphere, c);
  sphere->add_option("--ntheta", c.n_theta, "meridians")->check(CLI::Range(8, 100000));
  sphere->add_option("--ns", c.n_s, "samples per meridian")->check(CLI::Range(8, 100000));
  sphere->add_option("--step", c.step, "RK4 step")->check(CLI::PositiveNumber);
  sphere->add_option("--focus-tol", c.focus_tol, "pole spread tolerance")->check(CLI::PositiveNumber);
  sphere->add_option("--mesh", c.mesh, "OBJ output");
  sphere->add_option("--out", c.out, "JSON report")->required();

  auto* stab = app.add_subcommand("stability", "stability certificates and second-variation checks");
  add_space_flags(stab, c);
  stab->add_option("--mode", c.mode)
      ->required()
      ->check(CLI::IsMember({"wirtinger-poles", "wirtinger-equator", "meanzero", "parallel", "fd"}));
  stab->add_option("--trials", c.trials)->check(CLI::Range(1, 100000000));
  stab->add_option("--m", c.m, "theta truncation")->check(CLI::Range(0, 64));
  stab->add_option("--n", c.n, "polar truncation")->check(CLI::Range(0, 64));
  stab->add_option("--seed", c.seed);
  stab->add_option("--radial", c.radial, "radial profile for --mode fd")->check(CLI::IsMember({"cos", "bump", "exp"}));
  stab->add_option("--fd-h", c.fd_h, "finite-difference step")->check(CLI::PositiveNumber);
  stab->add_option("--ntheta", c.n_theta)->check(CLI::Range(8, 100000));
  stab->add_option("--ns", c.n_s)->check(CLI::Range(8, 100000));
  stab->add_option("--out", c.out, "JSON report")->required();

  auto* iso = app.add_subcommand("isoper", "sphere versus torus in the flat cylinder");
  std::optional<double> volume;
  bool scan = false, table = false;
  auto* g = iso->add_option_group("query");
  g->add_option("--volume", volume)->check(CLI::PositiveNumber);
  g->add_flag("--scan", scan);
  g->add_flag("--table", table);
  g->require_option(1);
  iso->add_option("--resolution", c.resolution)->check(CLI::Range(1000, 100000000));
  iso->add_option("--vmin", c.v_min)->check(CLI::PositiveNumber);
  iso->add_option("--vmax", c.v_max)->check(CLI::PositiveNumber);
  iso->add_option("--rows", c.rows)->check(CLI::Range(2, 10000000));
  iso->add_option("--out", c.out, "JSON report or CSV table")->required();

  auto* hol = app.add_subcommand("holonomy", "vertical displacement of a lifted circle");
  hol->add_option("--kappa", c.kappa, "-1, 0 or 1")->required();
  hol->add_option("--cx", c.center_x);
  hol->add_option("--cy", c.center_y);
  hol->add_option("--radius", c.radius);
  hol->add_option("--polar-angle", c.polar_angle, "circle on the base sphere (kappa = 1)");
  bool ccw = false;
  hol->add_flag("--ccw", ccw, "counter-clockwise orientation");
  hol->add_option("--samples", c.samples)->check(CLI::Range(2, 100000000));
  hol->add_option("--out", c.out, "JSON report")->required();

  auto* rerun = app.add_subcommand("rerun", "repeat the run recorded in a previous output");
  rerun->add_option("--record", record)->required();
  std::string rerun_out, rerun_mesh;
  rerun->add_option("--out", rerun_out)->required();
  rerun->add_option("--mesh", rerun_mesh);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }

  try {
    if (rerun->parsed()) {
      c = load_record(record);
      c.out = rerun_out;
      c.mesh = rerun_mesh;
    } else {
      c.subcommand = app.get_subcommands().front()->get_name();
      if (iso->parsed()) {
        c.isoper = volume ? "volume" : scan ? "scan" : "table";
        if (volume) c.volume = *volume;
      }
      if (hol->parsed()) c.clockwise = !ccw;
    }
    return dispatch(c);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: bad run record: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}
