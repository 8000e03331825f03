#pragma once

// Run configuration for the command-line driver: a JSON document validated
// against a closed schema (unknown keys are errors) before any computation.
// The schema is documented in configs/README.md.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hamshape/functionals.hpp"
#include "hamshape/grid.hpp"
#include "hamshape/hamiltonian.hpp"
#include "hamshape/levelset.hpp"
#include "hamshape/optimizer.hpp"
#include "hamshape/state_solver.hpp"

namespace hamshape::config {

using json = nlohmann::ordered_json;

struct SourceSpec {
  std::string kind = "constant";  // constant | manufactured
  double value = 0.0;
  std::vector<double> target_coefficients;
  RadialState state;
  RadialCutoff cutoff;
  Consistency consistency = Consistency::discrete;
};

struct CostSpec {
  std::string kind = "perimeter";  // tracking | perimeter
  std::string target = "constant";  // constant | radial
  double value = 0.0;
  RadialState radial;
  std::vector<int> components{0};
};

struct RunConfig {
  Grid grid{-1, 1, -1, 1, 3, 3};
  LevelFunction g;
  std::vector<char> free_terms;
  Vec2 anchor;
  std::string control = "zero";  // zero | file
  std::string control_file;
  SourceSpec source;
  CostSpec cost;
  TraceOptions trace;
  OptimizeOptions optimize;
  int probe_count = 20;
  double probe_v_scale = 1.0;
  std::vector<double> gradcheck_lambdas{1e-3, 1e-4, 1e-5};
  std::uint64_t seed = 1;
  std::filesystem::path base_dir;  // relative file paths resolve against this
  json raw;
};

namespace detail {

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw InvalidInput(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw InvalidInput("unknown key '" + it.key() + "' in " + where);
}

template <class T>
T get(const json& j, const char* key, const std::string& where, std::optional<T> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw InvalidInput(where + ": missing key '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidInput(where + "." + key + ": wrong type");
  }
}

inline Vec2 get_point(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw InvalidInput(where + ": expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline double positive(double v, const std::string& where) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput(where + " must be positive");
  return v;
}

inline Primitive parse_primitive(const json& j, const std::string& where) {
  const auto type = get<std::string>(j, "type", where);
  if (type == "monomial") {
    check_keys(j, where, {"type", "px", "py"});
    Monomial m{get<int>(j, "px", where), get<int>(j, "py", where)};
    if (m.px < 0 || m.py < 0 || m.px + m.py > 4) throw InvalidInput(where + ": monomial degree must be 0..4");
    return m;
  }
  if (type == "gaussian") {
    check_keys(j, where, {"type", "center", "width"});
    return Gaussian{get_point(j.at("center"), where + ".center"),
                    positive(get<double>(j, "width", where), where + ".width")};
  }
  if (type == "ellipse") {
    check_keys(j, where, {"type", "center", "a", "b"});
    return Ellipse{get_point(j.at("center"), where + ".center"), positive(get<double>(j, "a", where), where + ".a"),
                   positive(get<double>(j, "b", where), where + ".b")};
  }
  throw InvalidInput(where + ": unknown basis type '" + type + "'");
}

inline RadialState parse_radial(const json& j, const std::string& where) {
  check_keys(j, where, {"center", "radius", "shift", "amplitude", "power"});
  RadialState s;
  s.center = get_point(j.at("center"), where + ".center");
  s.radius = positive(get<double>(j, "radius", where), where + ".radius");
  s.shift = get<double>(j, "shift", where, 0.0);
  s.amplitude = get<double>(j, "amplitude", where, 1.0);
  s.power = get<int>(j, "power", where, 2);
  if (s.power < 2) throw InvalidInput(where + ".power must be at least 2");
  return s;
}

}  // namespace detail

inline RunConfig parse_config(const json& root, std::filesystem::path base_dir = {}) {
  using namespace detail;
  RunConfig rc;
  rc.raw = root;
  rc.base_dir = std::move(base_dir);
  check_keys(root, "config",
             {"domain", "levelset", "control", "source", "cost", "solver", "optimize", "probes", "gradcheck", "seed"});

  const json& d = root.contains("domain") ? root.at("domain") : throw InvalidInput("config: missing 'domain'");
  check_keys(d, "domain", {"x_min", "x_max", "y_min", "y_max", "nx", "ny"});
  const int nx = get<int>(d, "nx", "domain"), ny = get<int>(d, "ny", "domain");
  if (nx < 3 || ny < 3) throw InvalidInput("domain: nx and ny must be at least 3");
  const double x0 = get<double>(d, "x_min", "domain"), x1 = get<double>(d, "x_max", "domain");
  const double y0 = get<double>(d, "y_min", "domain"), y1 = get<double>(d, "y_max", "domain");
  if (!(x1 > x0) || !(y1 > y0)) throw InvalidInput("domain: empty box");
  rc.grid = Grid(x0, x1, y0, y1, nx, ny);

  const json& ls = root.contains("levelset") ? root.at("levelset") : throw InvalidInput("config: missing 'levelset'");
  check_keys(ls, "levelset", {"basis", "coefficients", "pins", "free", "anchor"});
  std::vector<Primitive> basis;
  const json& jb = ls.contains("basis") ? ls.at("basis") : throw InvalidInput("levelset: missing 'basis'");
  if (!jb.is_array() || jb.empty()) throw InvalidInput("levelset.basis: expected a non-empty array");
  for (std::size_t k = 0; k < jb.size(); ++k) basis.push_back(parse_primitive(jb[k], "levelset.basis[" + std::to_string(k) + "]"));
  const auto coeffs = get<std::vector<double>>(ls, "coefficients", "levelset");
  if (coeffs.size() != basis.size()) throw InvalidInput("levelset: coefficients and basis differ in length");
  std::vector<Vec2> pins;
  if (ls.contains("pins"))
    for (std::size_t k = 0; k < ls.at("pins").size(); ++k)
      pins.push_back(get_point(ls.at("pins")[k], "levelset.pins[" + std::to_string(k) + "]"));
  if (pins.size() > 2) throw InvalidInput("levelset: at most two pins");
  rc.g = LevelFunction(basis, coeffs, pins);
  if (ls.contains("free")) {
    const auto fr = get<std::vector<bool>>(ls, "free", "levelset");
    if (fr.size() != basis.size()) throw InvalidInput("levelset: free and basis differ in length");
    for (bool b : fr) rc.free_terms.push_back(b ? 1 : 0);
  }
  rc.anchor = ls.contains("anchor") ? get_point(ls.at("anchor"), "levelset.anchor") : Vec2{};
  if (!rc.grid.contains(rc.anchor)) throw InvalidInput("levelset.anchor lies outside the domain");

  if (root.contains("control")) {
    const json& c = root.at("control");
    check_keys(c, "control", {"init", "file"});
    rc.control = get<std::string>(c, "init", "control", std::string("zero"));
    if (rc.control == "file") rc.control_file = get<std::string>(c, "file", "control");
    else if (rc.control != "zero") throw InvalidInput("control.init must be 'zero' or 'file'");
  }

  if (root.contains("source")) {
    const json& s = root.at("source");
    rc.source.kind = get<std::string>(s, "kind", "source");
    if (rc.source.kind == "constant") {
      check_keys(s, "source", {"kind", "value"});
      rc.source.value = get<double>(s, "value", "source");
    } else if (rc.source.kind == "manufactured") {
      check_keys(s, "source", {"kind", "target_coefficients", "state", "cutoff", "consistency"});
      rc.source.target_coefficients = get<std::vector<double>>(s, "target_coefficients", "source");
      if (rc.source.target_coefficients.size() != basis.size())
        throw InvalidInput("source.target_coefficients and levelset.basis differ in length");
      rc.source.state = parse_radial(s.at("state"), "source.state");
      rc.source.cutoff.center = rc.source.state.center;
      if (s.contains("cutoff")) {
        const json& cj = s.at("cutoff");
        check_keys(cj, "source.cutoff", {"r_inner", "r_outer"});
        rc.source.cutoff.r_inner = positive(get<double>(cj, "r_inner", "source.cutoff"), "source.cutoff.r_inner");
        rc.source.cutoff.r_outer = get<double>(cj, "r_outer", "source.cutoff");
        if (!(rc.source.cutoff.r_outer > rc.source.cutoff.r_inner))
          throw InvalidInput("source.cutoff: r_outer must exceed r_inner");
      }
      const auto mode = get<std::string>(s, "consistency", "source", std::string("discrete"));
      if (mode == "discrete") rc.source.consistency = Consistency::discrete;
      else if (mode == "analytic") rc.source.consistency = Consistency::analytic;
      else throw InvalidInput("source.consistency must be 'discrete' or 'analytic'");
    } else {
      throw InvalidInput("source.kind must be 'constant' or 'manufactured'");
    }
  }

  if (root.contains("cost")) {
    const json& c = root.at("cost");
    check_keys(c, "cost", {"kind", "y_d", "components"});
    rc.cost.kind = get<std::string>(c, "kind", "cost");
    if (rc.cost.kind == "tracking") {
      const json& yd = c.contains("y_d") ? c.at("y_d") : throw InvalidInput("cost: tracking needs 'y_d'");
      rc.cost.target = get<std::string>(yd, "kind", "cost.y_d");
      if (rc.cost.target == "constant") {
        check_keys(yd, "cost.y_d", {"kind", "value"});
        rc.cost.value = get<double>(yd, "value", "cost.y_d");
      } else if (rc.cost.target == "radial") {
        check_keys(yd, "cost.y_d", {"kind", "state"});
        rc.cost.radial = parse_radial(yd.at("state"), "cost.y_d.state");
      } else {
        throw InvalidInput("cost.y_d.kind must be 'constant' or 'radial'");
      }
    } else if (rc.cost.kind == "perimeter") {
      if (c.contains("y_d")) throw InvalidInput("cost: perimeter takes no 'y_d'");
    } else {
      throw InvalidInput("cost.kind must be 'tracking' or 'perimeter'");
    }
    if (c.contains("components")) rc.cost.components = get<std::vector<int>>(c, "components", "cost");
  }

  if (root.contains("solver")) {
    const json& s = root.at("solver");
    check_keys(s, "solver", {"n_samples", "ode_tol", "period_tol", "substeps"});
    rc.trace.n_samples = get<int>(s, "n_samples", "solver", 512);
    if (rc.trace.n_samples < 4 || rc.trace.n_samples % 2) throw InvalidInput("solver.n_samples must be even and >= 4");
    rc.trace.ode_tol = positive(get<double>(s, "ode_tol", "solver", 1e-10), "solver.ode_tol");
    rc.trace.period_tol = positive(get<double>(s, "period_tol", "solver", 1e-8), "solver.period_tol");
    rc.trace.substeps = get<int>(s, "substeps", "solver", 0);
    if (rc.trace.substeps < 0) throw InvalidInput("solver.substeps must be non-negative");
  }

  if (root.contains("optimize")) {
    const json& o = root.at("optimize");
    check_keys(o, "optimize",
               {"max_iter", "max_inner", "tol_inner", "tol_grad", "tol_S", "rho0", "k0", "rho_max",
                "lbfgs_memory", "initial_step", "optimize_u"});
    auto& op = rc.optimize;
    op.max_iter = get<int>(o, "max_iter", "optimize", op.max_iter);
    if (op.max_iter < 0) throw InvalidInput("optimize.max_iter must be non-negative");
    op.max_inner = get<int>(o, "max_inner", "optimize", op.max_inner);
    if (op.max_inner < 1) throw InvalidInput("optimize.max_inner must be positive");
    op.tol_inner = positive(get<double>(o, "tol_inner", "optimize", op.tol_inner), "optimize.tol_inner");
    op.tol_grad = positive(get<double>(o, "tol_grad", "optimize", op.tol_grad), "optimize.tol_grad");
    op.tol_S = positive(get<double>(o, "tol_S", "optimize", op.tol_S), "optimize.tol_S");
    op.rho0 = positive(get<double>(o, "rho0", "optimize", op.rho0), "optimize.rho0");
    op.k0 = get<double>(o, "k0", "optimize", op.k0);
    op.rho_max = positive(get<double>(o, "rho_max", "optimize", op.rho_max), "optimize.rho_max");
    op.lbfgs_memory = get<int>(o, "lbfgs_memory", "optimize", op.lbfgs_memory);
    if (op.lbfgs_memory < 0) throw InvalidInput("optimize.lbfgs_memory must be non-negative");
    op.initial_step = positive(get<double>(o, "initial_step", "optimize", op.initial_step), "optimize.initial_step");
    op.optimize_u = get<bool>(o, "optimize_u", "optimize", op.optimize_u);
  }

  if (root.contains("probes")) {
    const json& p = root.at("probes");
    check_keys(p, "probes", {"count", "v_scale"});
    rc.probe_count = get<int>(p, "count", "probes", 20);
    if (rc.probe_count < 0) throw InvalidInput("probes.count must be non-negative");
    rc.probe_v_scale = get<double>(p, "v_scale", "probes", 1.0);
  }
  if (root.contains("gradcheck")) {
    const json& gc = root.at("gradcheck");
    check_keys(gc, "gradcheck", {"lambdas"});
    rc.gradcheck_lambdas = get<std::vector<double>>(gc, "lambdas", "gradcheck");
    for (double l : rc.gradcheck_lambdas) positive(l, "gradcheck.lambdas[]");
  }
  if (root.contains("seed")) rc.seed = get<std::uint64_t>(root, "seed", "config");
  return rc;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(root, path.parent_path());
}

// ---------------------------------------------------------------------------
// Assembling library objects from a validated configuration.

inline std::filesystem::path resolve(const RunConfig& rc, const std::string& file) {
  const std::filesystem::path p(file);
  return p.is_absolute() || rc.base_dir.empty() ? p : rc.base_dir / p;
}

inline ScalarField initial_control(const RunConfig& rc) {
  if (rc.control == "zero") return ScalarField(rc.grid);
  std::ifstream in(resolve(rc, rc.control_file));
  if (!in) throw InvalidInput("cannot open control file " + rc.control_file);
  ScalarField u = read_field_csv(in);
  if (!(u.grid() == rc.grid)) throw InvalidInput("control file grid differs from the domain block");
  return u;
}

inline ScalarField source_field(const RunConfig& rc) {
  if (rc.source.kind == "constant") return ScalarField(rc.grid, rc.source.value);
  const LevelFunction target = rc.g.with_coeffs(rc.source.target_coefficients);
  return manufacture_control(rc.grid, target, rc.source.state, rc.source.cutoff, rc.source.consistency).f;
}

inline CostIntegrand cost_integrand(const RunConfig& rc) {
  if (rc.cost.kind == "perimeter") return CostIntegrand::perimeter();
  if (rc.cost.target == "radial") return CostIntegrand::tracking(rc.cost.radial);
  return CostIntegrand::tracking_constant(rc.cost.value);
}

inline Problem make_problem(const RunConfig& rc) {
  Problem pb;
  pb.op = std::make_shared<const DirichletOperator>(rc.grid);
  pb.f = source_field(rc);
  pb.cost = cost_integrand(rc);
  pb.anchor = rc.anchor;
  pb.trace = rc.trace;
  pb.cost_components = rc.cost.components;
  pb.free_terms = rc.free_terms;
  return pb;
}

/// The configuration with the level-set coefficients and the control replaced,
/// for resuming from a final state.
inline json with_state(const RunConfig& rc, const LevelFunction& g, const std::string& control_file) {
  json out = rc.raw;
  out["levelset"]["coefficients"] = g.coeffs();
  out["control"] = json{{"init", "file"}, {"file", control_file}};
  return out;
}

}  // namespace hamshape::config
