// Batch driver: trace, solve, gradcheck, optimize and residual workflows over
// a JSON run configuration. Exit codes: 0 success, 1 internal or solver
// failure, 2 invalid input or inadmissible level function.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "hamshape/adjoint.hpp"
#include "hamshape/gradcheck.hpp"
#include "hamshape/optimizer.hpp"

namespace fs = std::filesystem;
using namespace hamshape;
using config::json;
using config::RunConfig;

namespace {

constexpr int kInternal = 1;
constexpr int kInvalid = 2;

class Inadmissible : public InvalidInput {
 public:
  explicit Inadmissible(const std::string& report) : InvalidInput(report) {}
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

json census_json(const ComponentCensus& census, const std::vector<BoundaryTrace>& traces) {
  json comps = json::array();
  for (std::size_t c = 0; c < census.components.size(); ++c) {
    const auto& bc = census.components[c];
    json e{{"id", c},
           {"seed", {bc.seed.x, bc.seed.y}},
           {"orientation", bc.orientation},
           {"encloses", bc.encloses},
           {"pinned", bc.pinned}};
    if (c < traces.size()) {
      e["period"] = traces[c].period;
      e["substeps"] = traces[c].substeps;
      e["trace_file"] = "trace_" + std::to_string(c) + ".csv";
    }
    comps.push_back(e);
  }
  return json{{"components", comps}, {"holes", census.holes}};
}

void write_traces(const fs::path& dir, const std::vector<BoundaryTrace>& traces) {
  for (std::size_t c = 0; c < traces.size(); ++c) {
    std::ofstream out(dir / ("trace_" + std::to_string(c) + ".csv"));
    write_trace_csv(out, traces[c]);
  }
}

/// Admissibility, census and traces for the configured level function.
Evaluation evaluate_or_throw(const Problem& pb, const LevelFunction& g, const ScalarField& u) {
  const auto report = check_admissible(g, pb.grid());
  if (!report.admissible) throw Inadmissible(report.summary());
  auto r = evaluate_point(pb, g, u);
  if (!r.eval) throw SolverFailure(r.failure, 0.0);
  return std::move(*r.eval);
}

json summary_json(const Evaluation& ev) {
  return json{{"J", ev.J}, {"S", ev.S}, {"holes", ev.ctx.census.holes}, {"components", ev.ctx.traces.size()}};
}

int cmd_trace(const RunConfig& rc, const fs::path& out) {
  const auto report = check_admissible(rc.g, rc.grid);
  if (!report.admissible) throw Inadmissible(report.summary());
  const auto census = extract_components(rc.g, rc.grid, rc.anchor, rc.g.pins());
  const auto traces = trace_components(rc.g, census, rc.trace, rc.grid.diameter());
  write_traces(out, traces);
  write_text(out / "census.json", census_json(census, traces).dump(2) + "\n");
  std::printf("components %zu holes %zu\n", census.size(), census.holes);
  for (std::size_t c = 0; c < traces.size(); ++c)
    std::printf("component %zu period %.12g substeps %d\n", c, traces[c].period, traces[c].substeps);
  return 0;
}

int cmd_solve(const RunConfig& rc, const fs::path& out) {
  const Problem pb = config::make_problem(rc);
  const Evaluation ev = evaluate_or_throw(pb, rc.g, config::initial_control(rc));
  {
    std::ofstream os(out / "state.csv");
    write_field_csv(os, ev.ctx.pair.y);
  }
  write_traces(out, ev.ctx.traces);
  json s = summary_json(ev);
  s["neumann_form"] = eval_neumann_form(ev.ctx);
  s["max_neumann_defect"] = max_neumann_defect(ev.ctx);
  write_text(out / "solve.json", s.dump(2) + "\n");
  std::printf("J %.12g S %.6e\n", ev.J, ev.S);
  return 0;
}

/// Difference-quotient direction: the first seeded probe.
ProbeDirection gradcheck_direction(const RunConfig& rc, const Problem& pb, const LevelFunction& g) {
  auto probes = make_probes(pb, g, 1, rc.seed, rc.probe_v_scale);
  return std::move(probes.front());
}

int cmd_gradcheck(const RunConfig& rc, const fs::path& out, const std::string& mutate, bool zero_direction) {
  const Problem pb = config::make_problem(rc);
  const Evaluation ev = evaluate_or_throw(pb, rc.g, config::initial_control(rc));
  ProbeDirection dir = gradcheck_direction(rc, pb, rc.g);
  if (zero_direction) {
    dir.h = rc.g.scaled(0.0);
    dir.v = ScalarField(rc.grid);
  }
  GradcheckOptions opt;
  opt.lambdas = rc.gradcheck_lambdas;
  if (mutate == "dS-sign") opt.ds_override = corrupted_dS;
  const auto checks = run_gradchecks(ev.ctx, pb.cost, dir.h, dir.v, opt);
  json arr = json::array();
  bool all = true;
  for (const auto& c : checks) {
    all = all && c.pass;
    arr.push_back(json{{"name", c.name},
                       {"analytic", c.analytic},
                       {"lambdas", c.lambdas},
                       {"errors", c.errors},
                       {"ratios", c.degenerate ? json::array() : json(c.ratios)},
                       {"degenerate", c.degenerate},
                       {"pass", c.pass}});
    std::printf("%-14s %s", c.name.c_str(), c.degenerate ? "SKIP (degenerate)" : (c.pass ? "PASS" : "FAIL"));
    if (!c.degenerate)
      for (double r : c.ratios) std::printf(" ratio=%.3f", r);
    std::printf("\n");
  }
  json rep{{"pass", all}, {"mutation", mutate.empty() ? json(nullptr) : json(mutate)}, {"checks", arr}};
  write_text(out / "gradcheck.json", rep.dump(2) + "\n");
  std::printf("gradcheck %s\n", all ? "PASS" : "FAIL");
  return 0;
}

json residual_json(const ResidualReport& rep) {
  json probes = json::array();
  for (const auto& p : rep.probes)
    probes.push_back(json{{"dJ", p.dJ}, {"dS", p.dS}, {"residual", p.residual}});
  const bool qualification_failure = !rep.probes.empty() && !rep.fit.reliable;
  return json{{"k", rep.fit.k},
              {"qualification_failure", qualification_failure},
              {"max_residual", rep.max_residual},
              {"max_equivalence_error", rep.max_equivalence_error},
              {"probes", probes}};
}

int cmd_residual(const RunConfig& rc, const fs::path& out, const double* k_forced) {
  const Problem pb = config::make_problem(rc);
  const Evaluation ev = evaluate_or_throw(pb, rc.g, config::initial_control(rc));
  const auto probes = make_probes(pb, rc.g, rc.probe_count, rc.seed, rc.probe_v_scale);
  const auto rep = residual_report(ev.ctx, pb.cost, probes, k_forced);
  {
    std::ofstream os(out / "probes.jsonl");
    write_probe_jsonl(os, rep.probes);
  }
  write_text(out / "residual.json", residual_json(rep).dump(2) + "\n");
  std::printf("probes %zu k %.6e max_residual %.6e equivalence_error %.3e%s\n", rep.probes.size(), rep.fit.k,
              rep.max_residual, rep.max_equivalence_error,
              (!rep.probes.empty() && !rep.fit.reliable) ? " qualification_failure" : "");
  return 0;
}

int cmd_optimize(const RunConfig& rc, const fs::path& out, bool quiet) {
  const Problem pb = config::make_problem(rc);
  const ScalarField u0 = config::initial_control(rc);
  const auto report = check_admissible(rc.g, rc.grid);
  if (!report.admissible) throw Inadmissible(report.summary());
  OptState st = initial_state(pb, rc.g, u0, rc.optimize);
  std::ofstream hist(out / "history.jsonl");
  st = optimize(pb, std::move(st), rc.optimize, [&](const OptState&, const HistoryRecord& h) {
    write_history_jsonl(hist, {h});
    hist.flush();
    if (!quiet)
      std::printf("%5d J %.6e S %.3e L %.6e grad %.3e k %.3e rho %.1e holes %zu %s\n", h.iter, h.J, h.S, h.L,
                  h.grad_norm, h.k, h.rho, h.holes, h.event.c_str());
  });
  {
    std::ofstream os(out / "final_u.csv");
    write_field_csv(os, st.u);
  }
  write_traces(out, st.eval.ctx.traces);
  write_text(out / "final_config.json", config::with_state(rc, st.g, "final_u.csv").dump(2) + "\n");
  json s = summary_json(st.eval);
  s["stop_reason"] = st.stop_reason;
  s["iterations"] = st.iter;
  s["k"] = st.k;
  s["rho"] = st.rho;
  s["initial"] = json{{"J", st.history.front().J}, {"S", st.history.front().S}};
  s["coefficients"] = st.g.coeffs();
  write_text(out / "summary.json", s.dump(2) + "\n");
  std::printf("stop %s iterations %d J %.12g S %.6e\n", st.stop_reason.c_str(), st.iter, st.eval.J, st.eval.S);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-domain shape optimization with Hamiltonian boundary parametrization"};
  app.require_subcommand(1);
  std::string config_path, out_dir = ".";
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--out", out_dir, "output directory (created if missing)");
  };
  auto* trace = app.add_subcommand("trace", "trace every boundary curve; write CSVs and the census");
  auto* solve = app.add_subcommand("solve", "solve the state equation; write the state and J, S");
  auto* grad = app.add_subcommand("gradcheck", "difference-quotient checks of the derivative formulas");
  auto* optim = app.add_subcommand("optimize", "augmented-Lagrangian descent");
  auto* resid = app.add_subcommand("residual", "optimality residual on the probe basis");
  for (auto* s : {trace, solve, grad, optim, resid}) add_common(s);

  std::string mutate;
  bool zero_direction = false;
  grad->add_option("--mutate", mutate, "feed a corrupted formula through the checks")
      ->check(CLI::IsMember({"dS-sign"}));
  grad->add_flag("--zero-direction", zero_direction, "check along the zero direction");
  bool quiet = false;
  optim->add_flag("-q,--quiet", quiet, "print only the final line");
  double k_value = 0.0;
  auto* k_opt = resid->add_option("--k", k_value, "use this multiplier instead of the least-squares estimate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInvalid;
  }

  try {
    const RunConfig rc = config::load_config(config_path);
    const fs::path out(out_dir);
    fs::create_directories(out);
    if (*trace) return cmd_trace(rc, out);
    if (*solve) return cmd_solve(rc, out);
    if (*grad) return cmd_gradcheck(rc, out, mutate, zero_direction);
    if (*optim) return cmd_optimize(rc, out, quiet);
    if (*resid) return cmd_residual(rc, out, k_opt->count() ? &k_value : nullptr);
  } catch (const Inadmissible& e) {
    std::fprintf(stderr, "inadmissible level function: %s\n", e.what());
    return kInvalid;
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kInvalid;
  } catch (const AnchorNotInClosure& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInternal;
  }
  return kInternal;
}
