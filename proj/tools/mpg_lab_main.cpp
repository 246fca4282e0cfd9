#include "mpg_lab/io.hpp"
#include "mpg_lab/parallel.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

namespace {

using namespace mpg;

struct CommonArgs {
  std::string scenario_path;
  std::string out_dir = ".";
  bool override_assumptions = false;
  double tol = 0.0;
  long max_steps = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--scenario", args.scenario_path, "scenario JSON file")->required();
  cmd->add_option("--out", args.out_dir, "output directory (created if missing)");
  cmd->add_flag("--override-assumptions", args.override_assumptions,
                "run even when the standing-assumption audit fails");
  cmd->add_option("--tol", args.tol, "override the equilibrium solver tolerance");
  cmd->add_option("--max-steps", args.max_steps, "override the simulation step budget");
}

std::string status_name(TrajectoryLog::Status s) {
  switch (s) {
  case TrajectoryLog::Status::Converged: return "converged";
  case TrajectoryLog::Status::Diverged: return "diverged";
  default: return "max-steps";
  }
}

std::string assumption_block(const AssumptionReport& rep) {
  std::ostringstream os;
  os << "assumptions: " << (rep.pass() ? "pass" : "FAIL") << "\n";
  os << "  spectral radius of A: " << format_double(rep.spectral_radius_A) << "\n";
  os << "  constraint set nonempty and compact: " << (rep.set_ok ? "yes" : "no") << "\n";
  os << "  conjectured costs convex: " << (rep.costs_convex ? "yes" : "no") << "\n";
  os << "  monotonicity constants:";
  for (double r : rep.rho) os << ' ' << format_double(r);
  os << "\n  all constants exceed one: " << (rep.all_rho_exceed_one ? "yes" : "no") << "\n";
  for (const std::string& f : rep.failures()) os << "  failure: " << f << "\n";
  return os.str();
}

std::string out_path(const CommonArgs& args, const char* name) {
  return (std::filesystem::path(args.out_dir) / name).string();
}

/// Load, apply overrides, and gate on the assumption audit. Writes the
/// audit into `header` either way.
Scenario prepare(const CommonArgs& args, std::string& header) {
  Scenario s = load_scenario(args.scenario_path);
  if (args.tol > 0) s.solver.tol = args.tol;
  if (args.max_steps > 0) s.simulate.max_steps = args.max_steps;
  std::filesystem::create_directories(args.out_dir);

  AssumptionReport rep = scenario_assumptions(s);
  std::ostringstream os;
  os << "scenario: " << (s.name.empty() ? args.scenario_path : s.name) << "\n";
  os << assumption_block(rep);
  header = os.str();
  if (!rep.pass() && !args.override_assumptions) {
    write_file_atomic(out_path(args, "report.txt"), header);
    std::string joined;
    for (const std::string& f : rep.failures()) joined += (joined.empty() ? "" : "; ") + f;
    throw AssumptionError(joined + " (use --override-assumptions to run regardless)");
  }
  return s;
}

int cmd_simulate(const CommonArgs& args) {
  std::string header;
  Scenario s = prepare(args, header);
  ControllerBank bank = make_bank(s);
  SimOptions so = s.simulate;
  so.threads = resolve_threads(0);
  TrajectoryLog log = simulate_run(bank, s.initial_states[0], so);

  write_file_atomic(out_path(args, "trajectory.csv"), trajectory_csv(bank, log));

  std::ostringstream os;
  os << header;
  os << "command: simulate\n";
  os << "initial state: index 0 of the scenario's initial_states\n";
  os << "status: " << status_name(log.status) << "\n";
  os << "steps: " << log.steps.size() << "\n";
  os << "final state:";
  for (Index k = 0; k < log.final_x.size(); ++k) os << ' ' << format_double(log.final_x(k));
  os << "\n";
  if (log.equilibrium) {
    os << "equilibrium:";
    for (Index k = 0; k < log.equilibrium->x_bar.size(); ++k)
      os << ' ' << format_double(log.equilibrium->x_bar(k));
    os << "\n";
    os << "equilibrium residual: " << format_double(log.equilibrium->residual) << "\n";
    os << "steps to converge: " << log.equilibrium->steps_to_converge << "\n";
  }
  write_file_atomic(out_path(args, "report.txt"), os.str());
  std::cout << "status: " << status_name(log.status) << "\n";
  return 0;
}

int cmd_certify(const CommonArgs& args, bool monitor) {
  std::string header;
  Scenario s = prepare(args, header);
  ControllerBank bank = make_bank(s);
  CertificateProblem prob = build_certificate_problem(bank);
  CertifySearchResult res = find_certificate(prob, s.certify);

  std::ostringstream ct;
  ct << "verdict: "
     << (res.verdict == CertifyVerdict::Certified          ? "certified"
         : res.verdict == CertifyVerdict::LikelyInfeasible ? "likely-infeasible"
                                                           : "inconclusive")
     << "\n";
  ct << "iterations: " << res.iterations << "\n";
  ct << "best objective value: " << format_double(res.best_value) << "\n";

  int code = 0;
  std::ostringstream rep;
  rep << header << "command: certify\n";
  if (res.certificate) {
    const StabilityCertificate& cert = *res.certificate;
    ct << "lambda: " << format_double(cert.lambda) << "\n";
    ct << "epsilon: " << format_double(cert.epsilon) << "\n";
    ct << "achieved max eigenvalue (shifted): " << format_double(cert.achieved_max_eig) << "\n";
    ct << "P:\n";
    for (Index r = 0; r < cert.P.rows(); ++r) {
      ct << " ";
      for (Index c = 0; c < cert.P.cols(); ++c) ct << ' ' << format_double(cert.P(r, c));
      ct << "\n";
    }
    CertificateCheck chk = verify_certificate(prob, cert, s.certify);
    ct << "independent verification: " << (chk.p_positive && chk.lmi_holds ? "pass" : "FAIL")
       << "\n";
    ct << "  lambda_min(P): " << format_double(chk.lambda_min_P) << "\n";
    ct << "  max eigenvalue of shifted matrix: " << format_double(chk.max_eig_with_eps) << "\n";
    if (!(chk.p_positive && chk.lmi_holds)) code = 5;

    if (monitor) {
      SimOptions so = s.simulate;
      so.threads = resolve_threads(0);
      TrajectoryLog log = simulate_run(bank, s.initial_states[0], so);
      rep << "monitored run status: " << status_name(log.status) << "\n";
      if (log.equilibrium) {
        std::vector<Vec> states;
        for (const StepRecord& r : log.steps) states.push_back(r.x);
        states.push_back(log.final_x);
        MonitorOptions mo;
        mo.epsilon = cert.epsilon;
        LyapunovReport lm = lyapunov_monitor(states, cert.P, log.equilibrium->x_bar, mo);
        rep << "lyapunov monitor: " << lm.violations.size() << " violations, "
            << lm.sign_violations.size() << " sign violations (exclusion radius "
            << format_double(lm.radius_used) << ")\n";
        write_file_atomic(out_path(args, "trajectory.csv"),
                          trajectory_csv(bank, log, &cert.P, &log.equilibrium->x_bar));
      } else {
        rep << "lyapunov monitor: skipped (no equilibrium detected)\n";
        write_file_atomic(out_path(args, "trajectory.csv"), trajectory_csv(bank, log));
      }
    }
  } else if (res.verdict == CertifyVerdict::LikelyInfeasible) {
    ct << "note: best value stayed positive after the iteration cap; the condition is likely"
          " infeasible for this model\n";
  } else {
    ct << "note: search exhausted its budget without a definite answer\n";
    code = 5;
  }
  write_file_atomic(out_path(args, "certificate.txt"), ct.str());
  rep << "verdict: "
      << (res.verdict == CertifyVerdict::Certified          ? "certified"
          : res.verdict == CertifyVerdict::LikelyInfeasible ? "likely-infeasible"
                                                            : "inconclusive")
      << "\n";
  write_file_atomic(out_path(args, "report.txt"), rep.str());
  std::cout << "verdict: "
            << (res.verdict == CertifyVerdict::Certified          ? "certified"
                : res.verdict == CertifyVerdict::LikelyInfeasible ? "likely-infeasible"
                                                                  : "inconclusive")
            << "\n";
  return code;
}

int cmd_sweep(const CommonArgs& args, const std::string& grid_text) {
  std::string header;
  Scenario s = prepare(args, header);
  std::vector<double> grid = parse_grid(grid_text);
  SweepOptions so;
  so.threads = resolve_threads(0);
  SweepResult sweep = theta_sweep(s, grid, so);

  const Index n_x = s.dyn.state_dim();
  write_file_atomic(out_path(args, "sweep.csv"), sweep_csv(sweep, n_x));
  write_file_atomic(out_path(args, "sweep.svg"),
                    sweep_svg(sweep, n_x, "equilibrium manifold over theta"));

  int irregular = 0, unconverged = 0;
  for (const SweepPoint& p : sweep.points) {
    if (!p.converged) ++unconverged;
    else if (!p.regular) ++irregular;
  }
  std::ostringstream rep;
  rep << header << "command: sweep\n";
  rep << "grid: " << grid_text << " (" << grid.size() << " points)\n";
  rep << "converged points: " << (grid.size() - (size_t)unconverged) << "/" << grid.size()
      << "\n";
  rep << "regular points: " << (grid.size() - (size_t)unconverged - (size_t)irregular) << "/"
      << grid.size() << "\n";
  for (const SweepPoint& p : sweep.points)
    if (!p.note.empty())
      rep << "  theta " << format_double(p.theta) << ": " << p.note << "\n";
  write_file_atomic(out_path(args, "report.txt"), rep.str());
  std::cout << "points: " << grid.size() << ", irregular: " << irregular
            << ", unconverged: " << unconverged << "\n";
  if (irregular > 0) return 4;
  if (unconverged > 0) return 3;
  return 0;
}

int cmd_gap(const CommonArgs& args) {
  std::string header;
  Scenario s = prepare(args, header);
  ControllerBank bank = make_bank(s);
  SimOptions so = s.simulate;
  so.threads = resolve_threads(0);
  so.compute_gaps = true;
  TrajectoryLog log = simulate_run(bank, s.initial_states[0], so);

  write_file_atomic(out_path(args, "gap.csv"), gap_csv(bank, log));
  std::ostringstream rep;
  rep << header << "command: gap\n";
  rep << "status: " << status_name(log.status) << "\n";
  rep << "steps: " << log.steps.size() << "\n";
  rep << "gap convention: "
      << (so.gap_convention == GapConvention::PredictedTails ? "predicted_tails"
                                                             : "first_stage_only")
      << "\n";
  write_file_atomic(out_path(args, "report.txt"), rep.str());
  std::cout << "status: " << status_name(log.status) << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"mpg-lab: closed-loop simulation, stability certification, and sensitivity"
               " analysis for multi-agent predictive controllers with misspecified"
               " conjectures"};
  app.require_subcommand(1);

  CommonArgs args;
  bool monitor = false;
  std::string grid_text = "0:0.1:1";

  CLI::App* sim = app.add_subcommand("simulate", "closed-loop run, trajectory CSV and report");
  add_common(sim, args);
  CLI::App* cert = app.add_subcommand("certify", "search for a quadratic stability certificate");
  add_common(cert, args);
  cert->add_flag("--monitor", monitor, "also simulate and check Lyapunov decrease");
  CLI::App* sweep = app.add_subcommand("sweep", "equilibrium manifold over a theta grid");
  add_common(sweep, args);
  sweep->add_option("--grid", grid_text, "theta grid as a:step:b (default 0:0.1:1)");
  CLI::App* gap = app.add_subcommand("gap", "per-step anticipated-versus-realized cost gaps");
  add_common(gap, args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(args);
    if (cert->parsed()) return cmd_certify(args, monitor);
    if (sweep->parsed()) return cmd_sweep(args, grid_text);
    if (gap->parsed()) return cmd_gap(args);
  } catch (const mpg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return mpg::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
