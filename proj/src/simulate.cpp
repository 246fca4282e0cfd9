#include "mpg_lab/simulate.hpp"

#include "mpg_lab/linalg.hpp"

#include <cmath>
#include <limits>

namespace mpg {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

bool uniform_horizon(const ControllerBank& bank) {
  int K = bank.vi(0).layout.horizon;
  for (int j = 1; j < bank.num_agents(); ++j)
    if (bank.vi(j).layout.horizon != K) return false;
  return true;
}

} // namespace

Vec game_to_real_gap(const ControllerBank& bank, const Vec& x,
                     const std::vector<VgneSolution>& solutions, GapConvention convention) {
  const int n = bank.num_agents();
  Vec gaps = Vec::Constant(n, kNan);
  if (!uniform_horizon(bank)) return gaps;
  const SignalLayout& L = bank.vi(0).layout;

  if (convention == GapConvention::PredictedTails) {
    // Every player contributes the plan it would follow itself, so the
    // comparison signal realizes the applied first stage and rolls out
    // each agent's own predicted tail afterwards.
    Vec comparison(L.dim());
    for (int i = 0; i < n; ++i)
      comparison.segment(L.agent_start(i), L.agent_width(i)) =
          solutions[(size_t)i].u.segment(L.agent_start(i), L.agent_width(i));
    for (int j = 0; j < n; ++j) {
      StageCost own = bank.assembly(j).conjecture.effective_cost(j);
      double J_cmp = horizon_cost(bank.dynamics(), own, L, comparison, x);
      double J_plan = horizon_cost(bank.dynamics(), own, L, solutions[(size_t)j].u, x);
      gaps(j) = J_cmp - J_plan;
    }
    return gaps;
  }

  Vec u_real = bank.realized_action(solutions);
  for (int j = 0; j < n; ++j) {
    StageCost own = bank.assembly(j).conjecture.effective_cost(j);
    Vec u_pred = L.stage_slice(solutions[(size_t)j].u, 0);
    double state_cost = x.dot(own.Q * x) + own.q.dot(x);
    double g_real = state_cost + u_real.dot(own.R * u_real);
    double g_pred = state_cost + u_pred.dot(own.R * u_pred);
    gaps(j) = g_real - g_pred;
  }
  return gaps;
}

std::pair<Vec, StepRecord> simulate_step(ControllerBank& bank, const Vec& x, long t,
                                         const SimOptions& opts) {
  StepRecord rec;
  rec.t = t;
  rec.x = x;
  rec.solutions = bank.solve_all(x, opts.threads);
  rec.u_applied = bank.realized_action(rec.solutions);
  if (opts.compute_gaps)
    rec.gaps = game_to_real_gap(bank, x, rec.solutions, opts.gap_convention);
  else
    rec.gaps = Vec::Constant(bank.num_agents(), kNan);
  Vec x_next = bank.dynamics().A * x + bank.dynamics().joint_B() * rec.u_applied;
  return {std::move(x_next), std::move(rec)};
}

TrajectoryLog simulate_run(ControllerBank& bank, const Vec& x0, const SimOptions& opts) {
  if (x0.size() != bank.dynamics().state_dim())
    throw SchemaError("simulate: initial state dimension mismatch");
  TrajectoryLog log;
  Vec x = x0;
  int consecutive = 0;
  long converged_at = -1;
  bool refining = false;
  long refine_budget = 300;

  for (long t = 0;; ++t) {
    if (x.norm() >= opts.div_threshold) {
      log.status = TrajectoryLog::Status::Diverged;
      break;
    }
    if (!refining && t >= opts.max_steps) {
      log.status = TrajectoryLog::Status::MaxSteps;
      break;
    }

    auto [x_next, rec] = simulate_step(bank, x, t, opts);
    log.steps.push_back(std::move(rec));
    double step_norm = (x_next - x).norm();
    x = std::move(x_next);

    if (step_norm <= opts.conv_tol) {
      if (++consecutive >= opts.consecutive && !refining) {
        refining = true;
        converged_at = t;
      }
    } else {
      consecutive = 0;
    }

    if (refining) {
      // Drive the one-step residual well below conv_tol so the reported
      // equilibrium re-verifies within tolerance.
      if (step_norm <= 0.05 * opts.conv_tol || --refine_budget <= 0) {
        log.status = TrajectoryLog::Status::Converged;
        break;
      }
    }
  }

  log.final_x = x;
  if (log.status == TrajectoryLog::Status::Converged) {
    EquilibriumEstimate est;
    est.x_bar = x;
    auto sols = bank.solve_all(x, opts.threads);
    Vec u = bank.realized_action(sols);
    est.residual = (x - (bank.dynamics().A * x + bank.dynamics().joint_B() * u)).norm();
    est.steps_to_converge = converged_at;
    log.equilibrium = std::move(est);
  }

  return log;
}

LyapunovReport lyapunov_monitor(const std::vector<Vec>& states, const Mat& P, const Vec& x_bar,
                                const MonitorOptions& opts) {
  if (!cholesky_positive_definite(P, 0.0))
    throw SchemaError("lyapunov monitor: P is not positive definite");
  LyapunovReport rep;
  double radius = opts.radius;
  if (radius <= 0.0)
    radius = opts.safety * std::sqrt(opts.floor / std::max(opts.epsilon, 1e-300));
  rep.radius_used = radius;
  if (states.size() < 2) return rep;

  auto V = [&](const Vec& x) {
    Vec e = x - x_bar;
    return e.dot(P * e);
  };
  for (size_t t = 0; t + 1 < states.size(); ++t) {
    double dv = V(states[t + 1]) - V(states[t]);
    rep.delta_v.push_back(dv);
    double dist = (states[t] - x_bar).norm();
    if (dist <= radius) continue;
    if (dv > -opts.floor) rep.violations.push_back((long)t);
    if (dv >= 0.0) rep.sign_violations.push_back((long)t);
  }
  return rep;
}

} // namespace mpg
