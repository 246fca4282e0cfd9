#pragma once

#include "mpg_lab/mpg.hpp"

#include <optional>
#include <vector>

namespace mpg {

/// How the anticipated-versus-actual cost gap is measured. PredictedTails
/// (default) evaluates each agent's own horizon objective on the signal
/// whose first stage is the realized joint action and whose later stages
/// are every agent's own predicted tail, minus the objective of the
/// agent's own full prediction. FirstStageOnly compares single stage
/// costs of the realized joint action against the agent's predicted
/// joint first stage.
enum class GapConvention { PredictedTails, FirstStageOnly };

struct SimOptions {
  double conv_tol = 1e-10;
  double div_threshold = 1e3;
  long max_steps = 10000;
  int consecutive = 10; // steps below conv_tol required to declare convergence
  int threads = 1;
  bool compute_gaps = true;
  GapConvention gap_convention = GapConvention::PredictedTails;
};

struct StepRecord {
  long t = 0;
  Vec x;
  Vec u_applied;
  Vec gaps; // one per agent; NaN when not computable
  std::vector<VgneSolution> solutions;
};

struct EquilibriumEstimate {
  Vec x_bar;
  double residual = 0.0; // ||x_bar - (A x_bar + B kappa(x_bar))||
  long steps_to_converge = 0;
};

struct TrajectoryLog {
  enum class Status { Converged, MaxSteps, Diverged };
  Status status = Status::MaxSteps;
  std::vector<StepRecord> steps;
  Vec final_x;
  std::optional<EquilibriumEstimate> equilibrium;
};

/// One closed-loop transition: solve every agent's game at x, apply the
/// stacked first-stage actions.
std::pair<Vec, StepRecord> simulate_step(ControllerBank& bank, const Vec& x, long t,
                                         const SimOptions& opts);

/// Closed-loop rollout with convergence, divergence and step-budget
/// termination. On convergence the final state is refined by extra steps
/// until the one-step residual drops well below conv_tol, so the reported
/// equilibrium satisfies ||x - step(x)|| <= conv_tol.
TrajectoryLog simulate_run(ControllerBank& bank, const Vec& x0, const SimOptions& opts = {});

/// Gap vector for one step: per agent, the cost of the comparison signal
/// minus the cost of its own plan, both under the agent's own objective.
Vec game_to_real_gap(const ControllerBank& bank, const Vec& x,
                     const std::vector<VgneSolution>& solutions,
                     GapConvention convention = GapConvention::PredictedTails);

struct MonitorOptions {
  double epsilon = 1e-6; // certificate decrease rate
  double floor = 1e-12;  // numerical decrease floor
  double radius = 0.0;   // exclusion radius; 0 derives a sound default
  double safety = 3.0;
};

struct LyapunovReport {
  std::vector<double> delta_v;     // V(x_{t+1}) - V(x_t)
  std::vector<long> violations;     // steps with dV > -floor outside the radius
  std::vector<long> sign_violations; // steps with dV >= 0 outside the radius
  double radius_used = 0.0;
};

/// Audits V(x) = (x - x_bar)' P (x - x_bar) along a trajectory. Near the
/// equilibrium the certified decrease falls under the numerical floor, so
/// steps inside the exclusion radius are not counted; the default radius
/// safety * sqrt(floor / epsilon) is exactly where the certified decrease
/// clears the floor with margin.
LyapunovReport lyapunov_monitor(const std::vector<Vec>& states, const Mat& P, const Vec& x_bar,
                                const MonitorOptions& opts);

} // namespace mpg
