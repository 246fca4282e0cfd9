#pragma once

#include "mpg_lab/mpg.hpp"

#include <vector>

namespace mpg {

struct SensOptions {
  double kkt_tol = 1e-8;         // acceptance tolerance on the stacked KKT residual
  double active_tol = 1e-8;      // activity: |Cu - d|_k <= active_tol * (1 + ||d||_inf)
  double strict_tol = 1e-8;      // strict complementarity: nu_k >= strict_tol on active rows
  double rank_tol = 1e-9;        // SVD tolerance for the constraint-gradient rank check
  double max_condition = 1e12;   // refusal threshold for linear-system conditioning
  double equilibrium_tol = 1e-9; // residual required of a claimed equilibrium state
};

/// A primal-dual point of one agent's prediction game together with the
/// activity classification and strictness margins the implicit-function
/// machinery depends on.
struct KktPoint {
  Vec u;
  Vec nu; // one per inequality row, zero on inactive rows
  Vec mu; // one per equality row
  Vec x;  // state the prediction was computed at
  std::vector<Index> active;
  double kkt_residual = 0.0;
  double min_active_multiplier = 0.0; // +inf when no row is active
  double min_inactive_slack = 0.0;    // +inf when every row is active
  bool licq_ok = false;
  bool strict_ok = false;
};

/// Classify activity and verify the stationarity, feasibility, and
/// complementarity residuals of a solver output. Throws SolverError when
/// the residual exceeds opts.kkt_tol; regularity flags are recorded, not
/// enforced.
KktPoint make_kkt_point(const AffineVI& vi, const VgneSolution& sol, const Vec& x,
                        const SensOptions& opts = {});

/// Derivatives of the stacked KKT residual map. dp is square over
/// (u, nu, mu); dx and dtheta hold one column block per parameter.
struct KktJacobians {
  Mat dp;
  Mat dx;
  Mat dtheta;
};

/// Assemble the KKT Jacobians at a verified point. The primal-dual block
/// keeps every inequality row (complementarity rows diag(nu) C and
/// diag(Cu - d)), with no active-set reduction. Throws RegularityError on
/// a rank-deficient active constraint gradient or a weakly active row,
/// naming the offending row.
KktJacobians kkt_jacobians(const KktPoint& point, const AffineVI& vi,
                           const std::vector<ViComponents>& theta_basis,
                           const SensOptions& opts = {});

struct PredictionSensitivity {
  Mat du_dx;     // full prediction Jacobian in the state
  Mat du_dtheta; // full prediction Jacobian in the agent's own theta
  double condition = 0.0;
  KktPoint point;
};

/// Implicit-function sensitivity of one agent's prediction:
/// d(p*)/d(delta) = -(dK/dp)^{-1} dK/d(delta), primal rows reported.
/// Throws RegularityError when the KKT Jacobian is singular or its
/// condition number exceeds opts.max_condition.
PredictionSensitivity prediction_sensitivity(const KktPoint& point, const AffineVI& vi,
                                             const std::vector<ViComponents>& theta_basis,
                                             const SensOptions& opts = {});

/// Jacobians of the realized joint action (stage-ordered, every agent's
/// own first stage) in the state and in the stacked theta; agent j's rows
/// depend only on theta block j, all cross blocks are exactly zero.
struct ActionJacobian {
  std::vector<PredictionSensitivity> agents;
  Mat du_bar_dx;
  Mat du_bar_dtheta;
  std::vector<Index> theta_offset; // cumulative, one entry per agent plus total
};

/// Differentiate the realized joint action at an arbitrary state from
/// already-computed predictions. No equilibrium requirement; used by the
/// equilibrium closure and by Newton polishing of candidate equilibria.
/// Per-agent regularity failures rethrow with the agent named. Agents are
/// independent; threads > 1 uses an OpenMP loop, threads <= 1 the serial
/// reference path.
ActionJacobian realized_action_jacobian(ControllerBank& bank, const Vec& x,
                                        const std::vector<VgneSolution>& sols,
                                        const SensOptions& opts = {}, int threads = 1);

struct SensitivityReport {
  ActionJacobian actions;
  Mat T;                          // (I - A)^{-1} [B_1 ... B_n]
  Mat dx_star;                    // equilibrium sensitivity in the stacked theta
  double closure_condition = 0.0; // cond(I - T du_bar_dx)
  double equilibrium_residual = 0.0;
};

/// Sensitivity of the closed-loop equilibrium to every agent's conjecture
/// weights: dx*/dtheta = (I - T du_bar/dx)^{-1} T du_bar/dtheta. Verifies
/// that x_star is an equilibrium to opts.equilibrium_tol (SolverError
/// otherwise), then differentiates each agent's prediction and closes the
/// loop.
SensitivityReport equilibrium_sensitivity(ControllerBank& bank, const Vec& x_star,
                                          const SensOptions& opts = {}, int threads = 1);

} // namespace mpg
