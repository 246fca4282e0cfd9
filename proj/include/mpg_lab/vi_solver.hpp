#pragma once

#include "mpg_lab/game_model.hpp"

#include <vector>

namespace mpg {

struct SolverOptions {
  double tol = 1e-9;
  long max_iter = 200000;
  /// Also require a contraction-based distance bound of tol / rho before
  /// stopping; makes independent runs land within 2 tol / rho of each
  /// other regardless of start point.
  bool tighten_to_distance = true;
};

struct VgneSolution {
  Vec u;
  Vec nu; // inequality multipliers, one per polytope row
  Vec mu; // equality multipliers
  double residual = 0.0;       // natural residual ||u - P(u - F(u))||
  double distance_bound = 0.0; // certified upper bound on ||u - u*||
  long iterations = 0;
  std::vector<Index> active_set;
  bool licq_ok = true;         // active rows linearly independent
  double stationarity = 0.0;   // ||F + C_A' nu_A + H' mu|| after recovery
};

/// lambda_min of the symmetric part; the strong-monotonicity constant of
/// an affine map.
double monotonicity_constant(const Mat& M);

/// Projected forward-backward iteration for the affine VI at state x, with
/// the classical fixed step rho / L^2. Converges linearly for strongly
/// monotone M; throws SolverError when the budget runs out.
VgneSolution solve_vgne(const AffineVI& vi, const Vec& x, const SolverOptions& opts = {},
                        const Vec* warm_start = nullptr);

/// Least-squares KKT multipliers on the active rows at u, with negative
/// candidates dropped and re-solved. Sets licq to false when the active
/// rows are linearly dependent.
void recover_multipliers(const AffineVI& vi, const Vec& x, VgneSolution& sol);

} // namespace mpg
