#pragma once

#include "mpg_lab/types.hpp"

namespace mpg {

/// Outcome of min c'x subject to C x <= d, H x = h over free x.
struct LpResult {
  enum class Status { Optimal, Infeasible, Unbounded };
  Status status = Status::Infeasible;
  Vec x;        // minimizer when Optimal; basic feasible point when Unbounded
  double value = 0.0;
  Vec ray;      // recession direction with c'ray < 0 when Unbounded, unit norm
};

/// Dense two-phase primal simplex with Bland's rule. Free variables are
/// split into positive and negative parts. Intended for the small
/// polytopes that arise here (tens of rows), not for large problems.
LpResult solve_lp(const Vec& c, const Mat& C, const Vec& d, const Mat& H, const Vec& h);

} // namespace mpg
