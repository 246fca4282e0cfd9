#pragma once

#include "mpg_lab/types.hpp"

#include <optional>

namespace mpg {

struct FeasibilityReport {
  bool feasible = false;
  double max_violation = 0.0; // positive means outside
  Index worst_row = -1;       // inequality row index, or p + j for equality j
};

struct CompactnessReport {
  bool compact = false;
  bool via_box = false; // bounds certified by explicit box rows, no LPs run
  Vec lower, upper;     // finite per-coordinate bounds when compact
  Index unbounded_coordinate = -1;
  int direction = 0; // +1: coordinate unbounded above, -1: below
  Vec recession;     // recession direction witnessing unboundedness
};

/// Convex polyhedron { u : C u <= d, H u = h }. When built from a box the
/// inequality rows are ordered [all lower bounds; all upper bounds; extra
/// rows], one row per coordinate, so multiplier vectors have a stable
/// layout. Construction runs a feasibility probe (a Chebyshev-center LP)
/// and rejects empty sets.
class Polytope {
public:
  static Polytope from_rows(Mat C, Vec d, Mat H = Mat(), Vec h = Vec());
  static Polytope box(Vec lower, Vec upper);
  static Polytope box_with_rows(Vec lower, Vec upper, Mat C_extra, Vec d_extra,
                                Mat H = Mat(), Vec h = Vec());

  Index dim() const { return dim_; }
  const Mat& C() const { return C_; }
  const Vec& d() const { return d_; }
  const Mat& H() const { return H_; }
  const Vec& h() const { return h_; }
  Index num_inequalities() const { return C_.rows(); }
  Index num_equalities() const { return H_.rows(); }

  bool has_box() const { return has_box_; }
  /// True when the set is exactly a box: projection is a coordinate clamp.
  bool pure_box() const { return has_box_ && C_.rows() == 2 * dim_ && H_.rows() == 0; }
  const Vec& box_lower() const { return lo_; }
  const Vec& box_upper() const { return hi_; }

  /// Feasible point found by the construction probe.
  const Vec& probe_point() const { return probe_; }

  /// Exact Euclidean projection onto the set. Boxes are clamped directly;
  /// general sets go through a dual gradient scheme finished by an
  /// active-set polish that solves the projection KKT system exactly.
  Vec project(const Vec& u) const;

  FeasibilityReport is_feasible(const Vec& u, double tol = 1e-9) const;

  CompactnessReport compactness_check() const;

private:
  Polytope() = default;
  void probe_or_throw();

  Index dim_ = 0;
  Mat C_;
  Vec d_;
  Mat H_;
  Vec h_;
  bool has_box_ = false;
  Vec lo_, hi_;
  Vec probe_;
};

} // namespace mpg
