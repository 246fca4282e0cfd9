#pragma once

#include "mpg_lab/game_model.hpp"

#include <string>
#include <vector>

namespace mpg {

/// Standing-assumption audit for a full heterogeneous controller setup.
/// Clause (i): open-loop stability of A. Clause (ii): nonempty compact
/// constraint set. Clause (iii): convexity of every conjectured cost
/// (positive semidefinite Q, positive definite own R block). Clause (iv):
/// strong monotonicity of every agent's pseudo-gradient with constant
/// above one.
struct AssumptionReport {
  double spectral_radius_A = 0.0;
  bool open_loop_stable = false;

  CompactnessReport compactness;
  bool set_ok = false;

  struct ConvexityEntry {
    int agent = 0;
    int player = 0;
    double q_min_eig = 0.0;
    double own_r_min_eig = 0.0;
    bool ok = false;
  };
  std::vector<ConvexityEntry> convexity;
  bool costs_convex = false;

  std::vector<double> rho;
  bool all_monotone = false;      // rho_j > 0 for every agent
  bool all_rho_exceed_one = false; // rho_j > 1 for every agent

  bool pass() const;
  std::vector<std::string> failures() const;
};

AssumptionReport validate_assumptions(const Dynamics& dyn,
                                      const std::vector<ConjectureSet>& conjectures,
                                      const Polytope& feasible);

} // namespace mpg
