#include "mpg_lab/assumptions.hpp"

#include "mpg_lab/linalg.hpp"

#include <sstream>

namespace mpg {

bool AssumptionReport::pass() const {
  return open_loop_stable && set_ok && costs_convex && all_monotone && all_rho_exceed_one;
}

std::vector<std::string> AssumptionReport::failures() const {
  std::vector<std::string> out;
  std::ostringstream ss;
  if (!open_loop_stable) {
    ss.str("");
    ss << "clause (i): open loop is not a contraction, spectral radius of A is "
       << spectral_radius_A;
    out.push_back(ss.str());
  }
  if (!set_ok) {
    ss.str("");
    ss << "clause (ii): constraint set is not certified compact";
    if (!compactness.compact) {
      ss << " (coordinate " << compactness.unbounded_coordinate << " unbounded "
         << (compactness.direction > 0 ? "above" : "below") << ")";
    }
    out.push_back(ss.str());
  }
  for (const auto& e : convexity) {
    if (e.ok) continue;
    ss.str("");
    ss << "clause (iii): agent " << e.agent + 1 << " conjectured cost for player "
       << e.player + 1 << " is not convex (min eig Q = " << e.q_min_eig
       << ", min eig own R block = " << e.own_r_min_eig << ")";
    out.push_back(ss.str());
  }
  for (size_t j = 0; j < rho.size(); ++j) {
    if (rho[j] <= 0.0) {
      ss.str("");
      ss << "clause (iv): agent " << j + 1
         << " pseudo-gradient is not strongly monotone (constant " << rho[j] << ")";
      out.push_back(ss.str());
    } else if (rho[j] <= 1.0) {
      ss.str("");
      ss << "clause (iv): agent " << j + 1 << " monotonicity constant " << rho[j]
         << " does not exceed one";
      out.push_back(ss.str());
    }
  }
  return out;
}

AssumptionReport validate_assumptions(const Dynamics& dyn,
                                      const std::vector<ConjectureSet>& conjectures,
                                      const Polytope& feasible) {
  if ((int)conjectures.size() != dyn.num_agents())
    throw SchemaError("assumptions: one conjecture set per agent is required");

  AssumptionReport rep;
  rep.spectral_radius_A = spectral_radius(dyn.A);
  rep.open_loop_stable = rep.spectral_radius_A < 1.0;

  rep.compactness = feasible.compactness_check();
  rep.set_ok = rep.compactness.compact;

  SignalLayout L = SignalLayout::create(dyn, conjectures.front().horizon);
  rep.costs_convex = true;
  for (int j = 0; j < dyn.num_agents(); ++j) {
    const ConjectureSet& conj = conjectures[(size_t)j];
    for (int i = 0; i < dyn.num_agents(); ++i) {
      StageCost g = conj.effective_cost(i);
      AssumptionReport::ConvexityEntry e;
      e.agent = j;
      e.player = i;
      e.q_min_eig = lambda_min_sym(g.Q);
      Mat own = g.R.block(L.stage_offset[(size_t)i], L.stage_offset[(size_t)i],
                          L.m[(size_t)i], L.m[(size_t)i]);
      e.own_r_min_eig = lambda_min_sym(own);
      e.ok = e.q_min_eig >= -1e-12 && e.own_r_min_eig > 0.0;
      rep.costs_convex = rep.costs_convex && e.ok;
      rep.convexity.push_back(e);
    }
  }

  rep.all_monotone = true;
  rep.all_rho_exceed_one = true;
  for (int j = 0; j < dyn.num_agents(); ++j) {
    AffineVI vi = assemble_affine_vi(conjectures[(size_t)j], dyn, nullptr,
                                     /*require_monotone=*/false);
    rep.rho.push_back(vi.rho);
    rep.all_monotone = rep.all_monotone && vi.rho > 0.0;
    rep.all_rho_exceed_one = rep.all_rho_exceed_one && vi.rho > 1.0;
  }
  return rep;
}

} // namespace mpg
