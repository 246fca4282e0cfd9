#pragma once

#include "mpg_lab/vi_solver.hpp"

#include <optional>
#include <vector>

namespace mpg {

/// Selector for agent j's first-stage block inside its stacked solution.
struct SelectionMatrix {
  int agent = 0;
  Index offset = 0;
  Index width = 0;

  Vec apply(const Vec& stacked) const { return stacked.segment(offset, width); }
  Mat dense(Index full_dim) const;
};

SelectionMatrix selection_for(const SignalLayout& layout, int agent);

/// The heterogeneous controller collection: one conjectured game per
/// agent, each solved to equilibrium at every state. Holds per-agent warm
/// starts (previous solution shifted one stage); caches are only updated
/// after all agents of a step have solved, so results never depend on the
/// order in which parallel solves finish.
class ControllerBank {
public:
  ControllerBank(Dynamics dyn, std::vector<ConjectureAssembly> assemblies,
                 SolverOptions opts = {}, bool warm_start = true);

  int num_agents() const { return (int)assemblies_.size(); }
  const Dynamics& dynamics() const { return dyn_; }
  const AffineVI& vi(int j) const { return assemblies_[(size_t)j].vi; }
  const ConjectureAssembly& assembly(int j) const { return assemblies_[(size_t)j]; }
  const SolverOptions& options() const { return opts_; }
  SelectionMatrix selection(int j) const;

  /// Solve every agent's conjectured game at state x. threads <= 1 runs
  /// the serial reference loop; larger budgets split agents across OpenMP
  /// threads with identical results.
  std::vector<VgneSolution> solve_all(const Vec& x, int threads = 1);

  /// Single-agent solve; updates only that agent's warm start.
  VgneSolution solve_agent(int j, const Vec& x);

  /// First-stage own action of every agent stacked into the joint
  /// per-stage input.
  Vec realized_action(const std::vector<VgneSolution>& solutions) const;

  void reset_warm_starts();

private:
  Dynamics dyn_;
  std::vector<ConjectureAssembly> assemblies_;
  SolverOptions opts_;
  bool warm_enabled_ = true;
  std::vector<std::optional<Vec>> warm_;
};

} // namespace mpg
