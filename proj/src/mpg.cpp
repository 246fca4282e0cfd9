#include "mpg_lab/mpg.hpp"

#include <exception>
#include <string>

namespace mpg {

Mat SelectionMatrix::dense(Index full_dim) const {
  Mat S = Mat::Zero(width, full_dim);
  for (Index k = 0; k < width; ++k) S(k, offset + k) = 1.0;
  return S;
}

SelectionMatrix selection_for(const SignalLayout& layout, int agent) {
  SelectionMatrix s;
  s.agent = agent;
  s.offset = layout.agent_start(agent);
  s.width = layout.m[(size_t)agent];
  return s;
}

ControllerBank::ControllerBank(Dynamics dyn, std::vector<ConjectureAssembly> assemblies,
                               SolverOptions opts, bool warm_start)
    : dyn_(std::move(dyn)), assemblies_(std::move(assemblies)), opts_(opts),
      warm_enabled_(warm_start) {
  if (assemblies_.empty()) throw SchemaError("controller bank: no agents");
  if ((int)assemblies_.size() != dyn_.num_agents())
    throw SchemaError("controller bank: one conjectured game per agent is required");
  for (int j = 0; j < num_agents(); ++j) {
    if (!assemblies_[(size_t)j].vi.feasible)
      throw SchemaError("controller bank: agent game lacks a feasible set");
    if (assemblies_[(size_t)j].vi.layout.total_m != dyn_.total_input_dim())
      throw SchemaError("controller bank: game layout disagrees with the dynamics");
    if (assemblies_[(size_t)j].vi.layout.horizon != assemblies_[0].vi.layout.horizon)
      throw SchemaError("controller bank: agents disagree on the horizon");
  }
  warm_.resize(assemblies_.size());
}

SelectionMatrix ControllerBank::selection(int j) const {
  return selection_for(assemblies_[(size_t)j].vi.layout, j);
}

std::vector<VgneSolution> ControllerBank::solve_all(const Vec& x, int threads) {
  const int n = num_agents();
  std::vector<VgneSolution> out((size_t)n);
  std::vector<std::exception_ptr> errs((size_t)n);

  if (threads > 1) {
#pragma omp parallel for num_threads(threads) schedule(static)
    for (int j = 0; j < n; ++j) {
      try {
        const Vec* warm = warm_[(size_t)j] ? &*warm_[(size_t)j] : nullptr;
        out[(size_t)j] = solve_vgne(assemblies_[(size_t)j].vi, x, opts_, warm);
      } catch (...) {
        errs[(size_t)j] = std::current_exception();
      }
    }
  } else {
    for (int j = 0; j < n; ++j) {
      try {
        const Vec* warm = warm_[(size_t)j] ? &*warm_[(size_t)j] : nullptr;
        out[(size_t)j] = solve_vgne(assemblies_[(size_t)j].vi, x, opts_, warm);
      } catch (...) {
        errs[(size_t)j] = std::current_exception();
      }
    }
  }
  for (int j = 0; j < n; ++j)
    if (errs[(size_t)j])
      rethrow_with_context(errs[(size_t)j], "agent " + std::to_string(j) + ": ");

  // Warm starts advance only after the whole step solved.
  if (warm_enabled_)
    for (int j = 0; j < n; ++j)
      warm_[(size_t)j] = assemblies_[(size_t)j].vi.layout.shift_stages(out[(size_t)j].u);
  return out;
}

VgneSolution ControllerBank::solve_agent(int j, const Vec& x) {
  const Vec* warm = warm_[(size_t)j] ? &*warm_[(size_t)j] : nullptr;
  VgneSolution sol = solve_vgne(assemblies_[(size_t)j].vi, x, opts_, warm);
  if (warm_enabled_) warm_[(size_t)j] = assemblies_[(size_t)j].vi.layout.shift_stages(sol.u);
  return sol;
}

Vec ControllerBank::realized_action(const std::vector<VgneSolution>& solutions) const {
  if ((int)solutions.size() != num_agents())
    throw SchemaError("controller bank: one solution per agent is required");
  Vec u = Vec::Zero(dyn_.total_input_dim());
  Index off = 0;
  for (int j = 0; j < num_agents(); ++j) {
    SelectionMatrix s = selection(j);
    u.segment(off, s.width) = s.apply(solutions[(size_t)j].u);
    off += s.width;
  }
  return u;
}

void ControllerBank::reset_warm_starts() {
  for (auto& w : warm_) w.reset();
}

} // namespace mpg
