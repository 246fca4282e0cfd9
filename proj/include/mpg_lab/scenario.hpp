#pragma once

#include "mpg_lab/assumptions.hpp"
#include "mpg_lab/certify.hpp"
#include "mpg_lab/sensitivity.hpp"
#include "mpg_lab/simulate.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mpg {

/// A complete experiment description loaded from a versioned JSON file:
/// dynamics, per-stage constraints, the ground-truth cost table, every
/// agent's conjectured game, initial states, and tolerance overrides.
/// Numeric values may be given as JSON numbers or as decimal strings;
/// serialization renders shortest round-trip decimals, so load/serialize
/// round-trips bit-exactly.
struct Scenario {
  std::string name;
  std::string notes;
  long seed = 0;

  Dynamics dyn;
  int horizon = 2;

  // Per-stage joint-input constraints. Box bounds are optional at the
  // schema level; their absence generally fails the compactness check.
  std::optional<Vec> input_lower;
  std::optional<Vec> input_upper;
  Mat C_extra; // zero rows when absent
  Vec d_extra;
  Mat H_stage;
  Vec h_stage;

  std::vector<StageCost> true_costs;
  std::vector<ConjectureSet> conjectures;
  std::vector<Vec> initial_states;

  int sweep_agent = -1; // agent whose 2-component theta a sweep drives

  SolverOptions solver;
  CertifyOptions certify;
  SensOptions sensitivity;
  SimOptions simulate;
};

/// Parse and validate a scenario document. Validation failures throw
/// SchemaError naming the offending field path.
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::string& path);
std::string serialize_scenario(const Scenario& s);

/// The per-stage constraints stacked over the horizon in the agent-major
/// signal layout. Pure boxes stay boxes (projection is a clamp); extra
/// rows and equalities are replicated per stage.
std::shared_ptr<const Polytope> stacked_polytope(const Scenario& s);

/// Assumption report for the scenario's dynamics, conjectures, and
/// stacked constraint set.
AssumptionReport scenario_assumptions(const Scenario& s);

/// Assemble every agent's conjectured game and wrap them in a controller
/// bank using the scenario's solver options.
ControllerBank make_bank(const Scenario& s, bool warm_start = true);

/// Copy of the scenario with the sweep agent's weights set to (s, 1 - s).
/// Requires sweep_agent to name an agent with a 2-component theta.
Scenario with_sweep_value(const Scenario& scen, double s);

struct SweepOptions {
  bool polish = true;      // Newton-polish the simulated equilibrium
  int max_polish = 25;
  double polish_tol = 0.0; // 0 derives 0.1 * sensitivity.equilibrium_tol
  int threads = 1;         // across grid points; each point is sequential
};

struct SweepPoint {
  double theta = 0.0;
  bool converged = false;
  bool regular = false;
  Vec x_star;     // empty until converged
  Vec dx_dtheta;  // d x* / d theta along (1, -1); empty unless regular
  long steps = -1;
  int polish_iterations = 0;
  std::string note; // failure reason or polish log
};

struct SweepResult {
  std::vector<SweepPoint> points; // ordered by grid position
};

/// Closed-loop equilibrium manifold over a theta grid: simulate to
/// convergence from the scenario's first initial state, optionally
/// Newton-polish the fixed point, then attach the equilibrium sensitivity
/// where the regularity checks pass. Non-convergent or irregular points
/// are recorded and the sweep continues. Grid points are independent;
/// threads > 1 runs them in an OpenMP loop, threads <= 1 serially.
SweepResult theta_sweep(const Scenario& scen, const std::vector<double>& grid,
                        const SweepOptions& opts = {});

/// Parse "a:step:b" into an inclusive grid (tolerant of the float
/// endpoint); throws SchemaError on malformed input.
std::vector<double> parse_grid(const std::string& text);

} // namespace mpg
