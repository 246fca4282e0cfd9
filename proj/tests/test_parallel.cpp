#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>

#include "mpg_lab/parallel.hpp"
#include "mpg_lab/scenario.hpp"
#include "mpg_lab/sensitivity.hpp"
#include "mpg_lab/simulate.hpp"
#include "test_support.hpp"

using namespace mpg;

namespace {

const char* kSweepScenario = R"({
  "schema": "mpg-lab-scenario/1",
  "name": "parallel-check",
  "seed": 1,
  "dynamics": {
    "A": [[0.1, 0.03], [0.0, 0.05]],
    "B": [[[0.5], [0.2]], [[0.3], [0.5]]]
  },
  "horizon": 3,
  "constraints": {
    "input_lower": [-4.0, -4.0],
    "input_upper": [4.0, 4.0]
  },
  "true_costs": [
    {"Q": [[1.0, 0.0], [0.0, 0.5]], "q": [-1.0, -0.4], "R": [[1.0, 0.1], [0.1, 0.2]]},
    {"Q": [[0.5, 0.0], [0.0, 1.0]], "q": [-0.3, -0.8], "R": [[0.2, 0.05], [0.05, 1.0]]}
  ],
  "agents": [
    {
      "conjectures": [
        {"Q": [[1.0, 0.0], [0.0, 0.5]], "q": [-1.0, -0.4], "R": [[1.0, 0.1], [0.1, 0.2]]},
        {"Q": [[0.4, 0.0], [0.0, 0.9]], "q": [-0.2, -0.7], "R": [[0.2, 0.08], [0.08, 1.1]]}
      ]
    },
    {
      "conjectures": [
        {"mixture": [
          {"Q": [[1.0, 0.0], [0.0, 0.5]], "q": [-1.0, -0.4], "R": [[1.0, 0.1], [0.1, 0.2]]},
          {"Q": [[0.7, 0.0], [0.0, 0.9]], "q": [-0.2, -1.2], "R": [[1.3, 0.0], [0.0, 0.3]]}
        ]},
        {"Q": [[0.5, 0.0], [0.0, 1.0]], "q": [-0.3, -0.8], "R": [[0.2, 0.05], [0.05, 1.0]]}
      ],
      "theta": [0.4, 0.6]
    }
  ],
  "initial_states": [[0.5, 0.5]],
  "sweep": {"agent": 1},
  "solver": {"tol": 1e-10},
  "simulate": {"conv_tol": 1e-10, "max_steps": 3000}
})";

bool same_bits(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return false;
  for (Index i = 0; i < a.size(); ++i)
    if (a(i) != b(i)) return false;
  return true;
}

bool same_bits(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Index i = 0; i < a.size(); ++i)
    if (a.data()[i] != b.data()[i]) return false;
  return true;
}

} // namespace

TEST_CASE("thread budget resolution prefers the explicit request") {
  CHECK(resolve_threads(3) == 3);
  CHECK(resolve_threads(1) == 1);

  setenv("MPG_LAB_THREADS", "5", 1);
  CHECK(resolve_threads(0) == 5);
  CHECK(resolve_threads(2) == 2);
  CHECK(parallel_available());

  setenv("MPG_LAB_THREADS", "garbage", 1);
  CHECK(resolve_threads(0) >= 1);
  setenv("MPG_LAB_THREADS", "-3", 1);
  CHECK(resolve_threads(0) >= 1);
  unsetenv("MPG_LAB_THREADS");
  CHECK(resolve_threads(0) >= 1);
}

TEST_CASE("agent solves are bit-identical across thread budgets") {
  Scenario s = parse_scenario(kSweepScenario);
  ControllerBank serial = make_bank(s);
  ControllerBank parallel = make_bank(s);

  Vec x = s.initial_states[0];
  for (int step = 0; step < 5; ++step) {
    auto a = serial.solve_all(x, 1);
    auto b = parallel.solve_all(x, 4);
    REQUIRE(a.size() == b.size());
    for (size_t j = 0; j < a.size(); ++j) {
      CHECK(same_bits(a[j].u, b[j].u));
      CHECK(same_bits(a[j].nu, b[j].nu));
      CHECK(a[j].iterations == b[j].iterations);
      CHECK(a[j].residual == b[j].residual);
    }
    x = s.dyn.A * x + s.dyn.joint_B() * serial.realized_action(a);
  }
}

TEST_CASE("whole trajectories are bit-identical across thread budgets") {
  Scenario s = parse_scenario(kSweepScenario);
  ControllerBank serial = make_bank(s);
  ControllerBank parallel = make_bank(s);

  SimOptions opts = s.simulate;
  opts.threads = 1;
  TrajectoryLog a = simulate_run(serial, s.initial_states[0], opts);
  opts.threads = 4;
  TrajectoryLog b = simulate_run(parallel, s.initial_states[0], opts);

  CHECK(a.status == b.status);
  REQUIRE(a.steps.size() == b.steps.size());
  for (size_t t = 0; t < a.steps.size(); ++t) {
    CHECK(same_bits(a.steps[t].x, b.steps[t].x));
    CHECK(same_bits(a.steps[t].u_applied, b.steps[t].u_applied));
    CHECK(same_bits(a.steps[t].gaps, b.steps[t].gaps));
  }
  CHECK(same_bits(a.final_x, b.final_x));
  REQUIRE(a.equilibrium.has_value());
  REQUIRE(b.equilibrium.has_value());
  CHECK(same_bits(a.equilibrium->x_bar, b.equilibrium->x_bar));
}

TEST_CASE("action jacobians are bit-identical across thread budgets") {
  Scenario s = parse_scenario(kSweepScenario);
  ControllerBank bank1 = make_bank(s);
  ControllerBank bank2 = make_bank(s);
  Vec x = s.initial_states[0];

  auto sols1 = bank1.solve_all(x, 1);
  auto sols2 = bank2.solve_all(x, 4);
  ActionJacobian a = realized_action_jacobian(bank1, x, sols1, s.sensitivity, 1);
  ActionJacobian b = realized_action_jacobian(bank2, x, sols2, s.sensitivity, 4);

  CHECK(same_bits(a.du_bar_dx, b.du_bar_dx));
  CHECK(same_bits(a.du_bar_dtheta, b.du_bar_dtheta));
  REQUIRE(a.agents.size() == b.agents.size());
  for (size_t j = 0; j < a.agents.size(); ++j) {
    CHECK(same_bits(a.agents[j].du_dx, b.agents[j].du_dx));
    CHECK(same_bits(a.agents[j].du_dtheta, b.agents[j].du_dtheta));
    CHECK(a.agents[j].condition == b.agents[j].condition);
  }
}

TEST_CASE("sweeps are bit-identical across thread budgets") {
  Scenario s = parse_scenario(kSweepScenario);
  std::vector<double> grid = {0.0, 0.25, 0.5, 0.75, 1.0};

  SweepOptions serial;
  serial.threads = 1;
  SweepOptions parallel;
  parallel.threads = 3;
  SweepResult a = theta_sweep(s, grid, serial);
  SweepResult b = theta_sweep(s, grid, parallel);

  REQUIRE(a.points.size() == b.points.size());
  for (size_t i = 0; i < a.points.size(); ++i) {
    const SweepPoint& pa = a.points[i];
    const SweepPoint& pb = b.points[i];
    CHECK(pa.theta == pb.theta);
    CHECK(pa.converged == pb.converged);
    CHECK(pa.regular == pb.regular);
    CHECK(pa.steps == pb.steps);
    CHECK(pa.polish_iterations == pb.polish_iterations);
    CHECK(same_bits(pa.x_star, pb.x_star));
    CHECK(same_bits(pa.dx_dtheta, pb.dx_dtheta));
    CHECK(pa.note == pb.note);
    CHECK(pa.converged);
    CHECK(pa.regular);
  }
}
