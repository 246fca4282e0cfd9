#include "mpg_lab/io.hpp"
#include "mpg_lab/parallel.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <string>
#include <vector>

// Compares the serial reference loops against their OpenMP counterparts on
// the two parallel surfaces: per-agent equilibrium solves inside a step,
// and independent grid points of a theta sweep. Outputs are checked for
// exact agreement, since the parallel paths run identical arithmetic.

namespace {

using namespace mpg;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<Vec> probe_states(const Scenario& s, int count) {
  std::vector<Vec> states;
  const Index n_x = s.dyn.state_dim();
  for (int k = 0; k < count; ++k) {
    Vec x(n_x);
    for (Index c = 0; c < n_x; ++c)
      x(c) = std::sin(0.7 * (double)(k + 1) + 1.3 * (double)c) * 0.8;
    states.push_back(std::move(x));
  }
  return states;
}

} // namespace

int main(int argc, char** argv) {
  std::string path = argc > 1 ? argv[1] : "scenarios/example1.json";
  const int threads = resolve_threads(0);
  std::cout << "scenario: " << path << "\n";
  std::cout << "parallel build: " << (parallel_available() ? "yes" : "no")
            << ", thread budget: " << threads << "\n\n";

  Scenario s;
  try {
    s = load_scenario(path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }

  const int reps = 40;
  std::vector<Vec> states = probe_states(s, reps);

  // Surface 1: all agents' games at one state, serial loop vs OpenMP loop.
  ControllerBank serial_bank = make_bank(s, false);
  ControllerBank parallel_bank = make_bank(s, false);

  auto t0 = Clock::now();
  std::vector<std::vector<VgneSolution>> serial_out;
  for (const Vec& x : states) serial_out.push_back(serial_bank.solve_all(x, 1));
  double serial_ms = ms_since(t0);

  t0 = Clock::now();
  std::vector<std::vector<VgneSolution>> parallel_out;
  for (const Vec& x : states) parallel_out.push_back(parallel_bank.solve_all(x, threads));
  double parallel_ms = ms_since(t0);

  double worst = 0.0;
  for (size_t k = 0; k < serial_out.size(); ++k)
    for (size_t j = 0; j < serial_out[k].size(); ++j)
      worst = std::max(worst,
                       (serial_out[k][j].u - parallel_out[k][j].u).cwiseAbs().maxCoeff());

  std::cout << "per-step agent solves (" << reps << " states x " << s.dyn.num_agents()
            << " agents)\n";
  std::cout << "  serial:   " << serial_ms << " ms\n";
  std::cout << "  parallel: " << parallel_ms << " ms (" << threads << " threads)\n";
  std::cout << "  speedup:  " << (parallel_ms > 0 ? serial_ms / parallel_ms : 0.0) << "x\n";
  std::cout << "  max |serial - parallel|: " << worst
            << (worst == 0.0 ? " (bit-identical)" : "") << "\n\n";

  // Surface 2: sweep grid points, serial vs concurrent.
  if (s.sweep_agent >= 0) {
    std::vector<double> grid = parse_grid("0:0.1:1");
    SweepOptions so;
    so.threads = 1;
    t0 = Clock::now();
    SweepResult sw_serial = theta_sweep(s, grid, so);
    double sweep_serial_ms = ms_since(t0);

    so.threads = threads;
    t0 = Clock::now();
    SweepResult sw_parallel = theta_sweep(s, grid, so);
    double sweep_parallel_ms = ms_since(t0);

    double sweep_worst = 0.0;
    bool flags_match = true;
    for (size_t g = 0; g < grid.size(); ++g) {
      const SweepPoint& a = sw_serial.points[g];
      const SweepPoint& b = sw_parallel.points[g];
      flags_match = flags_match && a.converged == b.converged && a.regular == b.regular;
      if (a.x_star.size() > 0 && a.x_star.size() == b.x_star.size())
        sweep_worst = std::max(sweep_worst, (a.x_star - b.x_star).cwiseAbs().maxCoeff());
    }
    std::cout << "theta sweep (" << grid.size() << " grid points)\n";
    std::cout << "  serial:   " << sweep_serial_ms << " ms\n";
    std::cout << "  parallel: " << sweep_parallel_ms << " ms\n";
    std::cout << "  speedup:  "
              << (sweep_parallel_ms > 0 ? sweep_serial_ms / sweep_parallel_ms : 0.0) << "x\n";
    std::cout << "  flags identical: " << (flags_match ? "yes" : "NO") << ", max |dx*|: "
              << sweep_worst << (sweep_worst == 0.0 ? " (bit-identical)" : "") << "\n";
  } else {
    std::cout << "theta sweep: scenario designates no sweep agent, skipped\n";
  }
  return 0;
}
