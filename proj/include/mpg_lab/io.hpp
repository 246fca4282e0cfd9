#pragma once

#include "mpg_lab/certify.hpp"
#include "mpg_lab/scenario.hpp"
#include "mpg_lab/simulate.hpp"

#include <string>

namespace mpg {

/// Shortest decimal rendering that parses back to the identical double.
std::string format_double(double v);

/// Write through a sibling temp file and rename, so a reader never sees a
/// partially written file. Throws Error on filesystem failure.
void write_file_atomic(const std::string& path, const std::string& content);

/// Columns: t, x0..x{m_x-1}, u0..u{m-1} (realized joint action), then for
/// every agent j its predicted joint first stage pred{j}_u0..u{m-1}, then
/// gap0..gap{n-1}, then V. V is filled only when a certificate and an
/// equilibrium are available; gaps may be empty cells when not computed.
std::string trajectory_csv(const ControllerBank& bank, const TrajectoryLog& log,
                           const Mat* P = nullptr, const Vec* x_bar = nullptr);

/// Columns: t, gap0..gap{n-1}.
std::string gap_csv(const ControllerBank& bank, const TrajectoryLog& log);

/// Columns: theta, converged, regular, steps, polish_iterations,
/// x0..x{m_x-1}, dx0..dx{m_x-1}, note. Vector cells are blank when the
/// point did not converge (x) or failed regularity (dx).
std::string sweep_csv(const SweepResult& sweep, Index state_dim);

/// Minimal line chart of every equilibrium component against theta.
std::string sweep_svg(const SweepResult& sweep, Index state_dim, const std::string& title);

} // namespace mpg
