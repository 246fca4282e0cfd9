#pragma once

namespace mpg {

/// Thread budget for parallel regions. Resolution order: explicit request
/// (clamped to at least 1), else the MPG_LAB_THREADS environment variable,
/// else the OpenMP default. A budget of 1 selects the serial reference
/// implementations throughout the library.
int resolve_threads(int requested = 0);

/// True when the library was built with OpenMP and the budget allows more
/// than one thread.
bool parallel_available();

} // namespace mpg
