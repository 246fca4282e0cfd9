#include "mpg_lab/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mpg {

namespace {

int env_threads() {
  const char* s = std::getenv("MPG_LAB_THREADS");
  if (!s) return 0;
  try {
    int v = std::stoi(s);
    return v > 0 ? v : 0;
  } catch (...) {
    return 0;
  }
}

} // namespace

int resolve_threads(int requested) {
  int n = requested > 0 ? requested : env_threads();
#ifdef _OPENMP
  if (n <= 0) n = omp_get_max_threads();
  return n < 1 ? 1 : n;
#else
  (void)n;
  return 1;
#endif
}

bool parallel_available() {
#ifdef _OPENMP
  return resolve_threads() > 1;
#else
  return false;
#endif
}

} // namespace mpg
