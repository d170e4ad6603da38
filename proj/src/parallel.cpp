#include "mocaplab/parallel.hpp"

#include <cstdlib>
#include <string>

#include <omp.h>

namespace mocap {

int max_workers() { return omp_get_num_procs(); }

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MOCAPLAB_WORKERS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return omp_get_max_threads();
}

}  // namespace mocap
