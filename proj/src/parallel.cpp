#include "cfuse/parallel.hpp"

#include <algorithm>

#include <omp.h>

namespace cfuse {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  return std::max(1, omp_get_num_procs());
}

}  // namespace cfuse
