#pragma once

namespace mocap {

/// Worker count for parallel sections: `requested` when positive, otherwise
/// MOCAPLAB_WORKERS when set, otherwise the OpenMP default.
int resolve_workers(int requested = 0);

/// Hardware threads available to OpenMP.
int max_workers();

}  // namespace mocap
