// Serial reference against the OpenMP batch evaluator on one synthetic frame.
// Usage: bench_evaluate [particles] [batches]
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "mocaplab/parallel.hpp"
#include "mocaplab/pipeline.hpp"

int main(int argc, char** argv) {
  using namespace mocap;
  const int particles = argc > 1 ? std::atoi(argv[1]) : 960;
  const int batches = argc > 2 ? std::atoi(argv[2]) : 5;
  const SkeletonModel model = load_model(std::string(MOCAPLAB_DATA_DIR) + "/model.json");

  std::vector<int> workers{1, 2, 4};
  const int hw = max_workers();
  if (hw > 4) workers.push_back(hw);

  const BenchResult b = run_bench(particles, batches, workers, model);
  std::printf("hardware threads: %d\n", hw);
  std::printf("%-22s %10.3f ms/batch\n", "serial reference", b.serial_ms);
  for (const BenchRow& r : b.rows) {
    std::printf("parallel, %2d workers   %10.3f ms/batch  S=%.3f E=%.3f", r.workers, r.ms_per_batch, r.perf.speedup,
                r.perf.efficiency);
    if (r.perf.karp_flatt) std::printf(" e=%.4f", *r.perf.karp_flatt);
    std::printf("  (fused vs reference %.2fx)\n", b.serial_ms / r.ms_per_batch);
  }
  std::printf("scores identical: %s\n", b.identical ? "yes" : "no");
  return b.identical ? 0 : 1;
}
