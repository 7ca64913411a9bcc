// Benchmark: serial reference vs OpenMP task runner on one synthetic
// workload, with a bitwise cross-check of their results.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "higrad/data.hpp"
#include "higrad/inference.hpp"
#include "higrad/models.hpp"
#include "higrad/sgd.hpp"
#include "higrad/tree.hpp"

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

bool bitwise_equal(const higrad::SegmentAverages& a,
                   const higrad::SegmentAverages& b) {
  if (a.segments.size() != b.segments.size()) return false;
  for (std::size_t s = 0; s < a.segments.size(); ++s) {
    const auto& sa = a.segments[s];
    const auto& sb = b.segments[s];
    if (sa.count != sb.count) return false;
    if (sa.average.size() != sb.average.size()) return false;
    if (std::memcmp(sa.average.data(), sb.average.data(),
                    sizeof(double) * sa.average.size()) != 0)
      return false;
    if (std::memcmp(sa.last_iterate.data(), sb.last_iterate.data(),
                    sizeof(double) * sa.last_iterate.size()) != 0)
      return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  long long n = 2'000'000;
  int d = 20;
  int repeats = 3;
  for (int i = 1; i + 1 < argc; i += 2) {
    if (std::string(argv[i]) == "--n") n = std::stoll(argv[i + 1]);
    if (std::string(argv[i]) == "--d") d = std::stoi(argv[i + 1]);
    if (std::string(argv[i]) == "--repeats") repeats = std::stoi(argv[i + 1]);
  }

  const higrad::TreeConfig config = higrad::preset_config("default", n);
  const higrad::SyntheticModel model{higrad::ModelKind::linear,
                                     higrad::make_theta_star(
                                         higrad::ThetaStarKind::dense, d)};
  const higrad::LinearGradient oracle(d);
  const higrad::StepSchedule schedule{0.1, 0.0, 0.55};

  higrad::RunOptions options;
  options.seed = 7;

  int max_threads = 1;
#ifdef _OPENMP
  max_threads = omp_get_max_threads();
#endif
  std::printf("budget N=%lld, d=%d, tree T=%lld, %d hardware threads\n", n, d,
              config.thread_count, max_threads);

  higrad::SegmentAverages serial_run;
  double serial_best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    higrad::SyntheticSource source(model, options.seed);
    options.threads = 1;
    const auto start = std::chrono::steady_clock::now();
    serial_run = higrad::run_higrad(config, oracle, source, schedule, options);
    serial_best = std::min(serial_best, seconds_since(start));
  }
  std::printf("  serial reference : %8.3f s  (%.2f Mupdates/s)\n", serial_best,
              static_cast<double>(n) / serial_best / 1e6);

  higrad::SegmentAverages parallel_run;
  double parallel_best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    higrad::SyntheticSource source(model, options.seed);
    options.threads = 0;  // all cores
    const auto start = std::chrono::steady_clock::now();
    parallel_run = higrad::run_higrad(config, oracle, source, schedule, options);
    parallel_best = std::min(parallel_best, seconds_since(start));
  }
  std::printf("  openmp tasks     : %8.3f s  (%.2f Mupdates/s, x%.2f)\n",
              parallel_best, static_cast<double>(n) / parallel_best / 1e6,
              serial_best / parallel_best);

  if (!bitwise_equal(serial_run, parallel_run)) {
    std::printf("MISMATCH: serial and parallel runs differ\n");
    return 1;
  }
  std::printf("  results identical: yes (bitwise)\n");
  return 0;
}
