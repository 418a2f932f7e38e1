#include <atomic>
#include <thread>

#include "se_internal.hpp"

namespace gridest::se {

EstimationResult estimate_parallel(const model::FeederModel& model,
                                   const pmu::ZonePartition& partition,
                                   const MeasurementSet& measurements,
                                   const EstimationOptions& options, int workers) {
  if (workers <= 0) {
    unsigned hw = std::thread::hardware_concurrency();
    workers = hw ? static_cast<int>(hw) : 1;
  }

  detail::TaskRunner runner = [workers](int count, const std::function<void(int)>& fn) {
    const int n_threads = std::min(workers, count);
    if (n_threads <= 1) {
      for (int i = 0; i < count; ++i) fn(i);
      return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back([&]() {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
      });
    for (auto& th : pool) th.join();
  };

  return detail::solve_zones(model, partition, measurements, options, runner);
}

}  // namespace gridest::se
