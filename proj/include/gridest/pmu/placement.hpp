#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "gridest/model/feeder.hpp"

namespace gridest::pmu {

constexpr int kUnlimitedChannels = -1;

struct PmuDevice {
  int bus = 0;
  int channels = kUnlimitedChannels;  // max measured incident branches
};

struct Placement {
  std::vector<PmuDevice> devices;  // distinct buses, ascending

  bool has_bus(int bus) const {
    for (const auto& d : devices)
      if (d.bus == bus) return true;
    return false;
  }
};

// Channel assignment and the resulting observable closure. A PMU sees its own
// bus voltage plus the series currents of up to `channels` incident branches;
// a measured branch with one observable end makes the other end observable.
struct Observability {
  std::set<int> observable;                  // canonical bus ids
  std::map<int, std::vector<int>> measured;  // pmu bus -> segment indices, ascending
};

Observability assign_channels(const model::FeederModel& model, const Placement& placement);

std::set<int> observable_set(const model::FeederModel& model, const Placement& placement);

// Closure for a fixed channel assignment (pmu bus -> incident segment indices).
std::set<int> observable_from(const model::FeederModel& model,
                              const std::map<int, std::vector<int>>& measured_by_pmu);

bool fully_observable(const model::FeederModel& model, const Placement& placement);

// Exhaustive minimum-cardinality search, all optima in lexicographic order.
// Guarded to at most 20 buses.
std::vector<Placement> brute_force_placement(const model::FeederModel& model, int channels_per_pmu);

// Adds the largest-coverage-gain PMU (ties to the lowest bus id) until the
// network is fully observable; with a zone-size bound, keeps adding PMUs until
// the nearest-root partition's largest zone fits the bound.
Placement greedy_placement(const model::FeederModel& model, int channels_per_pmu,
                           std::optional<int> max_zone_size = std::nullopt,
                           const Placement& warm_start = {});

struct ZonePartition {
  struct Zone {
    int root = 0;                  // PMU bus
    std::vector<int> members;      // canonical ids, ascending, includes root
  };
  struct Boundary {
    int segment = -1;              // index into model.segments()
    int owner_pmu = -1;            // PMU bus measuring the branch
  };
  std::vector<Zone> zones;         // ascending by root
  std::vector<Boundary> boundaries;
  std::map<int, std::vector<int>> measured;  // final channel assignment
};

// Nearest-PMU-root zones (ties to the lowest root id). Every cut branch must
// end up current-measured by the PMU at one of its endpoints; spare channels
// are assigned, non-critical channels swapped, and as a last resort the cut is
// walked toward the farther root until it reaches a measurable branch.
ZonePartition partition_zones(const model::FeederModel& model, const Placement& placement);

}  // namespace gridest::pmu
