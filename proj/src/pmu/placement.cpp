#include "gridest/pmu/placement.hpp"

#include <algorithm>
#include <functional>
#include <queue>

namespace gridest::pmu {

using model::FeederModel;

namespace {

struct Graph {
  const FeederModel* m = nullptr;
  FeederModel storage;  // holds the merged copy when the input was unmerged
  std::vector<int> buses;

  const FeederModel& model() const { return *m; }

  void init(const FeederModel& in) {
    if (in.merged()) {
      m = &in;
    } else {
      storage = model::merge_switches(in);
      m = &storage;
    }
    buses = m->merged_buses();
  }

  std::pair<int, int> ends(int seg) const {
    const auto& s = m->segments()[seg];
    return {m->canonical(s.from_bus), m->canonical(s.to_bus)};
  }

  int other_end(int seg, int bus) const {
    auto [a, b] = ends(seg);
    return a == bus ? b : a;
  }
};

Placement canonicalize(const Graph& g, const Placement& placement) {
  Placement out;
  for (const auto& d : placement.devices) {
    int c = g.model().canonical(d.bus);
    if (std::find(g.buses.begin(), g.buses.end(), c) == g.buses.end())
      throw Error(Errc::unknown_bus, "PMU names unknown bus " + std::to_string(d.bus));
    if (!out.has_bus(c)) out.devices.push_back({c, d.channels});
  }
  std::sort(out.devices.begin(), out.devices.end(),
            [](const PmuDevice& a, const PmuDevice& b) { return a.bus < b.bus; });
  return out;
}

std::set<int> closure(const Graph& g, const std::vector<int>& pmu_buses,
                      const std::map<int, std::vector<int>>& measured) {
  std::set<int> obs(pmu_buses.begin(), pmu_buses.end());
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& [bus, segs] : measured) {
      for (int s : segs) {
        auto [a, b] = g.ends(s);
        if (obs.count(a) && !obs.count(b)) {
          obs.insert(b);
          grew = true;
        } else if (obs.count(b) && !obs.count(a)) {
          obs.insert(a);
          grew = true;
        }
      }
    }
  }
  return obs;
}

// Enumerates k-subsets of `items` in lexicographic order.
void for_each_subset(const std::vector<int>& items, int k,
                     const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> pick(k);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == k) {
      fn(pick);
      return;
    }
    for (int i = start; i <= static_cast<int>(items.size()) - (k - depth); ++i) {
      pick[depth] = items[i];
      rec(i + 1, depth + 1);
    }
  };
  if (k >= 0) rec(0, 0);
}

Observability assign_channels_impl(const Graph& g, const Placement& placement) {
  Observability out;
  std::vector<int> pmu_buses;
  for (const auto& d : placement.devices) pmu_buses.push_back(d.bus);

  for (const auto& d : placement.devices) {
    // Incident branches sorted by far endpoint id for a stable tie-break.
    std::vector<int> incident = g.model().incident_segments(d.bus);
    std::sort(incident.begin(), incident.end(), [&](int a, int b) {
      int oa = g.other_end(a, d.bus), ob = g.other_end(b, d.bus);
      return oa != ob ? oa < ob : a < b;
    });
    const int deg = static_cast<int>(incident.size());
    const int k = d.channels == kUnlimitedChannels ? deg : std::min(d.channels, deg);

    if (k >= deg) {
      out.measured[d.bus] = incident;
      continue;
    }
    std::vector<int> best;
    std::size_t best_cover = 0;
    for_each_subset(incident, k, [&](const std::vector<int>& cand) {
      auto trial = out.measured;
      trial[d.bus] = cand;
      std::size_t cover = closure(g, pmu_buses, trial).size();
      if (cover > best_cover) {
        best_cover = cover;
        best = cand;
      }
    });
    out.measured[d.bus] = best;
  }
  out.observable = closure(g, pmu_buses, out.measured);
  return out;
}

std::map<int, int> nearest_root_assignment(const Graph& g, const std::vector<int>& roots) {
  // Hop distances from every root; assignment prefers the smaller distance,
  // then the lower root id.
  std::map<int, int> best_dist, assigned;
  for (int r : roots) {
    std::map<int, int> dist;
    dist[r] = 0;
    std::queue<int> q;
    q.push(r);
    while (!q.empty()) {
      int n = q.front();
      q.pop();
      for (int s : g.model().incident_segments(n)) {
        int o = g.other_end(s, n);
        if (dist.count(o)) continue;
        dist[o] = dist[n] + 1;
        q.push(o);
      }
    }
    for (const auto& [bus, dd] : dist) {
      auto it = best_dist.find(bus);
      if (it == best_dist.end() || dd < it->second || (dd == it->second && r < assigned[bus])) {
        best_dist[bus] = dd;
        assigned[bus] = r;
      }
    }
  }
  return assigned;
}

}  // namespace

Observability assign_channels(const FeederModel& model, const Placement& placement) {
  Graph g;
  g.init(model);
  return assign_channels_impl(g, canonicalize(g, placement));
}

std::set<int> observable_set(const FeederModel& model, const Placement& placement) {
  return assign_channels(model, placement).observable;
}

std::set<int> observable_from(const FeederModel& model,
                              const std::map<int, std::vector<int>>& measured_by_pmu) {
  Graph g;
  g.init(model);
  std::vector<int> pmu_buses;
  for (const auto& [bus, segs] : measured_by_pmu) pmu_buses.push_back(bus);
  return closure(g, pmu_buses, measured_by_pmu);
}

bool fully_observable(const FeederModel& model, const Placement& placement) {
  Graph g;
  g.init(model);
  auto obs = assign_channels_impl(g, canonicalize(g, placement)).observable;
  return obs.size() == g.buses.size();
}

std::vector<Placement> brute_force_placement(const FeederModel& model, int channels_per_pmu) {
  Graph g;
  g.init(model);
  const int n = static_cast<int>(g.buses.size());
  if (n > 20)
    throw Error(Errc::too_large_for_oracle,
                "exhaustive placement is guarded to 20 buses, got " + std::to_string(n));

  std::vector<Placement> minima;
  for (int size = 1; size <= n && minima.empty(); ++size) {
    for_each_subset(g.buses, size, [&](const std::vector<int>& buses) {
      Placement p;
      for (int b : buses) p.devices.push_back({b, channels_per_pmu});
      if (assign_channels_impl(g, p).observable.size() == g.buses.size()) minima.push_back(p);
    });
  }
  return minima;  // subset enumeration is already lexicographic
}

Placement greedy_placement(const FeederModel& model, int channels_per_pmu,
                           std::optional<int> max_zone_size, const Placement& warm_start) {
  Graph g;
  g.init(model);
  if (max_zone_size && *max_zone_size < 1)
    throw Error(Errc::infeasible_zone_bound, "zone-size bound must be at least 1");

  Placement p = canonicalize(g, warm_start);
  std::size_t covered = p.devices.empty() ? 0 : assign_channels_impl(g, p).observable.size();

  while (covered < g.buses.size()) {
    int best_bus = -1;
    std::size_t best_cover = covered;
    for (int b : g.buses) {
      if (p.has_bus(b)) continue;
      Placement trial = p;
      trial.devices.push_back({b, channels_per_pmu});
      std::sort(trial.devices.begin(), trial.devices.end(),
                [](const PmuDevice& x, const PmuDevice& y) { return x.bus < y.bus; });
      std::size_t cover = assign_channels_impl(g, trial).observable.size();
      if (cover > best_cover) {
        best_cover = cover;
        best_bus = b;
      }
    }
    p.devices.push_back({best_bus, channels_per_pmu});
    std::sort(p.devices.begin(), p.devices.end(),
              [](const PmuDevice& x, const PmuDevice& y) { return x.bus < y.bus; });
    covered = best_cover;
  }

  if (max_zone_size) {
    while (true) {
      auto partition = partition_zones(g.model(), p);
      std::map<int, std::vector<int>> members;
      for (const auto& z : partition.zones) members[z.root] = z.members;

      int worst_root = -1;
      std::size_t worst = 0;
      for (const auto& [root, m] : members)
        if (m.size() > worst) {
          worst = m.size();
          worst_root = root;
        }
      if (static_cast<int>(worst) <= *max_zone_size) break;

      // Split the largest zone at its farthest member (ties to the lowest id).
      std::map<int, int> dist;
      dist[worst_root] = 0;
      std::queue<int> q;
      q.push(worst_root);
      while (!q.empty()) {
        int n = q.front();
        q.pop();
        for (int s : g.model().incident_segments(n)) {
          int o = g.other_end(s, n);
          if (dist.count(o)) continue;
          dist[o] = dist[n] + 1;
          q.push(o);
        }
      }
      int pick = -1, pick_dist = -1;
      for (int b : members[worst_root]) {
        if (p.has_bus(b)) continue;
        if (dist[b] > pick_dist || (dist[b] == pick_dist && b < pick)) {
          pick_dist = dist[b];
          pick = b;
        }
      }
      if (pick < 0)
        throw Error(Errc::infeasible_zone_bound,
                    "cannot split zone rooted at " + std::to_string(worst_root));
      p.devices.push_back({pick, channels_per_pmu});
      std::sort(p.devices.begin(), p.devices.end(),
                [](const PmuDevice& x, const PmuDevice& y) { return x.bus < y.bus; });
    }
  }
  return p;
}

ZonePartition partition_zones(const FeederModel& model, const Placement& placement_in) {
  Graph g;
  g.init(model);
  Placement placement = canonicalize(g, placement_in);
  auto obs = assign_channels_impl(g, placement);
  if (obs.observable.size() != g.buses.size())
    throw Error(Errc::unobservable_input, "placement does not observe every bus");

  std::vector<int> roots;
  std::map<int, int> channel_limit;
  for (const auto& d : placement.devices) {
    roots.push_back(d.bus);
    channel_limit[d.bus] = d.channels;
  }
  auto assigned = nearest_root_assignment(g, roots);
  auto measured = obs.measured;
  std::vector<int> pmu_buses = roots;

  auto is_measured_by = [&](int pmu, int seg) {
    auto it = measured.find(pmu);
    return it != measured.end() &&
           std::find(it->second.begin(), it->second.end(), seg) != it->second.end();
  };

  auto boundary_segments = [&]() {
    std::vector<int> out;
    for (std::size_t i = 0; i < g.model().segments().size(); ++i) {
      auto [a, b] = g.ends(static_cast<int>(i));
      if (a != b && assigned.at(a) != assigned.at(b)) out.push_back(static_cast<int>(i));
    }
    std::sort(out.begin(), out.end(), [&](int x, int y) {
      auto ex = g.ends(x), ey = g.ends(y);
      auto kx = std::minmax(ex.first, ex.second), ky = std::minmax(ey.first, ey.second);
      return kx != ky ? kx < ky : x < y;
    });
    return out;
  };

  // Tries to make the PMU at `bus` measure `seg`: already measured, spare
  // channel, or a swap that keeps the whole network observable.
  auto try_cover = [&](int bus, int seg) -> bool {
    if (!channel_limit.count(bus)) return false;
    if (is_measured_by(bus, seg)) return true;
    auto& mine = measured[bus];
    int limit = channel_limit[bus];
    int deg = static_cast<int>(g.model().incident_segments(bus).size());
    int cap = limit == kUnlimitedChannels ? deg : std::min(limit, deg);
    if (static_cast<int>(mine.size()) < cap) {
      mine.push_back(seg);
      std::sort(mine.begin(), mine.end());
      return true;
    }
    for (std::size_t i = 0; i < mine.size(); ++i) {
      int victim = mine[i];
      auto [a, b] = g.ends(victim);
      if (assigned.at(a) != assigned.at(b)) continue;  // never drop a cut branch
      auto trial = measured;
      auto& tm = trial[bus];
      tm.erase(std::find(tm.begin(), tm.end(), victim));
      tm.push_back(seg);
      if (closure(g, pmu_buses, trial).size() == g.buses.size()) {
        mine = tm;
        std::sort(mine.begin(), mine.end());
        return true;
      }
    }
    return false;
  };

  // First try the nearest-root partition as is: every cut branch must gain an
  // owning PMU through direct measurement, a spare channel, or a swap.
  std::map<int, int> owners;  // segment -> pmu bus
  bool voronoi_ok = true;
  {
    auto assigned_backup = assigned;
    auto measured_backup = measured;
    for (int seg : boundary_segments()) {
      auto [u, v] = g.ends(seg);
      if (u > v) std::swap(u, v);
      if (try_cover(u, seg))
        owners[seg] = u;
      else if (try_cover(v, seg))
        owners[seg] = v;
      else {
        voronoi_ok = false;
        break;
      }
    }
    if (!voronoi_ok) {
      assigned = assigned_backup;
      measured = measured_backup;
      owners.clear();
    }
  }

  // Fallback: every PMU owns its subtree, truncated at deeper PMUs, with the
  // tree rooted at the lowest PMU bus. All cuts are then PMU-incident.
  if (!voronoi_ok) {
    const int r0 = roots.front();
    std::map<int, int> parent, parent_seg;
    std::vector<int> order{r0};
    std::set<int> seen{r0};
    for (std::size_t head = 0; head < order.size(); ++head) {
      int n = order[head];
      std::vector<std::pair<int, int>> next;  // (other bus, segment)
      for (int s : g.model().incident_segments(n)) {
        int o = g.other_end(s, n);
        if (!seen.count(o)) next.push_back({o, s});
      }
      std::sort(next.begin(), next.end());
      for (auto [o, s] : next) {
        seen.insert(o);
        parent[o] = n;
        parent_seg[o] = s;
        order.push_back(o);
      }
    }
    for (int n : order)
      assigned[n] = channel_limit.count(n) ? n : (n == r0 ? r0 : assigned.at(parent.at(n)));
    for (int r : roots) {
      if (r == r0) continue;
      int seg = parent_seg.at(r);
      if (!try_cover(r, seg))
        throw Error(Errc::uncoverable_boundary,
                    "PMU at bus " + std::to_string(r) +
                        " cannot spare a channel for its feeding cut branch");
      owners[seg] = r;
    }
    for (int seg : boundary_segments())
      if (!owners.count(seg))
        throw Error(Errc::uncoverable_boundary, "unexpected unowned cut branch");
  }

  ZonePartition out;
  out.measured = measured;
  std::map<int, std::vector<int>> members;
  for (const auto& [bus, root] : assigned) members[root].push_back(bus);
  for (auto& [root, m] : members) {
    std::sort(m.begin(), m.end());
    out.zones.push_back({root, m});
  }
  std::sort(out.zones.begin(), out.zones.end(),
            [](const ZonePartition::Zone& a, const ZonePartition::Zone& b) {
              return a.root < b.root;
            });
  for (int seg : boundary_segments()) out.boundaries.push_back({seg, owners.at(seg)});
  return out;
}

}  // namespace gridest::pmu
