#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "test_support.hpp"

using namespace gridest;
using namespace gridest::pmu;

namespace {

model::FeederModel star_model(int leaves) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < leaves; ++i) edges.push_back({1, 2 + i});
  return testsup::model_from_edges(edges);
}

model::FeederModel binary_tree_model(int n_buses) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 2; i <= n_buses; ++i) edges.push_back({i / 2, i});
  return testsup::model_from_edges(edges);
}

Placement at(std::initializer_list<int> buses, int channels) {
  Placement p;
  for (int b : buses) p.devices.push_back({b, channels});
  return p;
}

}  // namespace

TEST_CASE("observability closure") {
  auto path3 = testsup::path_model(3);

  CHECK(observable_set(path3, at({2}, 2)) == std::set<int>{1, 2, 3});
  CHECK(observable_set(path3, at({1}, 1)) == std::set<int>{1, 2});
  CHECK(observable_set(path3, at({1, 2, 3}, 0)) == std::set<int>{1, 2, 3});
  CHECK(fully_observable(path3, at({2}, 2)));
  CHECK_FALSE(fully_observable(path3, at({1}, 1)));

  SUBCASE("unknown bus rejected") {
    CHECK_THROWS_AS(observable_set(path3, at({9}, 1)), Error);
  }

  SUBCASE("monotone in the placement") {
    auto tree = binary_tree_model(12);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      Placement small, big;
      for (int b = 1; b <= 12; ++b) {
        bool in_small = rng() % 3 == 0;
        bool in_big = in_small || rng() % 2 == 0;
        if (in_small) small.devices.push_back({b, 2});
        if (in_big) big.devices.push_back({b, 2});
      }
      if (small.devices.empty() || big.devices.empty()) continue;
      auto s = observable_set(tree, small);
      auto g = observable_set(tree, big);
      for (int b : s) CHECK(g.count(b));
    }
  }
}

TEST_CASE("exhaustive placement oracle") {
  SUBCASE("three-bus path wants the middle") {
    auto minima = brute_force_placement(testsup::path_model(3), 2);
    REQUIRE(minima.size() >= 1);
    CHECK(minima.front().devices.size() == 1);
    CHECK(minima.front().devices[0].bus == 2);
  }
  SUBCASE("single bus network") {
    auto one = model::FeederModel::from_parts(testsup::simple_general(1),
                                              {testsup::test_config_abc(1)}, {}, {}, {});
    auto minima = brute_force_placement(one, 2);
    REQUIRE(minima.size() == 1);
    CHECK(minima.front().devices.size() == 1);
    CHECK(minima.front().devices[0].bus == 1);
  }
  SUBCASE("star hub with enough channels") {
    auto minima = brute_force_placement(star_model(6), 6);
    REQUIRE(!minima.empty());
    CHECK(minima.front().devices.size() == 1);
    CHECK(minima.front().devices[0].bus == 1);
  }
  SUBCASE("oracle is guarded") {
    CHECK_THROWS_AS(brute_force_placement(testsup::path_model(21), 2), Error);
  }
  SUBCASE("every reported optimum is observable") {
    auto model = binary_tree_model(8);
    for (const auto& p : brute_force_placement(model, 2)) CHECK(fully_observable(model, p));
  }
}

TEST_CASE("greedy placement") {
  SUBCASE("matches the oracle on the short path") {
    auto model = testsup::path_model(3);
    auto greedy = greedy_placement(model, 2);
    auto minima = brute_force_placement(model, 2);
    CHECK(greedy.devices.size() == minima.front().devices.size());
    CHECK(fully_observable(model, greedy));
  }
  SUBCASE("warm start that already covers returns unchanged") {
    auto model = testsup::path_model(4);
    Placement warm = at({1, 2, 3, 4}, 2);
    auto out = greedy_placement(model, 2, std::nullopt, warm);
    CHECK(out.devices.size() == warm.devices.size());
  }
  SUBCASE("near-optimal on a binary tree") {
    auto model = binary_tree_model(15);
    auto greedy = greedy_placement(model, 3);
    auto minima = brute_force_placement(model, 3);
    CHECK(fully_observable(model, greedy));
    CHECK(greedy.devices.size() <= minima.front().devices.size() + 1);
  }
  SUBCASE("zone bound adds devices until zones fit") {
    auto model = testsup::path_model(9);
    auto p = greedy_placement(model, kUnlimitedChannels, 3);
    auto zones = partition_zones(model, p);
    for (const auto& z : zones.zones) CHECK(z.members.size() <= 3);
  }
  SUBCASE("bound below one is infeasible") {
    CHECK_THROWS_AS(greedy_placement(testsup::path_model(3), 2, 0), Error);
  }
  SUBCASE("deterministic") {
    auto model = binary_tree_model(15);
    auto a = greedy_placement(model, 2);
    auto b = greedy_placement(model, 2);
    REQUIRE(a.devices.size() == b.devices.size());
    for (std::size_t i = 0; i < a.devices.size(); ++i) CHECK(a.devices[i].bus == b.devices[i].bus);
  }
}

TEST_CASE("zone partitioning") {
  SUBCASE("single observing PMU yields one zone, no boundaries") {
    auto model = testsup::path_model(3);
    auto zones = partition_zones(model, at({2}, 2));
    REQUIRE(zones.zones.size() == 1);
    CHECK(zones.zones[0].root == 2);
    CHECK(zones.zones[0].members == std::vector<int>{1, 2, 3});
    CHECK(zones.boundaries.empty());
  }

  SUBCASE("tie break gives the middle bus to the lower root") {
    auto model = testsup::path_model(3);
    auto zones = partition_zones(model, at({1, 3}, 2));
    REQUIRE(zones.zones.size() == 2);
    CHECK(zones.zones[0].root == 1);
    CHECK(zones.zones[0].members == std::vector<int>{1, 2});
    CHECK(zones.zones[1].members == std::vector<int>{3});
    REQUIRE(zones.boundaries.size() == 1);
    CHECK(zones.boundaries[0].owner_pmu == 3);
  }

  SUBCASE("unobservable placement rejected") {
    auto model = testsup::path_model(4);
    CHECK_THROWS_AS(partition_zones(model, at({1}, 1)), Error);
  }

  SUBCASE("channel-starved roots cannot anchor a partition") {
    // A full cover of the feeder with two-channel devices leaves degree-four
    // trunk PMUs unable to spare a channel for their cut branch.
    auto merged = model::merge_switches(model::parse_feeder(testsup::dataset_dir()));
    auto placement = greedy_placement(merged, 2);
    REQUIRE(fully_observable(merged, placement));
    try {
      partition_zones(merged, placement);
      // Acceptable only if the repair found spares everywhere.
    } catch (const gridest::Error& e) {
      CHECK(e.code() == gridest::Errc::uncoverable_boundary);
    }
  }

  SUBCASE("feeder partition invariants") {
    auto merged = model::merge_switches(model::parse_feeder(testsup::dataset_dir()));
    auto placement = greedy_placement(merged, kUnlimitedChannels);
    auto zones = partition_zones(merged, placement);

    std::set<int> seen;
    for (const auto& z : zones.zones) {
      CHECK(!z.members.empty());
      bool root_inside = false;
      for (int b : z.members) {
        CHECK(!seen.count(b));
        seen.insert(b);
        if (b == z.root) root_inside = true;
      }
      CHECK(root_inside);

      // Connectivity of the zone induced subgraph.
      std::set<int> zone_set(z.members.begin(), z.members.end());
      std::set<int> reached{z.root};
      std::vector<int> stack{z.root};
      while (!stack.empty()) {
        int n = stack.back();
        stack.pop_back();
        for (int si : merged.incident_segments(n)) {
          const auto& seg = merged.segments()[si];
          int o = merged.canonical(seg.from_bus) == n ? merged.canonical(seg.to_bus)
                                                      : merged.canonical(seg.from_bus);
          if (zone_set.count(o) && !reached.count(o)) {
            reached.insert(o);
            stack.push_back(o);
          }
        }
      }
      CHECK(reached.size() == zone_set.size());
    }
    CHECK(seen.size() == merged.merged_buses().size());

    // Every cut branch is measured by the PMU the partition names.
    for (const auto& b : zones.boundaries) {
      const auto& seg = merged.segments()[b.segment];
      int u = merged.canonical(seg.from_bus), v = merged.canonical(seg.to_bus);
      CHECK((b.owner_pmu == u || b.owner_pmu == v));
      auto it = zones.measured.find(b.owner_pmu);
      REQUIRE(it != zones.measured.end());
      CHECK(std::find(it->second.begin(), it->second.end(), b.segment) != it->second.end());
    }
  }
}
