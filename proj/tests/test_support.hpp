#pragma once

#include <string>
#include <vector>

#include "gridest/model/feeder.hpp"
#include "gridest/pf/power_flow.hpp"
#include "gridest/se/estimation.hpp"

namespace testsup {

inline std::string dataset_dir() { return std::string(GRIDEST_DATA_DIR) + "/ieee123"; }

inline gridest::model::GeneralData simple_general(int slack_bus, double v_nom_kv = 4.16,
                                                  double mag_pu = 1.0) {
  gridest::model::GeneralData g;
  g.slack_bus = slack_bus;
  g.v_nom_kv = v_nom_kv;
  g.slack_mag_pu = {mag_pu, mag_pu, mag_pu};
  g.slack_ang_deg = {0.0, -120.0, 120.0};
  return g;
}

// Three-phase test line, roughly a stiff overhead span, no charging.
inline gridest::model::LineConfig test_config_abc(int id) {
  gridest::model::LineConfig c;
  c.config_id = id;
  c.is_line = true;
  for (int p = 0; p < 3; ++p) {
    c.r_ohm_per_mile(p, p) = 0.4;
    c.x_ohm_per_mile(p, p) = 1.0;
  }
  return c;
}

// Builds a model from plain edges over the given config; bus 1 (or the lowest
// mentioned bus) is the slack.
inline gridest::model::FeederModel model_from_edges(
    const std::vector<std::pair<int, int>>& edges,
    std::vector<gridest::model::SpotLoad> loads = {}, int slack = -1) {
  using namespace gridest::model;
  int lowest = edges.empty() ? 1 : edges[0].first;
  std::vector<LineSegment> segments;
  for (auto [a, b] : edges) {
    lowest = std::min({lowest, a, b});
    segments.push_back({a, b, 528.0, 1});
  }
  if (slack < 0) slack = lowest;
  return FeederModel::from_parts(simple_general(slack), {test_config_abc(1)}, segments,
                                 std::move(loads), {});
}

inline gridest::model::FeederModel path_model(int n_buses) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < n_buses; ++i) edges.push_back({i, i + 1});
  return gridest::model::FeederModel::from_parts(simple_general(1), {test_config_abc(1)},
                                                 [&] {
                                                   std::vector<gridest::model::LineSegment> s;
                                                   for (auto [a, b] : edges)
                                                     s.push_back({a, b, 528.0, 1});
                                                   return s;
                                                 }(),
                                                 {}, {});
}

// Exact measurement values with practical sigmas: synthesize at a negligible
// noise level, then restore the standard deviations the estimator should use.
inline gridest::se::MeasurementSet noise_free_set(
    const gridest::pf::PowerFlowSolution& truth, const gridest::model::FeederModel& model,
    const std::map<int, std::vector<int>>& measured_by_pmu) {
  using namespace gridest;
  se::NoiseSpec quiet;
  quiet.sigma_v_pu = 1e-13;
  quiet.sigma_i_pu = 1e-13;
  quiet.sigma_pseudo_rel = 1e-13;
  quiet.sigma_pseudo_floor_va = 1e-9;
  auto set = se::generate_measurements(truth, model, measured_by_pmu, quiet, 7);

  const double v_base = model.general().v_base_ln();
  const double i_base = kSBaseVA / (3.0 * v_base);
  for (auto& item : set.items) {
    switch (item.kind) {
      case se::MeasKind::PmuVoltage:
        item.sigma = 0.001 * v_base;
        break;
      case se::MeasKind::PmuCurrent:
        item.sigma = 0.002 * i_base;
        break;
      case se::MeasKind::PseudoInjection:
        item.sigma = std::max(0.10 * std::hypot(item.a, item.b), 100.0);
        break;
    }
  }
  return set;
}

}  // namespace testsup
