#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "gridest/se/estimation.hpp"

namespace gridest::se::detail {

// Complex state indexing over (bus, phase) pairs.
struct StateIndex {
  std::vector<std::pair<int, int>> states;
  std::map<std::pair<int, int>, int> lookup;

  void add(int bus, int phase) {
    auto key = std::make_pair(bus, phase);
    if (lookup.count(key)) return;
    lookup[key] = static_cast<int>(states.size());
    states.push_back(key);
  }
  int at(int bus, int phase) const { return lookup.at({bus, phase}); }
  bool has(int bus, int phase) const { return lookup.count({bus, phase}) != 0; }
  bool has_bus(int bus) const {
    auto it = lookup.lower_bound({bus, 0});
    return it != lookup.end() && it->first.first == bus;
  }
  int size() const { return static_cast<int>(states.size()); }
};

// One measurement mapped to two scalar rows in per-unit.
//  - phasor rows:     z = sum(coeff_k * V_k)
//  - injection rows:  S = V_own * conj(sum(coeff_k * V_k) + constant)
struct Row {
  bool injection = false;
  int own = -1;  // complex state index of the injection bus voltage
  std::vector<std::pair<int, cd>> terms;
  cd constant{0.0, 0.0};
  double z1 = 0.0, z2 = 0.0;
  double w1 = 1.0, w2 = 1.0;
};

struct GnOutcome {
  Eigen::VectorXd x;  // 2 * state count
  int iterations = 0;
  double chi_square = 0.0;
};

// Gauss-Newton with normal equations (LDLT); throws rank_deficient, diverged
// or max_iterations. Linear-only row sets converge on the first step.
GnOutcome gauss_newton(const std::vector<Row>& rows, int n_complex, const Eigen::VectorXd& x0,
                       const EstimationOptions& options, const std::string& label);

// Network description shared by the builders: merged model admittances.
struct NetworkCtx {
  const model::FeederModel* m = nullptr;
  model::FeederModel storage;
  std::vector<model::BranchAdmittance> adm;
  std::vector<Eigen::Matrix3cd> y_series;  // masked inverse of z_series
  double v_base = 1.0, i_base = 1.0, s_base_phase = 1.0;

  void init(const model::FeederModel& model);
  const model::FeederModel& model() const { return *m; }
  std::pair<int, int> ends(int seg) const {
    const auto& s = m->segments()[seg];
    return {m->canonical(s.from_bus), m->canonical(s.to_bus)};
  }
};

// Truth-side per-phase complex current leaving `bus` into segment `seg`.
Eigen::Vector3cd current_leaving(const NetworkCtx& net, const pf::PhasorSet& v, int seg, int bus);

// Schedules fn(0..count-1); implementations may run tasks concurrently.
using TaskRunner = std::function<void(int count, const std::function<void(int)>&)>;

// Max relative disagreement between the analytic measurement Jacobian and a
// central finite difference of h, evaluated at a randomly perturbed state.
double jacobian_check(const model::FeederModel& model, const MeasurementSet& measurements,
                      double step, std::uint64_t seed);

EstimationResult solve_zones(const model::FeederModel& model, const pmu::ZonePartition& partition,
                             const MeasurementSet& measurements, const EstimationOptions& options,
                             const TaskRunner& run_tasks);

}  // namespace gridest::se::detail
