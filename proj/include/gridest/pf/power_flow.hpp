#pragma once

#include <map>
#include <vector>

#include "gridest/model/feeder.hpp"

namespace gridest::pf {

// Per-bus, per-phase complex line-to-neutral voltages (volts). Buses lacking a
// phase carry no entry there; per-unit uses the line-to-neutral nominal base.
class PhasorSet {
 public:
  struct Entry {
    std::array<cd, 3> v{cd(0, 0), cd(0, 0), cd(0, 0)};
    PhaseSet phases;
  };

  double v_base_ln = 1.0;
  std::map<int, Entry> buses;  // canonical bus id -> entry

  bool has(int bus, int phase) const {
    auto it = buses.find(bus);
    return it != buses.end() && it->second.phases.has(phase);
  }
  cd voltage(int bus, int phase) const { return buses.at(bus).v[phase]; }
  double mag_pu(int bus, int phase) const { return std::abs(voltage(bus, phase)) / v_base_ln; }
  double angle_deg(int bus, int phase) const { return rad2deg(std::arg(voltage(bus, phase))); }
};

struct SweepOptions {
  double tolerance_pu = 1e-6;
  int max_iterations = 100;
  bool flat_start = true;
  const PhasorSet* initial = nullptr;  // used when flat_start is false
};

struct PowerFlowSolution {
  PhasorSet voltages;
  int iterations = 0;
  bool converged = false;
  double max_mismatch_pu = 0.0;
  std::vector<double> mismatch_history;  // max per-unit voltage change per iteration

  double total_source_kw = 0.0, total_source_kvar = 0.0;
  double total_load_kw = 0.0, total_load_kvar = 0.0;
  double total_loss_kw = 0.0, total_loss_kvar = 0.0;
  double total_shunt_kw = 0.0, total_shunt_kvar = 0.0;  // negative kvar: charging generation
};

// Per-phase load current draw at the given voltages. Wye ratings are taken at
// nominal line-to-neutral volts, delta legs at line-to-line.
std::array<cd, 3> load_current(const model::SpotLoad& load, const std::array<cd, 3>& v,
                               const model::GeneralData& general);

// Ladder solver: backward current accumulation, forward voltage update from the
// slack, iterated until the largest per-unit voltage change drops under
// tolerance. Returns a full (possibly unconverged) solution.
PowerFlowSolution solve_power_flow(const model::FeederModel& model, const SweepOptions& opts = {});

// Worst per-unit current mismatch over all non-slack buses, recomputed from the
// solution voltages alone (1 MVA / three-phase base current).
double kcl_residual(const model::FeederModel& model, const PowerFlowSolution& solution);

}  // namespace gridest::pf
