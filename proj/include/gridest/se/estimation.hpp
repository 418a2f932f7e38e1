#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridest/pf/power_flow.hpp"
#include "gridest/pmu/placement.hpp"

namespace gridest::se {

enum class MeasKind : int { PmuVoltage = 0, PmuCurrent = 1, PseudoInjection = 2 };

// One measurement in SI units. Phasor kinds carry rectangular components in
// volts/amperes; pseudo-injections carry net injected P (W) and Q (var).
// `sigma` is the per-component standard deviation in the same units.
struct Measurement {
  MeasKind kind = MeasKind::PmuVoltage;
  int bus = 0;        // voltage/pseudo: the bus; current: the measuring end
  int other_bus = -1; // current: far end of the measured branch
  int phase = 0;
  double a = 0.0;     // re or P
  double b = 0.0;     // im or Q
  double sigma = 1.0;
};

struct NoiseSpec {
  double sigma_v_pu = 0.001;
  double sigma_i_pu = 0.002;
  double sigma_pseudo_rel = 0.10;       // fraction of the per-phase injection
  double sigma_pseudo_floor_va = 100.0; // absolute floor, also used at no-load buses
};

struct MeasurementSet {
  std::vector<Measurement> items;  // stable order: bus, phase, kind, far end
  std::uint64_t seed = 0;
  std::string truth_id;
  std::vector<std::string> warnings;
};

struct EstimationOptions {
  double tolerance_pu = 1e-6;  // Gauss-Newton step threshold
  int max_iterations = 50;
  bool init_from_linear = false;  // start from the PMU-only linear solution
};

struct ZoneStat {
  int root = -1;  // -1: monolithic solve
  int iterations = 0;
  double weighted_residual_norm = 0.0;
  int measurement_scalars = 0;
  int state_scalars = 0;
};

struct EstimationResult {
  pf::PhasorSet voltages;
  std::vector<ZoneStat> zones;
  double chi_square = 0.0;
  int degrees_of_freedom = 0;
};

struct EstimationReport {
  struct Row {
    int bus = 0;
    int phase = 0;
    double pct_mag_error = 0.0;
    double angle_error_deg = 0.0;
  };
  std::vector<Row> rows;
  double max_pct_mag_error = 0.0;
  double mean_pct_mag_error = 0.0;
  double max_angle_error_deg = 0.0;
};

// Synthesizes PMU phasors at the placement's buses/branches and per-phase
// pseudo-injections at every non-slack bus, all computed from the truth
// solution's network equations, then adds seeded Gaussian noise in the set's
// stable order. Non-positive sigmas are floored at 1e-9 with a warning.
MeasurementSet generate_measurements(const pf::PowerFlowSolution& truth,
                                     const model::FeederModel& model,
                                     const pmu::Placement& placement, const NoiseSpec& noise,
                                     std::uint64_t seed, const std::string& truth_id = "truth");

// Same, with an explicit channel assignment (pmu bus -> segment indices), e.g.
// a partition's final assignment so its cut branches are guaranteed covered.
MeasurementSet generate_measurements(const pf::PowerFlowSolution& truth,
                                     const model::FeederModel& model,
                                     const std::map<int, std::vector<int>>& measured_by_pmu,
                                     const NoiseSpec& noise, std::uint64_t seed,
                                     const std::string& truth_id = "truth");

// Weighted least squares over the phasor (linear) measurements alone,
// restricted to `buses` (empty: all). Throws rank_deficient when those
// measurements do not pin the requested states.
pf::PhasorSet wls_linear_pmu(const model::FeederModel& model, const MeasurementSet& measurements,
                             const std::vector<int>& buses = {});

// Gauss-Newton over the mixed phasor + injection model, rectangular states,
// analytic Jacobian.
EstimationResult wls_gauss_newton(const model::FeederModel& model,
                                  const MeasurementSet& measurements,
                                  const EstimationOptions& options = {});

// Solves each zone independently (optionally across threads); PMU-measured cut
// currents enter the two touching zones as constants of their boundary-bus
// injection equations. Output is byte-identical for any worker count.
EstimationResult estimate_parallel(const model::FeederModel& model,
                                   const pmu::ZonePartition& partition,
                                   const MeasurementSet& measurements,
                                   const EstimationOptions& options = {}, int workers = 0);

EstimationReport error_report(const EstimationResult& estimate,
                              const pf::PowerFlowSolution& truth);

void write_measurements_csv(const std::string& path, const MeasurementSet& set,
                            const std::string& manifest_name = "");
MeasurementSet read_measurements_csv(const std::string& path);

}  // namespace gridest::se
