#pragma once

#include <array>
#include <vector>

#include "gridest/common.hpp"

namespace gridest::upfc {

// Balanced three-phase sample triple on a shared time grid. Phase A leads with
// sin(wt); B lags 120 degrees, C leads 120 degrees.
struct ThreePhaseWave {
  std::vector<double> times;
  std::array<std::vector<double>, 3> samples;
};

struct SeriesReference : ThreePhaseWave {
  double v_lm = 0.0;  // peak volts
  double omega = 0.0; // rad/s
};

struct ShuntReference : ThreePhaseWave {
  double i_1 = 0.0;   // peak amperes
  double omega = 0.0;
};

enum class CompensationKind { SeriesVoltage, ShuntCurrent };

struct CompensationSignal : ThreePhaseWave {
  CompensationKind kind = CompensationKind::SeriesVoltage;
};

struct HysteresisBand {
  double half_width = 0.0;
};

struct UpfcParameters {
  double c_sh_farad = 0.0;
  double c_l_farad = 0.0;
  double v_dc_ref = 0.0;
  double v_dc = 0.0;
};

// Throws unless both support capacitances are positive.
void validate_parameters(const UpfcParameters& params);

// Scalar phasor quantities of the source/series/shunt/load balance. Magnitudes
// are RMS, angles in degrees; the p/q fields are filled by power_balance.
struct UpfcPowerBalance {
  double v_s = 0.0, i_s = 0.0;
  double v_l = 0.0, i_l = 0.0;
  double v_sr = 0.0, i_sh = 0.0;
  double phi_sr_deg = 0.0, phi_sh_deg = 0.0, phi_l_deg = 0.0;
  cd z_s{0.0, 0.0}, z_sr{0.0, 0.0};

  double p_s = 0.0, q_s = 0.0;
  double p_sr = 0.0, q_sr = 0.0;
  double p_sh = 0.0, q_sh = 0.0;
  double p_l = 0.0, q_l = 0.0;
};

SeriesReference series_reference(double v_lm, double omega, const std::vector<double>& times);
ShuntReference shunt_reference(double i_1, double omega, const std::vector<double>& times);

// Per-phase, per-sample difference: reference minus actual.
CompensationSignal series_compensation(const SeriesReference& reference,
                                       const ThreePhaseWave& actual);
CompensationSignal shunt_compensation(const ShuntReference& reference,
                                      const ThreePhaseWave& actual);

// Two-level comparator with dead band: flips high past +half_width, low past
// -half_width, holds in between. Initial state follows the first error's sign.
std::vector<int> hysteresis_pulses(const std::vector<double>& error, const HysteresisBand& band);

// Fills the p/q fields from the magnitudes and angles. The default shunt pair
// follows the series angle; `symmetric_shunt` switches to the shunt-angle
// variant (V_L*I_sh with phi_sh).
UpfcPowerBalance power_balance(UpfcPowerBalance inputs, bool symmetric_shunt = false);

// Shunt current phasor implied by load and source current: I_sh at phi_sh
// equals I_L at phi_L minus I_s at zero. Returns {magnitude, degrees}.
std::pair<double, double> shunt_current_from_load(double i_l, double phi_l_deg, double i_s);

// Ratio of harmonic (2..50) RMS content to the fundamental, in percent, over
// the largest whole number of fundamental periods in the record.
double thd_percent(const std::vector<double>& samples, double fundamental_hz, double sample_rate);

}  // namespace gridest::upfc
