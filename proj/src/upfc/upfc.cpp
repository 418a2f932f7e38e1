#include "gridest/upfc/upfc.hpp"

#include <algorithm>
#include <cmath>

namespace gridest::upfc {

namespace {

constexpr double kPhaseShift[3] = {0.0, -2.0 * kPi / 3.0, 2.0 * kPi / 3.0};

void check_times(const std::vector<double>& times) {
  if (times.empty()) throw Error(Errc::empty_time_grid, "time grid is empty");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (times[i] <= times[i - 1])
      throw Error(Errc::empty_time_grid, "time grid must be strictly increasing");
}

void check_same_grid(const ThreePhaseWave& a, const ThreePhaseWave& b) {
  if (a.times.size() != b.times.size())
    throw Error(Errc::grid_mismatch, "sample grids differ in length");
  for (std::size_t i = 0; i < a.times.size(); ++i)
    if (a.times[i] != b.times[i])
      throw Error(Errc::grid_mismatch, "sample grids differ at index " + std::to_string(i));
  for (int p = 0; p < 3; ++p)
    if (b.samples[p].size() != b.times.size())
      throw Error(Errc::grid_mismatch, "phase " + std::string(1, phase_letter(p)) +
                                           " sample count does not match the grid");
}

void fill_balanced(ThreePhaseWave& w, double peak, double omega) {
  for (int p = 0; p < 3; ++p) {
    w.samples[p].resize(w.times.size());
    for (std::size_t i = 0; i < w.times.size(); ++i)
      w.samples[p][i] = peak * std::sin(omega * w.times[i] + kPhaseShift[p]);
  }
}

}  // namespace

SeriesReference series_reference(double v_lm, double omega, const std::vector<double>& times) {
  if (v_lm <= 0.0 || omega <= 0.0)
    throw Error(Errc::usage, "series reference needs positive magnitude and frequency");
  check_times(times);
  SeriesReference ref;
  ref.v_lm = v_lm;
  ref.omega = omega;
  ref.times = times;
  fill_balanced(ref, v_lm, omega);
  return ref;
}

ShuntReference shunt_reference(double i_1, double omega, const std::vector<double>& times) {
  if (i_1 <= 0.0 || omega <= 0.0)
    throw Error(Errc::usage, "shunt reference needs positive magnitude and frequency");
  check_times(times);
  ShuntReference ref;
  ref.i_1 = i_1;
  ref.omega = omega;
  ref.times = times;
  fill_balanced(ref, i_1, omega);
  return ref;
}

namespace {
CompensationSignal subtract(const ThreePhaseWave& reference, const ThreePhaseWave& actual,
                            CompensationKind kind) {
  check_same_grid(reference, actual);
  CompensationSignal out;
  out.kind = kind;
  out.times = reference.times;
  for (int p = 0; p < 3; ++p) {
    out.samples[p].resize(out.times.size());
    for (std::size_t i = 0; i < out.times.size(); ++i)
      out.samples[p][i] = reference.samples[p][i] - actual.samples[p][i];
  }
  return out;
}
}  // namespace

CompensationSignal series_compensation(const SeriesReference& reference,
                                       const ThreePhaseWave& actual) {
  return subtract(reference, actual, CompensationKind::SeriesVoltage);
}

CompensationSignal shunt_compensation(const ShuntReference& reference,
                                      const ThreePhaseWave& actual) {
  return subtract(reference, actual, CompensationKind::ShuntCurrent);
}

std::vector<int> hysteresis_pulses(const std::vector<double>& error, const HysteresisBand& band) {
  if (band.half_width <= 0.0)
    throw Error(Errc::usage, "hysteresis band half-width must be positive");
  std::vector<int> states;
  states.reserve(error.size());
  int state = 0;
  for (double e : error) {
    if (state == 0) state = e >= 0.0 ? 1 : -1;
    if (e > band.half_width)
      state = 1;
    else if (e < -band.half_width)
      state = -1;
    states.push_back(state);
  }
  return states;
}

UpfcPowerBalance power_balance(UpfcPowerBalance in, bool symmetric_shunt) {
  const double phi_sr = deg2rad(in.phi_sr_deg);
  const double phi_sh = deg2rad(in.phi_sh_deg);

  in.p_s = in.v_s * in.i_s;
  in.q_s = 0.0;

  in.p_sr = in.v_s * in.i_s * std::cos(phi_sr);
  in.q_sr = in.v_s * in.i_s * std::sin(phi_sr);

  if (symmetric_shunt) {
    in.p_sh = in.v_l * in.i_sh * std::cos(phi_sh);
    in.q_sh = in.v_l * in.i_sh * std::sin(phi_sh);
  } else {
    in.p_sh = in.v_l * in.i_s * std::cos(phi_sr);
    in.q_sh = in.v_s * in.i_s * std::sin(phi_sr);
  }

  in.p_l = in.v_s * in.i_s * (1.0 - std::cos(phi_sr)) +
           in.v_l * in.i_s * (std::cos(phi_sr) - std::cos(phi_sh)) -
           in.v_s * in.i_s * std::cos(phi_sh);
  in.q_l = in.v_l * in.i_s * (std::sin(phi_sr) - std::sin(phi_sh)) +
           in.v_l * in.i_l * std::sin(phi_sh) - in.v_s * in.i_s * std::sin(phi_sr);
  return in;
}

std::pair<double, double> shunt_current_from_load(double i_l, double phi_l_deg, double i_s) {
  const cd i_sh = std::polar(i_l, deg2rad(phi_l_deg)) - cd(i_s, 0.0);
  return {std::abs(i_sh), rad2deg(std::arg(i_sh))};
}

void validate_parameters(const UpfcParameters& params) {
  if (params.c_sh_farad <= 0.0)
    throw Error(Errc::usage, "shunt support capacitance must be positive");
  if (params.c_l_farad <= 0.0)
    throw Error(Errc::usage, "load-side capacitance must be positive");
}

double thd_percent(const std::vector<double>& samples, double fundamental_hz, double sample_rate) {
  if (fundamental_hz <= 0.0 || sample_rate <= 0.0)
    throw Error(Errc::usage, "fundamental and sample rate must be positive");
  const double samples_per_period = sample_rate / fundamental_hz;
  const int periods = static_cast<int>(std::floor(double(samples.size()) / samples_per_period + 1e-9));
  if (periods < 1)
    throw Error(Errc::too_few_samples,
                "need at least one fundamental period (" +
                    std::to_string(static_cast<int>(std::ceil(samples_per_period))) +
                    " samples), got " + std::to_string(samples.size()));
  const int n = static_cast<int>(std::lround(periods * samples_per_period));

  double max_abs = 0.0;
  for (int i = 0; i < n; ++i) max_abs = std::max(max_abs, std::abs(samples[i]));

  // Correlate against each harmonic over the whole-period window; bins are
  // exact there. Harmonics above Nyquist are not resolvable and are skipped.
  const int h_nyquist = static_cast<int>(std::floor(sample_rate / (2.0 * fundamental_hz) - 1e-9));
  const int h_max = std::min(50, h_nyquist);
  auto amplitude = [&](int h) {
    double re = 0.0, im = 0.0;
    const double w = 2.0 * kPi * h * fundamental_hz / sample_rate;
    for (int i = 0; i < n; ++i) {
      re += samples[i] * std::cos(w * i);
      im += samples[i] * std::sin(w * i);
    }
    return 2.0 * std::hypot(re, im) / n;
  };

  const double a1 = amplitude(1);
  if (a1 <= 1e-9 * std::max(max_abs, 1e-300))
    throw Error(Errc::zero_fundamental, "no fundamental component in the record");

  double sum_sq = 0.0;
  for (int h = 2; h <= h_max; ++h) {
    double ah = amplitude(h);
    sum_sq += ah * ah;
  }
  return 100.0 * std::sqrt(sum_sq) / a1;
}

}  // namespace gridest::upfc
