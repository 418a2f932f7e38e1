#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace gridest {

using cd = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;

// Reporting/per-unit base for power and current quantities. Voltage bases come
// from the dataset (line-to-neutral nominal); power needs a convention, so the
// toolkit fixes 1 MVA three-phase and derives the per-phase current base.
constexpr double kSBaseVA = 1.0e6;

enum class Phase : int { A = 0, B = 1, C = 2 };

inline char phase_letter(Phase p) { return "ABC"[static_cast<int>(p)]; }
inline char phase_letter(int p) { return "ABC"[p]; }

// Bitmask over the three phases.
class PhaseSet {
 public:
  PhaseSet() = default;
  explicit PhaseSet(std::uint8_t bits) : bits_(bits & 0x7) {}
  static PhaseSet all() { return PhaseSet(0x7); }
  static PhaseSet none() { return PhaseSet(0x0); }

  void add(int p) { bits_ |= std::uint8_t(1u << p); }
  bool has(int p) const { return (bits_ >> p) & 1u; }
  bool empty() const { return bits_ == 0; }
  int count() const { return (bits_ & 1) + ((bits_ >> 1) & 1) + ((bits_ >> 2) & 1); }
  bool superset_of(PhaseSet o) const { return (bits_ & o.bits_) == o.bits_; }
  PhaseSet unite(PhaseSet o) const { return PhaseSet(std::uint8_t(bits_ | o.bits_)); }
  bool operator==(const PhaseSet& o) const { return bits_ == o.bits_; }
  bool operator!=(const PhaseSet& o) const { return bits_ != o.bits_; }

  std::string str() const {
    std::string s;
    for (int p = 0; p < 3; ++p)
      if (has(p)) s += phase_letter(p);
    return s;
  }

 private:
  std::uint8_t bits_ = 0;
};

enum class Errc {
  // usage / file problems (CLI exit 2)
  usage,
  missing_file,
  bad_header,
  unparseable_cell,
  missing_input,
  // domain problems (CLI exit 1)
  invalid_model,
  dangling_config_reference,
  duplicate_segment,
  transformer_config_passed,
  merge_creates_cycle,
  not_radial,
  missing_slack,
  zero_voltage_at_load,
  empty_time_grid,
  grid_mismatch,
  too_few_samples,
  zero_fundamental,
  unknown_bus,
  too_large_for_oracle,
  infeasible_zone_bound,
  unobservable_input,
  uncoverable_boundary,
  unobservable_placement,
  rank_deficient,
  singular_lse,
  nan_gradient,
  degenerate_trace_range,
  diverged,
  max_iterations,
  index_mismatch,
  merge_conflict,
  empty_run_directory,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

  bool is_usage() const {
    switch (code_) {
      case Errc::usage:
      case Errc::missing_file:
      case Errc::bad_header:
      case Errc::unparseable_cell:
      case Errc::missing_input:
        return true;
      default:
        return false;
    }
  }

 private:
  Errc code_;
};

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace gridest
