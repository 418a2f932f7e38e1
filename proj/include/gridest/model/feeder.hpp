#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridest/common.hpp"

namespace gridest::model {

struct GeneralData {
  int slack_bus = 0;
  double v_nom_kv = 0.0;                       // line-to-line
  std::array<double, 3> slack_mag_pu{1, 1, 1};
  std::array<double, 3> slack_ang_deg{0, -120, 120};
  // Ideal per-phase regulator taps keyed by "from-to"; absent means 1.0.
  std::map<std::string, std::array<double, 3>> segment_taps;

  double v_base_ln() const { return v_nom_kv * 1000.0 / std::sqrt(3.0); }
  cd slack_voltage(int phase) const {
    double ang = deg2rad(slack_ang_deg[phase]);
    return std::polar(slack_mag_pu[phase] * v_base_ln(), ang);
  }
};

struct LineConfig {
  int config_id = 0;
  bool is_line = true;                // false: transformer entry
  Eigen::Matrix3d r_ohm_per_mile = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d x_ohm_per_mile = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d b_usiemens_per_mile = Eigen::Matrix3d::Zero();

  // Lines: phase present iff the R or X diagonal is nonzero.
  // Transformer entries span all three phases by definition.
  PhaseSet phasing() const {
    if (!is_line) return PhaseSet::all();
    PhaseSet s;
    for (int p = 0; p < 3; ++p)
      if (r_ohm_per_mile(p, p) != 0.0 || x_ohm_per_mile(p, p) != 0.0) s.add(p);
    return s;
  }
};

struct LineSegment {
  int from_bus = 0;   // Node A
  int to_bus = 0;     // Node B
  double length_ft = 0.0;
  int config_id = 0;
};

enum class ZipKind : int { ConstantPQ = 0, ConstantCurrent = 1, ConstantImpedance = 2 };

struct SpotLoad {
  int bus = 0;
  bool wye = true;    // false: delta
  ZipKind zip_kind = ZipKind::ConstantPQ;
  std::array<double, 3> p_kw{0, 0, 0};
  std::array<double, 3> q_kvar{0, 0, 0};

  // Phases the load needs present: wye entry p draws on phase p, delta entry p
  // is the leg between phases p and p+1.
  PhaseSet phases() const {
    PhaseSet s;
    for (int p = 0; p < 3; ++p)
      if (p_kw[p] != 0.0 || q_kvar[p] != 0.0) {
        s.add(p);
        if (!wye) s.add((p + 1) % 3);
      }
    return s;
  }
};

struct SwitchLink {
  int bus_a = 0;
  int bus_b = 0;
  bool closed = true;
};

struct NodeCoord {
  int bus = 0;
  double x = 0.0;
  double y = 0.0;
};

// Raw cell text per file, kept for bit-exact serialization.
struct SourceTable {
  std::string header;
  std::vector<std::vector<std::string>> rows;
};

struct SourceTables {
  SourceTable general, lines, configs, loads, coords, switches;
};

struct BranchAdmittance {
  Eigen::Matrix3cd z_series = Eigen::Matrix3cd::Zero();   // ohms
  Eigen::Matrix3cd y_shunt_half = Eigen::Matrix3cd::Zero();  // siemens, per end
  PhaseSet phases;
  bool is_transformer = false;
};

struct Finding {
  std::string category;   // connectivity | radiality | phase-consistency | data
  std::string message;
};

class FeederModel {
 public:
  // Builds and validates; throws gridest::Error on structural problems.
  static FeederModel from_parts(GeneralData general,
                                std::vector<LineConfig> configs,
                                std::vector<LineSegment> segments,
                                std::vector<SpotLoad> loads,
                                std::vector<SwitchLink> switches,
                                std::vector<NodeCoord> coords = {},
                                SourceTables sources = {});

  const GeneralData& general() const { return general_; }
  const std::map<int, LineConfig>& configs() const { return configs_; }
  const std::vector<LineSegment>& segments() const { return segments_; }
  const std::vector<SpotLoad>& loads() const { return loads_; }
  const std::vector<SwitchLink>& switches() const { return switches_; }
  const std::vector<NodeCoord>& coords() const { return coords_; }
  const SourceTables& sources() const { return sources_; }

  const LineConfig& config(int id) const;

  // All bus ids named by segments/switches (pre-merge), ascending.
  const std::vector<int>& buses() const { return buses_; }

  bool merged() const { return merged_; }
  // Canonical id for a bus after switch merging (identity if not merged).
  int canonical(int bus) const;
  // Original ids collapsed into canonical id `bus` (includes the bus itself).
  std::vector<int> aliases(int bus) const;
  // Canonical ids, ascending (equals buses() before merging).
  const std::vector<int>& merged_buses() const { return merged_ ? merged_buses_ : buses_; }

  // Adjacency over canonical buses: segment indices incident to a bus.
  const std::vector<int>& incident_segments(int canonical_bus) const;

  // Phases present at a canonical bus (slack: all three; others: phases of the
  // segment path feeding them). Only valid on merged radial models.
  PhaseSet bus_phases(int canonical_bus) const;

  // Per-phase regulator tap for a segment, default 1.0.
  std::array<double, 3> segment_tap(const LineSegment& seg) const;

 private:
  friend FeederModel merge_switches(const FeederModel&);

  GeneralData general_;
  std::map<int, LineConfig> configs_;
  std::vector<LineSegment> segments_;
  std::vector<SpotLoad> loads_;
  std::vector<SwitchLink> switches_;
  std::vector<NodeCoord> coords_;
  SourceTables sources_;

  std::vector<int> buses_;
  bool merged_ = false;
  std::map<int, int> canon_;                  // original -> canonical
  std::vector<int> merged_buses_;
  std::map<int, std::vector<int>> adjacency_; // canonical bus -> segment indices
  std::map<int, PhaseSet> bus_phases_;

  void index_buses();
  void build_adjacency();
};

// Parses the six-file dataset from a directory. Validates headers verbatim,
// reports unparseable cells with row/column, checks structural invariants.
FeederModel parse_feeder(const std::string& directory);

// Z = (R + jX) * length/5280, shunt = B * length/5280 (split half per end by
// the caller). Throws transformer_config_passed for non-line configs.
BranchAdmittance branch_impedance(const LineSegment& segment, const LineConfig& config);

// Transformer entries: the single resistive figure is read as per-unit series
// impedance on the 1 MVA feeder base, tap 1.0, no phase shift, three-phase.
BranchAdmittance transformer_impedance(const LineSegment& segment, const LineConfig& config,
                                       const GeneralData& general);

// Dispatches on config.is_line.
BranchAdmittance segment_admittance(const FeederModel& model, const LineSegment& segment);

// Identifies the endpoints of each closed switch (zero impedance), returning a
// model over canonical buses with alias bookkeeping. Throws on cycles.
FeederModel merge_switches(const FeederModel& model);

// Connectivity, radiality and phase-consistency findings; empty means valid.
std::vector<Finding> validate_topology(const FeederModel& model);

// Writes the six CSV files back out of the retained source cells.
void serialize_feeder(const FeederModel& model, const std::string& directory);

// Normalized model dump (schema in docs/model_dump.md).
std::string model_dump_json(const FeederModel& model);

}  // namespace gridest::model
