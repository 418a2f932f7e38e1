#pragma once

#include <json.hpp>
#include <map>
#include <string>

#include "gridest/pf/power_flow.hpp"
#include "gridest/pmu/placement.hpp"
#include "gridest/se/estimation.hpp"

namespace gridest::cli {

constexpr const char* kToolName = "gridest";
constexpr const char* kToolVersion = "0.1.0";
constexpr const char* kManifestName = "manifest.json";

struct Manifest {
  std::string subcommand;
  std::map<std::string, std::string> flags;
  std::map<std::string, std::string> inputs;  // path -> content digest
  std::uint64_t seed = 0;
};

std::string fnv1a_digest_of_file(const std::string& path);
void manifest_add_input(Manifest& m, const std::string& path);
void write_manifest(const std::string& out_dir, const Manifest& m);

void ensure_out_dir(const std::string& dir);

// Phasor table with one row per original bus id; switch aliases repeat their
// canonical phasors. Four decimals on magnitude and angle.
void write_phasor_csv(const std::string& path, const model::FeederModel& merged,
                      const pf::PhasorSet& set);

struct PhasorRow {
  int bus = 0;
  int phase = 0;
  double mag_pu = 0.0;
  double angle_deg = 0.0;
};
std::vector<PhasorRow> read_phasor_csv(const std::string& path);

void write_summary_json(const std::string& path, const pf::PowerFlowSolution& solution);

void write_placement_json(const std::string& path, const model::FeederModel& merged,
                          const pmu::Placement& placement, const pmu::ZonePartition& partition);

struct LoadedPlacement {
  pmu::Placement placement;
};
LoadedPlacement read_placement_json(const std::string& path);

void write_estimate_report_json(const std::string& path, const se::EstimationResult& result,
                                const se::EstimationReport& report, const std::string& mode);

}  // namespace gridest::cli
