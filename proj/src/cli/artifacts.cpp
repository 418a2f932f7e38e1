#include "artifacts.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace gridest::cli {

std::string fnv1a_digest_of_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::missing_file, "missing file: " + path);
  std::uint64_t hash = 1469598103934665603ull;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 1099511628211ull;
    }
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(hash));
  return out;
}

void manifest_add_input(Manifest& m, const std::string& path) {
  if (std::filesystem::is_directory(path)) {
    std::vector<std::string> files;
    for (const auto& e : std::filesystem::directory_iterator(path))
      if (e.is_regular_file()) files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) m.inputs[f] = fnv1a_digest_of_file(f);
    return;
  }
  m.inputs[path] = fnv1a_digest_of_file(path);
}

void write_manifest(const std::string& out_dir, const Manifest& m) {
  nlohmann::json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["subcommand"] = m.subcommand;
  j["flags"] = m.flags;
  j["inputs"] = m.inputs;
  j["seed"] = m.seed;
  std::ofstream out(out_dir + "/" + kManifestName, std::ios::binary);
  if (!out) throw Error(Errc::missing_file, "cannot write manifest in " + out_dir);
  out << j.dump(2) << "\n";
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::missing_file, "cannot create output directory " + dir);
}

void write_phasor_csv(const std::string& path, const model::FeederModel& merged,
                      const pf::PhasorSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::missing_file, "cannot write " + path);
  out << "# manifest: " << kManifestName << "\n";
  out << "bus,phase,mag_pu,angle_deg\n";
  char buf[128];
  for (int bus : merged.buses()) {
    int canon = merged.canonical(bus);
    auto it = set.buses.find(canon);
    if (it == set.buses.end()) continue;
    for (int p = 0; p < 3; ++p) {
      if (!it->second.phases.has(p)) continue;
      std::snprintf(buf, sizeof buf, "%d,%c,%.4f,%.4f\n", bus, phase_letter(p),
                    std::abs(it->second.v[p]) / set.v_base_ln, rad2deg(std::arg(it->second.v[p])));
      out << buf;
    }
  }
}

std::vector<PhasorRow> read_phasor_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::missing_file, "missing file: " + path);
  std::vector<PhasorRow> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "bus,phase,mag_pu,angle_deg")
        throw Error(Errc::bad_header, path + ": unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    PhasorRow row;
    char phase = 0;
    if (std::sscanf(line.c_str(), "%d,%c,%lf,%lf", &row.bus, &phase, &row.mag_pu,
                    &row.angle_deg) != 4)
      throw Error(Errc::unparseable_cell, path + ": bad row '" + line + "'");
    row.phase = phase - 'A';
    rows.push_back(row);
  }
  return rows;
}

void write_summary_json(const std::string& path, const pf::PowerFlowSolution& s) {
  nlohmann::json j;
  j["manifest"] = kManifestName;
  j["converged"] = s.converged;
  j["iterations"] = s.iterations;
  j["max_mismatch_pu"] = s.max_mismatch_pu;
  j["mismatch_history"] = s.mismatch_history;
  j["total_source_kw"] = s.total_source_kw;
  j["total_source_kvar"] = s.total_source_kvar;
  j["total_load_kw"] = s.total_load_kw;
  j["total_load_kvar"] = s.total_load_kvar;
  j["total_loss_kw"] = s.total_loss_kw;
  j["total_loss_kvar"] = s.total_loss_kvar;
  j["total_shunt_kvar"] = s.total_shunt_kvar;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::missing_file, "cannot write " + path);
  out << j.dump(2) << "\n";
}

void write_placement_json(const std::string& path, const model::FeederModel& merged,
                          const pmu::Placement& placement, const pmu::ZonePartition& partition) {
  nlohmann::json j;
  j["manifest"] = kManifestName;
  j["observable"] = pmu::observable_from(merged, partition.measured);
  j["devices"] = nlohmann::json::array();
  for (const auto& d : placement.devices) {
    nlohmann::json dev;
    dev["bus"] = d.bus;
    if (d.channels == pmu::kUnlimitedChannels)
      dev["channels"] = "inf";
    else
      dev["channels"] = d.channels;
    nlohmann::json branches = nlohmann::json::array();
    auto it = partition.measured.find(d.bus);
    if (it != partition.measured.end())
      for (int seg : it->second) {
        const auto& s = merged.segments()[seg];
        branches.push_back({s.from_bus, s.to_bus});
      }
    dev["measured_branches"] = branches;
    j["devices"].push_back(dev);
  }
  j["zones"] = nlohmann::json::array();
  for (const auto& z : partition.zones)
    j["zones"].push_back({{"root", z.root}, {"members", z.members}});
  j["boundaries"] = nlohmann::json::array();
  for (const auto& b : partition.boundaries) {
    const auto& s = merged.segments()[b.segment];
    j["boundaries"].push_back(
        {{"from", s.from_bus}, {"to", s.to_bus}, {"owner_pmu", b.owner_pmu}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::missing_file, "cannot write " + path);
  out << j.dump(2) << "\n";
}

LoadedPlacement read_placement_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::missing_input, "missing placement file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error(Errc::unparseable_cell, path + ": " + e.what());
  }
  LoadedPlacement out;
  for (const auto& dev : j.at("devices")) {
    pmu::PmuDevice d;
    d.bus = dev.at("bus").get<int>();
    if (dev.at("channels").is_string())
      d.channels = pmu::kUnlimitedChannels;
    else
      d.channels = dev.at("channels").get<int>();
    out.placement.devices.push_back(d);
  }
  return out;
}

void write_estimate_report_json(const std::string& path, const se::EstimationResult& result,
                                const se::EstimationReport& report, const std::string& mode) {
  nlohmann::json j;
  j["manifest"] = kManifestName;
  j["mode"] = mode;
  j["chi_square"] = result.chi_square;
  j["degrees_of_freedom"] = result.degrees_of_freedom;
  j["zones"] = nlohmann::json::array();
  for (const auto& z : result.zones)
    j["zones"].push_back({{"root", z.root},
                          {"iterations", z.iterations},
                          {"weighted_residual_norm", z.weighted_residual_norm},
                          {"measurement_scalars", z.measurement_scalars},
                          {"state_scalars", z.state_scalars}});
  nlohmann::json errors = nlohmann::json::array();
  for (const auto& r : report.rows)
    errors.push_back({{"bus", r.bus},
                      {"phase", std::string(1, phase_letter(r.phase))},
                      {"pct_mag_error", r.pct_mag_error},
                      {"angle_error_deg", r.angle_error_deg}});
  j["percent_errors"] = errors;
  j["max_pct_mag_error"] = report.max_pct_mag_error;
  j["mean_pct_mag_error"] = report.mean_pct_mag_error;
  j["max_angle_error_deg"] = report.max_angle_error_deg;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::missing_file, "cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace gridest::cli
