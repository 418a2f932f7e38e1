#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "se_internal.hpp"

namespace gridest::se {

using detail::NetworkCtx;

namespace detail {

namespace {
Eigen::Matrix3cd masked_inverse(const Eigen::Matrix3cd& z, PhaseSet phases) {
  int n = phases.count();
  Eigen::MatrixXcd sub(n, n);
  std::array<int, 3> idx{};
  int k = 0;
  for (int p = 0; p < 3; ++p)
    if (phases.has(p)) idx[k++] = p;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) sub(i, j) = z(idx[i], idx[j]);
  Eigen::MatrixXcd inv = sub.fullPivLu().inverse();
  Eigen::Matrix3cd out = Eigen::Matrix3cd::Zero();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(idx[i], idx[j]) = inv(i, j);
  return out;
}
}  // namespace

void NetworkCtx::init(const model::FeederModel& in) {
  if (in.merged()) {
    m = &in;
  } else {
    storage = model::merge_switches(in);
    m = &storage;
  }
  v_base = m->general().v_base_ln();
  i_base = kSBaseVA / (3.0 * v_base);
  s_base_phase = kSBaseVA / 3.0;
  adm.clear();
  y_series.clear();
  for (const auto& seg : m->segments()) {
    adm.push_back(model::segment_admittance(*m, seg));
    y_series.push_back(masked_inverse(adm.back().z_series, adm.back().phases));
  }
}

Eigen::Vector3cd current_leaving(const NetworkCtx& net, const pf::PhasorSet& v, int seg, int bus) {
  auto [a, b] = net.ends(seg);
  int other = a == bus ? b : a;
  auto volt = [&](int n) {
    Eigen::Vector3cd out = Eigen::Vector3cd::Zero();
    auto it = v.buses.find(n);
    if (it != v.buses.end())
      for (int p = 0; p < 3; ++p) out(p) = it->second.v[p];
    return out;
  };
  return net.y_series[seg] * (volt(bus) - volt(other)) + net.adm[seg].y_shunt_half * volt(bus);
}

}  // namespace detail

namespace {

// Portable Box-Muller on top of a seeded 64-bit generator so that sets are
// reproducible across standard libraries.
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
  double operator()() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

 private:
  double uniform() { return double(rng_() >> 11) * (1.0 / 9007199254740992.0); }
  std::mt19937_64 rng_;
};

double floored(double sigma, std::vector<std::string>& warnings, const char* what) {
  if (sigma > 0.0) return sigma;
  warnings.push_back(std::string(what) + " sigma was not positive; floored at 1e-9");
  return 1e-9;
}

}  // namespace

MeasurementSet generate_measurements(const pf::PowerFlowSolution& truth,
                                     const model::FeederModel& model_in,
                                     const pmu::Placement& placement, const NoiseSpec& noise,
                                     std::uint64_t seed, const std::string& truth_id) {
  auto obs = pmu::assign_channels(model_in, placement);
  return generate_measurements(truth, model_in, obs.measured, noise, seed, truth_id);
}

MeasurementSet generate_measurements(const pf::PowerFlowSolution& truth,
                                     const model::FeederModel& model_in,
                                     const std::map<int, std::vector<int>>& measured_by_pmu,
                                     const NoiseSpec& noise_in, std::uint64_t seed,
                                     const std::string& truth_id) {
  NetworkCtx net;
  net.init(model_in);
  const auto& m = net.model();

  MeasurementSet set;
  set.seed = seed;
  set.truth_id = truth_id;

  NoiseSpec noise = noise_in;
  noise.sigma_v_pu = floored(noise.sigma_v_pu, set.warnings, "pmu voltage");
  noise.sigma_i_pu = floored(noise.sigma_i_pu, set.warnings, "pmu current");
  noise.sigma_pseudo_rel = floored(noise.sigma_pseudo_rel, set.warnings, "pseudo");
  noise.sigma_pseudo_floor_va =
      floored(noise.sigma_pseudo_floor_va, set.warnings, "pseudo floor");

  {
    auto covered = pmu::observable_from(m, measured_by_pmu);
    if (covered.size() != m.merged_buses().size())
      throw Error(Errc::unobservable_placement,
                  "placement observes " + std::to_string(covered.size()) + " of " +
                      std::to_string(m.merged_buses().size()) + " buses");
  }

  const int slack = m.canonical(m.general().slack_bus);

  // PMU voltage and branch-current phasors.
  for (const auto& [pmu_bus, segs] : measured_by_pmu) {
    PhaseSet ph = m.bus_phases(pmu_bus);
    for (int p = 0; p < 3; ++p) {
      if (!ph.has(p)) continue;
      Measurement v;
      v.kind = MeasKind::PmuVoltage;
      v.bus = pmu_bus;
      v.phase = p;
      cd val = truth.voltages.voltage(pmu_bus, p);
      v.a = val.real();
      v.b = val.imag();
      v.sigma = noise.sigma_v_pu * net.v_base;
      set.items.push_back(v);
    }
    for (int seg : segs) {
      auto [a, b] = net.ends(seg);
      int other = a == pmu_bus ? b : a;
      // Series current at the measuring end, oriented away from the PMU.
      auto volt = [&](int n) {
        Eigen::Vector3cd out = Eigen::Vector3cd::Zero();
        auto it = truth.voltages.buses.find(n);
        if (it != truth.voltages.buses.end())
          for (int p = 0; p < 3; ++p) out(p) = it->second.v[p];
        return out;
      };
      Eigen::Vector3cd i_series = net.y_series[seg] * (volt(pmu_bus) - volt(other));
      PhaseSet seg_ph = net.adm[seg].phases;
      for (int p = 0; p < 3; ++p) {
        if (!seg_ph.has(p)) continue;
        Measurement c;
        c.kind = MeasKind::PmuCurrent;
        c.bus = pmu_bus;
        c.other_bus = other;
        c.phase = p;
        c.a = i_series(p).real();
        c.b = i_series(p).imag();
        c.sigma = noise.sigma_i_pu * net.i_base;
        set.items.push_back(c);
      }
    }
  }

  // Pseudo-injections at every non-slack bus, valued from the truth network
  // equations so a noise-free set is exactly consistent.
  for (int bus : m.merged_buses()) {
    if (bus == slack) continue;
    PhaseSet ph = m.bus_phases(bus);
    Eigen::Vector3cd i_leave = Eigen::Vector3cd::Zero();
    for (int seg : m.incident_segments(bus))
      i_leave += detail::current_leaving(net, truth.voltages, seg, bus);
    for (int p = 0; p < 3; ++p) {
      if (!ph.has(p)) continue;
      cd v = truth.voltages.voltage(bus, p);
      cd s = v * std::conj(i_leave(p));
      Measurement inj;
      inj.kind = MeasKind::PseudoInjection;
      inj.bus = bus;
      inj.phase = p;
      inj.a = s.real();
      inj.b = s.imag();
      inj.sigma = std::max(noise.sigma_pseudo_rel * std::abs(s), noise.sigma_pseudo_floor_va);
      set.items.push_back(inj);
    }
  }

  std::sort(set.items.begin(), set.items.end(), [](const Measurement& x, const Measurement& y) {
    if (x.bus != y.bus) return x.bus < y.bus;
    if (x.phase != y.phase) return x.phase < y.phase;
    if (x.kind != y.kind) return static_cast<int>(x.kind) < static_cast<int>(y.kind);
    return x.other_bus < y.other_bus;
  });

  Gaussian gauss(seed);
  for (auto& item : set.items) {
    item.a += item.sigma * gauss();
    item.b += item.sigma * gauss();
  }
  return set;
}

EstimationReport error_report(const EstimationResult& estimate,
                              const pf::PowerFlowSolution& truth) {
  EstimationReport rep;
  const auto& est = estimate.voltages;
  const auto& tru = truth.voltages;
  if (est.buses.size() != tru.buses.size())
    throw Error(Errc::index_mismatch, "estimate and truth cover different bus sets");

  double sum_pct = 0.0;
  std::size_t count = 0;
  for (const auto& [bus, entry] : tru.buses) {
    auto it = est.buses.find(bus);
    if (it == est.buses.end() || !(it->second.phases == entry.phases))
      throw Error(Errc::index_mismatch, "estimate missing bus " + std::to_string(bus) +
                                            " or its phase set differs");
    for (int p = 0; p < 3; ++p) {
      if (!entry.phases.has(p)) continue;
      cd vt = entry.v[p], ve = it->second.v[p];
      EstimationReport::Row row;
      row.bus = bus;
      row.phase = p;
      row.pct_mag_error = 100.0 * std::abs(ve - vt) / std::abs(vt);
      double da = rad2deg(std::arg(ve) - std::arg(vt));
      while (da > 180.0) da -= 360.0;
      while (da < -180.0) da += 360.0;
      row.angle_error_deg = std::abs(da);
      rep.rows.push_back(row);
      rep.max_pct_mag_error = std::max(rep.max_pct_mag_error, row.pct_mag_error);
      rep.max_angle_error_deg = std::max(rep.max_angle_error_deg, row.angle_error_deg);
      sum_pct += row.pct_mag_error;
      ++count;
    }
  }
  rep.mean_pct_mag_error = count ? sum_pct / double(count) : 0.0;
  return rep;
}

void write_measurements_csv(const std::string& path, const MeasurementSet& set,
                            const std::string& manifest_name) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::missing_file, "cannot write " + path);
  if (!manifest_name.empty()) out << "# manifest: " << manifest_name << "\n";
  out << "kind,location,phase,re,im,sigma\n";
  char buf[256];
  for (const auto& item : set.items) {
    const char* kind = item.kind == MeasKind::PmuVoltage    ? "pmu-voltage"
                       : item.kind == MeasKind::PmuCurrent ? "pmu-current"
                                                           : "pseudo-injection";
    std::string loc = item.kind == MeasKind::PmuCurrent
                          ? std::to_string(item.bus) + "-" + std::to_string(item.other_bus)
                          : std::to_string(item.bus);
    std::snprintf(buf, sizeof buf, "%s,%s,%c,%.17g,%.17g,%.17g\n", kind, loc.c_str(),
                  phase_letter(item.phase), item.a, item.b, item.sigma);
    out << buf;
  }
}

MeasurementSet read_measurements_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::missing_file, "missing file: " + path);
  MeasurementSet set;
  std::string line;
  bool header_seen = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "kind,location,phase,re,im,sigma")
        throw Error(Errc::bad_header, path + ": unexpected measurement header");
      header_seen = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6)
      throw Error(Errc::unparseable_cell, path + ": bad row at line " + std::to_string(lineno));
    Measurement item;
    if (cells[0] == "pmu-voltage")
      item.kind = MeasKind::PmuVoltage;
    else if (cells[0] == "pmu-current")
      item.kind = MeasKind::PmuCurrent;
    else if (cells[0] == "pseudo-injection")
      item.kind = MeasKind::PseudoInjection;
    else
      throw Error(Errc::unparseable_cell, path + ": unknown kind " + cells[0]);
    auto dash = cells[1].find('-');
    if (item.kind == MeasKind::PmuCurrent) {
      if (dash == std::string::npos)
        throw Error(Errc::unparseable_cell, path + ": current row needs a branch location");
      item.bus = std::stoi(cells[1].substr(0, dash));
      item.other_bus = std::stoi(cells[1].substr(dash + 1));
    } else {
      item.bus = std::stoi(cells[1]);
    }
    item.phase = cells[2].empty() ? 0 : cells[2][0] - 'A';
    item.a = std::stod(cells[3]);
    item.b = std::stod(cells[4]);
    item.sigma = std::stod(cells[5]);
    set.items.push_back(item);
  }
  return set;
}

}  // namespace gridest::se
