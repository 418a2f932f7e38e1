#include "gridest/cli/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "artifacts.hpp"
#include "gridest/anfis/anfis.hpp"
#include "gridest/upfc/upfc.hpp"
#include "svg.hpp"

namespace gridest::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Common {
  std::string feeder;
  std::string out = "out";
  std::uint64_t seed = 1;
  double tolerance = 1e-6;
  int max_iter = 100;
};

void add_common(CLI::App* sub, Common& c, bool needs_feeder) {
  auto* f = sub->add_option("--feeder", c.feeder, "feeder dataset directory (six CSV files)");
  if (needs_feeder) f->required();
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--tolerance", c.tolerance, "power-flow tolerance in per-unit");
  sub->add_option("--max-iter", c.max_iter, "power-flow iteration cap");
}

model::FeederModel load_merged(const std::string& dir) {
  return model::merge_switches(model::parse_feeder(dir));
}

pf::PowerFlowSolution solve_truth(const model::FeederModel& merged, const Common& c) {
  pf::SweepOptions opts;
  opts.tolerance_pu = c.tolerance;
  opts.max_iterations = c.max_iter;
  return pf::solve_power_flow(merged, opts);
}

Manifest base_manifest(const std::string& sub, const Common& c) {
  Manifest m;
  m.subcommand = sub;
  m.seed = c.seed;
  m.flags["out"] = c.out;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", c.tolerance);
  m.flags["tolerance"] = buf;
  m.flags["max-iter"] = std::to_string(c.max_iter);
  if (!c.feeder.empty()) {
    m.flags["feeder"] = c.feeder;
    manifest_add_input(m, c.feeder);
  }
  return m;
}

int parse_channels(const std::string& text) {
  if (text == "inf") return pmu::kUnlimitedChannels;
  try {
    std::size_t pos = 0;
    int v = std::stoi(text, &pos);
    if (pos == text.size() && v >= 0) return v;
  } catch (...) {
  }
  throw Error(Errc::usage, "--channels expects a non-negative integer or 'inf'");
}

// ---------------------------------------------------------------- validate

int cmd_validate(const Common& c) {
  auto model = model::parse_feeder(c.feeder);
  auto findings = model::validate_topology(model);
  ensure_out_dir(c.out);
  {
    json dump = json::parse(model_dump_json(model));
    dump["manifest"] = kManifestName;
    std::ofstream out(c.out + "/model.json", std::ios::binary);
    out << dump.dump(2) << "\n";
  }
  write_manifest(c.out, base_manifest("validate", c));
  for (const auto& f : findings)
    std::cerr << "finding [" << f.category << "] " << f.message << "\n";
  std::cout << (findings.empty() ? "valid" : "invalid") << ": " << findings.size()
            << " finding(s)\n";
  return findings.empty() ? 0 : 1;
}

// ---------------------------------------------------------------- powerflow

int cmd_powerflow(const Common& c) {
  auto merged = load_merged(c.feeder);
  auto sol = solve_truth(merged, c);
  ensure_out_dir(c.out);
  write_phasor_csv(c.out + "/solution.csv", merged, sol.voltages);
  write_summary_json(c.out + "/summary.json", sol);
  write_manifest(c.out, base_manifest("powerflow", c));
  std::cout << (sol.converged ? "converged" : "NOT converged") << " in " << sol.iterations
            << " iterations, mismatch " << sol.max_mismatch_pu << " pu\n";
  if (!sol.converged) {
    std::cerr << "error: power flow did not converge\n";
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------- place-pmu

int cmd_place_pmu(const Common& c, const std::string& channels_text, int max_zone_size,
                  bool oracle) {
  auto merged = load_merged(c.feeder);
  int channels = parse_channels(channels_text);

  pmu::Placement placement;
  if (oracle) {
    auto minima = pmu::brute_force_placement(merged, channels);
    if (minima.empty()) throw Error(Errc::unobservable_input, "no feasible placement");
    placement = minima.front();
  } else {
    std::optional<int> bound;
    if (max_zone_size > 0) bound = max_zone_size;
    placement = pmu::greedy_placement(merged, channels, bound);
  }
  auto partition = pmu::partition_zones(merged, placement);

  ensure_out_dir(c.out);
  write_placement_json(c.out + "/placement.json", merged, placement, partition);
  Manifest m = base_manifest("place-pmu", c);
  m.flags["channels"] = channels_text;
  if (max_zone_size > 0) m.flags["max-zone-size"] = std::to_string(max_zone_size);
  if (oracle) m.flags["oracle"] = "true";
  write_manifest(c.out, m);
  std::cout << placement.devices.size() << " PMU(s), " << partition.zones.size() << " zone(s), "
            << partition.boundaries.size() << " boundary branch(es)\n";
  return 0;
}

// ------------------------------------------------- simulate-measurements

int cmd_simulate(const Common& c, const std::string& placement_path, double sigma_v,
                 double sigma_i, double sigma_pseudo) {
  auto merged = load_merged(c.feeder);
  auto loaded = read_placement_json(placement_path);
  auto partition = pmu::partition_zones(merged, loaded.placement);
  auto truth = solve_truth(merged, c);
  if (!truth.converged) throw Error(Errc::diverged, "truth power flow did not converge");

  se::NoiseSpec noise;
  noise.sigma_v_pu = sigma_v;
  noise.sigma_i_pu = sigma_i;
  noise.sigma_pseudo_rel = sigma_pseudo;
  auto set = se::generate_measurements(truth, merged, partition.measured, noise, c.seed);

  ensure_out_dir(c.out);
  se::write_measurements_csv(c.out + "/measurements.csv", set, kManifestName);
  Manifest m = base_manifest("simulate-measurements", c);
  m.flags["placement"] = placement_path;
  manifest_add_input(m, placement_path);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", sigma_v);
  m.flags["sigma-v"] = buf;
  std::snprintf(buf, sizeof buf, "%g", sigma_i);
  m.flags["sigma-i"] = buf;
  std::snprintf(buf, sizeof buf, "%g", sigma_pseudo);
  m.flags["sigma-pseudo"] = buf;
  write_manifest(c.out, m);
  for (const auto& w : set.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << set.items.size() << " measurements written\n";
  return 0;
}

// ---------------------------------------------------------------- estimate

int cmd_estimate(const Common& c, const std::string& placement_path,
                 const std::string& measurements_path, bool parallel, bool monolithic,
                 int workers) {
  if (parallel && monolithic)
    throw Error(Errc::usage, "choose one of --parallel or --monolithic");
  auto merged = load_merged(c.feeder);
  auto loaded = read_placement_json(placement_path);
  auto set = se::read_measurements_csv(measurements_path);

  se::EstimationOptions opts;
  se::EstimationResult result;
  std::string mode;
  if (parallel) {
    auto partition = pmu::partition_zones(merged, loaded.placement);
    result = se::estimate_parallel(merged, partition, set, opts, workers);
    mode = "parallel";
  } else {
    result = se::wls_gauss_newton(merged, set, opts);
    mode = "monolithic";
  }

  auto truth = solve_truth(merged, c);
  auto report = se::error_report(result, truth);

  ensure_out_dir(c.out);
  write_phasor_csv(c.out + "/estimate.csv", merged, result.voltages);
  write_estimate_report_json(c.out + "/report.json", result, report, mode);
  Manifest m = base_manifest("estimate", c);
  m.flags["placement"] = placement_path;
  m.flags["measurements"] = measurements_path;
  m.flags["mode"] = mode;
  m.flags["workers"] = std::to_string(workers);
  manifest_add_input(m, placement_path);
  manifest_add_input(m, measurements_path);
  write_manifest(c.out, m);
  std::cout << mode << " estimate: chi_square " << result.chi_square << " over "
            << result.degrees_of_freedom << " dof; max error " << report.max_pct_mag_error
            << "%\n";
  return 0;
}

// ---------------------------------------------------------------- upfc-sim

int cmd_upfc_sim(const Common& c, const std::string& scenario_path) {
  std::ifstream in(scenario_path, std::ios::binary);
  if (!in) throw Error(Errc::missing_input, "missing scenario file: " + scenario_path);
  json sc;
  try {
    in >> sc;
  } catch (const std::exception& e) {
    throw Error(Errc::unparseable_cell, scenario_path + ": " + e.what());
  }

  const double f0 = sc.value("fundamental_hz", 60.0);
  const int spc = sc.value("samples_per_cycle", 64);
  const int cycles = sc.value("cycles", 4);
  const double omega = 2.0 * kPi * f0;
  const double dt = 1.0 / (f0 * spc);
  std::vector<double> times(std::size_t(spc) * cycles);
  for (std::size_t i = 0; i < times.size(); ++i) times[i] = double(i) * dt;

  auto pollute = [&](const upfc::ThreePhaseWave& ref, const json& spec, double peak) {
    upfc::ThreePhaseWave actual = ref;
    const double fscale = spec.value("fundamental_scale", 1.0);
    for (int p = 0; p < 3; ++p)
      for (auto& v : actual.samples[p]) v *= fscale;
    if (spec.contains("harmonics"))
      for (const auto& h : spec["harmonics"]) {
        const int order = h.at("order").get<int>();
        const double amp = h.at("amplitude_rel").get<double>() * peak;
        const double shift[3] = {0.0, -2.0 * kPi / 3.0, 2.0 * kPi / 3.0};
        for (int p = 0; p < 3; ++p)
          for (std::size_t i = 0; i < actual.times.size(); ++i)
            actual.samples[p][i] += amp * std::sin(order * (omega * actual.times[i] + shift[p]));
      }
    return actual;
  };

  const json& series_spec = sc.at("series");
  const json& shunt_spec = sc.at("shunt");
  const double v_lm = series_spec.at("v_lm").get<double>();
  const double i_1 = shunt_spec.at("i_1").get<double>();

  auto v_ref = upfc::series_reference(v_lm, omega, times);
  auto i_ref = upfc::shunt_reference(i_1, omega, times);
  auto v_act = pollute(v_ref, series_spec, v_lm);
  auto i_act = pollute(i_ref, shunt_spec, i_1);
  auto v_comp = upfc::series_compensation(v_ref, v_act);
  auto i_comp = upfc::shunt_compensation(i_ref, i_act);

  upfc::HysteresisBand v_band{sc.value("band_half_width_rel", 0.05) * v_lm};
  upfc::HysteresisBand i_band{sc.value("band_half_width_rel", 0.05) * i_1};
  std::array<std::vector<int>, 3> v_pulse, i_pulse;
  for (int p = 0; p < 3; ++p) {
    v_pulse[p] = upfc::hysteresis_pulses(v_comp.samples[p], v_band);
    i_pulse[p] = upfc::hysteresis_pulses(i_comp.samples[p], i_band);
  }

  upfc::UpfcPowerBalance bal;
  bool symmetric = false;
  if (sc.contains("balance")) {
    const json& b = sc["balance"];
    bal.v_s = b.value("v_s", 0.0);
    bal.i_s = b.value("i_s", 0.0);
    bal.v_l = b.value("v_l", 0.0);
    bal.i_l = b.value("i_l", 0.0);
    bal.v_sr = b.value("v_sr", 0.0);
    bal.i_sh = b.value("i_sh", 0.0);
    bal.phi_sr_deg = b.value("phi_sr_deg", 0.0);
    bal.phi_sh_deg = b.value("phi_sh_deg", 0.0);
    bal.phi_l_deg = b.value("phi_l_deg", 0.0);
    symmetric = b.value("symmetric_shunt", false);
    if (bal.i_sh == 0.0 && (bal.i_l != 0.0 || bal.i_s != 0.0)) {
      auto [mag, ang] = upfc::shunt_current_from_load(bal.i_l, bal.phi_l_deg, bal.i_s);
      bal.i_sh = mag;
      bal.phi_sh_deg = b.contains("phi_sh_deg") ? bal.phi_sh_deg : ang;
    }
  }
  bal = upfc::power_balance(bal, symmetric);

  const double fs = f0 * spc;
  auto thd3 = [&](const upfc::ThreePhaseWave& w) {
    json arr = json::array();
    for (int p = 0; p < 3; ++p) arr.push_back(upfc::thd_percent(w.samples[p], f0, fs));
    return arr;
  };
  upfc::ThreePhaseWave v_corr = v_act, i_corr = i_act;
  for (int p = 0; p < 3; ++p)
    for (std::size_t i = 0; i < times.size(); ++i) {
      v_corr.samples[p][i] += v_comp.samples[p][i];
      i_corr.samples[p][i] += i_comp.samples[p][i];
    }

  ensure_out_dir(c.out);
  {
    std::ofstream out(c.out + "/waveforms.csv", std::ios::binary);
    out << "# manifest: " << kManifestName << "\n";
    out << "t,v_ref_a,v_ref_b,v_ref_c,v_act_a,v_act_b,v_act_c,"
           "v_comp_a,v_comp_b,v_comp_c,v_pulse_a,v_pulse_b,v_pulse_c,"
           "i_ref_a,i_ref_b,i_ref_c,i_act_a,i_act_b,i_act_c,"
           "i_comp_a,i_comp_b,i_comp_c,i_pulse_a,i_pulse_b,i_pulse_c\n";
    char buf[64];
    for (std::size_t i = 0; i < times.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.9g", times[i]);
      out << buf;
      auto emit = [&](double v) {
        std::snprintf(buf, sizeof buf, ",%.9g", v);
        out << buf;
      };
      for (int p = 0; p < 3; ++p) emit(v_ref.samples[p][i]);
      for (int p = 0; p < 3; ++p) emit(v_act.samples[p][i]);
      for (int p = 0; p < 3; ++p) emit(v_comp.samples[p][i]);
      for (int p = 0; p < 3; ++p) out << ',' << v_pulse[p][i];
      for (int p = 0; p < 3; ++p) emit(i_ref.samples[p][i]);
      for (int p = 0; p < 3; ++p) emit(i_act.samples[p][i]);
      for (int p = 0; p < 3; ++p) emit(i_comp.samples[p][i]);
      for (int p = 0; p < 3; ++p) out << ',' << i_pulse[p][i];
      out << "\n";
    }
  }
  {
    json out_json;
    out_json["manifest"] = kManifestName;
    out_json["fundamental_hz"] = f0;
    out_json["sample_rate_hz"] = fs;
    out_json["balance"] = {{"p_s", bal.p_s},   {"q_s", bal.q_s},   {"p_sr", bal.p_sr},
                           {"q_sr", bal.q_sr}, {"p_sh", bal.p_sh}, {"q_sh", bal.q_sh},
                           {"p_l", bal.p_l},   {"q_l", bal.q_l}};
    out_json["inputs"] = {{"v_s", bal.v_s},
                          {"i_s", bal.i_s},
                          {"v_l", bal.v_l},
                          {"i_l", bal.i_l},
                          {"v_sr", bal.v_sr},
                          {"i_sh", bal.i_sh},
                          {"phi_sr_deg", bal.phi_sr_deg},
                          {"phi_sh_deg", bal.phi_sh_deg},
                          {"phi_l_deg", bal.phi_l_deg},
                          {"symmetric_shunt", symmetric}};
    if (sc.contains("parameters")) {
      const json& pj = sc["parameters"];
      upfc::UpfcParameters params;
      params.c_sh_farad = pj.value("c_sh_farad", 0.0);
      params.c_l_farad = pj.value("c_l_farad", 0.0);
      params.v_dc_ref = pj.value("v_dc_ref", 0.0);
      params.v_dc = pj.value("v_dc", 0.0);
      upfc::validate_parameters(params);
      out_json["parameters"] = sc["parameters"];
    }
    out_json["thd_pct"] = {{"series_actual", thd3(v_act)},
                           {"series_corrected", thd3(v_corr)},
                           {"shunt_actual", thd3(i_act)},
                           {"shunt_corrected", thd3(i_corr)}};
    std::ofstream out(c.out + "/balance.json", std::ios::binary);
    out << out_json.dump(2) << "\n";
  }
  Manifest m = base_manifest("upfc-sim", c);
  m.flags["scenario"] = scenario_path;
  manifest_add_input(m, scenario_path);
  write_manifest(c.out, m);
  std::cout << "waveforms and balance written\n";
  return 0;
}

// --------------------------------------------------------------- anfis-train

int cmd_anfis_train(const Common& c, const std::string& data_path, int epochs, double learn_rate,
                    int mfs, bool paired) {
  std::ifstream in(data_path, std::ios::binary);
  if (!in) throw Error(Errc::missing_input, "missing training file: " + data_path);
  anfis::TrainingSet data;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "x,y,target")
        throw Error(Errc::bad_header, data_path + ": expected header 'x,y,target'");
      header_seen = true;
      continue;
    }
    anfis::TrainingRow row;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &row.x, &row.y, &row.target) != 3)
      throw Error(Errc::unparseable_cell, data_path + ": bad row '" + line + "'");
    data.push_back(row);
  }
  if (data.empty()) throw Error(Errc::unparseable_cell, data_path + ": no rows");

  double x_lo = data[0].x, x_hi = data[0].x, y_lo = data[0].y, y_hi = data[0].y;
  for (const auto& r : data) {
    x_lo = std::min(x_lo, r.x);
    x_hi = std::max(x_hi, r.x);
    y_lo = std::min(y_lo, r.y);
    y_hi = std::max(y_hi, r.y);
  }
  auto model = paired ? anfis::AnfisModel::paired(mfs, x_lo, x_hi, y_lo, y_hi)
                      : anfis::AnfisModel::grid(mfs, x_lo, x_hi, y_lo, y_hi);
  auto report = anfis::train_hybrid(model, data, epochs, learn_rate);

  ensure_out_dir(c.out);
  {
    json j;
    j["manifest"] = kManifestName;
    j["wiring"] = paired ? "paired" : "grid";
    auto mf_json = [](const std::vector<anfis::MembershipFunction>& mfs_in) {
      json arr = json::array();
      for (const auto& f : mfs_in) arr.push_back({{"a", f.a}, {"b", f.b}, {"c", f.c}});
      return arr;
    };
    j["x_range"] = {x_lo, x_hi};
    j["y_range"] = {y_lo, y_hi};
    j["premise_x"] = mf_json(model.premise_x);
    j["premise_y"] = mf_json(model.premise_y);
    j["rules"] = json::array();
    for (const auto& r : model.rules)
      j["rules"].push_back(
          {{"mf_x", r.mf_x}, {"mf_y", r.mf_y}, {"p", r.p}, {"q", r.q}, {"r", r.r}});
    j["initial_rmse"] = report.initial_rmse;
    j["final_rmse"] =
        report.rmse_per_epoch.empty() ? report.initial_rmse : report.rmse_per_epoch.back();
    j["converged"] = report.converged;
    std::ofstream out(c.out + "/model.json", std::ios::binary);
    out << j.dump(2) << "\n";
  }
  {
    std::ofstream out(c.out + "/rmse.csv", std::ios::binary);
    out << "# manifest: " << kManifestName << "\n";
    out << "epoch,rmse\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "0,%.12g\n", report.initial_rmse);
    out << buf;
    for (std::size_t e = 0; e < report.rmse_per_epoch.size(); ++e) {
      std::snprintf(buf, sizeof buf, "%zu,%.12g\n", e + 1, report.rmse_per_epoch[e]);
      out << buf;
    }
  }
  Manifest m = base_manifest("anfis-train", c);
  m.flags["data"] = data_path;
  m.flags["epochs"] = std::to_string(epochs);
  m.flags["mfs"] = std::to_string(mfs);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", learn_rate);
  m.flags["learn-rate"] = buf;
  if (paired) m.flags["paired"] = "true";
  manifest_add_input(m, data_path);
  write_manifest(c.out, m);
  std::cout << "trained: rmse "
            << (report.rmse_per_epoch.empty() ? report.initial_rmse : report.rmse_per_epoch.back())
            << " after " << report.rmse_per_epoch.size() << " epoch(s)\n";
  return 0;
}

// ------------------------------------------------------------------- report

int cmd_report(Common c, const std::string& run_dir) {
  if (c.out == "out") c.out = run_dir + "/report";
  bool any = false;
  json j;
  j["manifest"] = kManifestName;

  std::vector<PhasorRow> solution, estimate;
  if (fs::exists(run_dir + "/solution.csv")) {
    solution = read_phasor_csv(run_dir + "/solution.csv");
    any = true;
  }
  if (fs::exists(run_dir + "/estimate.csv")) {
    estimate = read_phasor_csv(run_dir + "/estimate.csv");
    any = true;
  }

  ensure_out_dir(c.out);

  auto key = [](const PhasorRow& r) { return std::make_pair(r.bus, r.phase); };
  std::map<std::pair<int, int>, PhasorRow> est_by_key;
  for (const auto& r : estimate) est_by_key[key(r)] = r;

  if (!solution.empty()) {
    json buses = json::array();
    std::vector<double> errors;
    for (const auto& r : solution) {
      json row;
      row["bus"] = r.bus;
      row["phase"] = std::string(1, phase_letter(r.phase));
      row["voltage_pct"] = 100.0 * r.mag_pu;
      row["drop_pct"] = 100.0 * (1.0 - r.mag_pu);
      auto it = est_by_key.find(key(r));
      if (it != est_by_key.end()) {
        double err = 100.0 * std::abs(it->second.mag_pu - r.mag_pu) / r.mag_pu;
        row["est_error_pct"] = err;
        errors.push_back(err);
      }
      buses.push_back(row);
    }
    j["buses"] = buses;
    if (!errors.empty())
      write_histogram_svg(c.out + "/error_hist.svg", "estimation error", "percent error", errors,
                          20);
  }

  // Voltage profile against feeder distance when the dataset is at hand.
  if (!solution.empty() && !c.feeder.empty()) {
    auto merged = load_merged(c.feeder);
    std::map<int, double> dist;
    int slack = merged.canonical(merged.general().slack_bus);
    dist[slack] = 0.0;
    std::vector<int> stack{slack};
    while (!stack.empty()) {
      int n = stack.back();
      stack.pop_back();
      for (int si : merged.incident_segments(n)) {
        const auto& seg = merged.segments()[si];
        int o = merged.canonical(seg.from_bus) == n ? merged.canonical(seg.to_bus)
                                                    : merged.canonical(seg.from_bus);
        if (dist.count(o)) continue;
        dist[o] = dist[n] + seg.length_ft;
        stack.push_back(o);
      }
    }
    std::vector<XySeries> series(3);
    const char* colors[3] = {"#c03028", "#287850", "#3858a8"};
    for (int p = 0; p < 3; ++p) {
      series[p].label = std::string("phase ") + phase_letter(p);
      series[p].color = colors[p];
    }
    for (const auto& r : solution) {
      int canon = merged.canonical(r.bus);
      if (dist.count(canon)) series[r.phase].points.push_back({dist[canon], r.mag_pu});
    }
    write_xy_svg(c.out + "/voltage_profile.svg", "voltage profile", "distance from source (ft)",
                 "voltage (pu)", series);
  }

  if (fs::exists(run_dir + "/balance.json")) {
    std::ifstream in(run_dir + "/balance.json", std::ios::binary);
    json balance;
    in >> balance;
    if (balance.contains("thd_pct")) j["thd_pct"] = balance["thd_pct"];
    any = true;
  }

  if (fs::exists(run_dir + "/rmse.csv")) {
    std::ifstream in(run_dir + "/rmse.csv", std::ios::binary);
    std::string line;
    XySeries curve;
    curve.label = "rmse";
    curve.color = "#3858a8";
    curve.line = true;
    json rmse = json::array();
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line[0] == 'e') continue;
      double epoch = 0, value = 0;
      if (std::sscanf(line.c_str(), "%lf,%lf", &epoch, &value) == 2) {
        curve.points.push_back({epoch, value});
        rmse.push_back(value);
      }
    }
    if (!curve.points.empty()) {
      write_xy_svg(c.out + "/rmse.svg", "training error", "epoch", "rmse", {curve});
      j["anfis_rmse"] = rmse;
      any = true;
    }
  }

  if (!any)
    throw Error(Errc::empty_run_directory, "no artifacts found under " + run_dir);

  {
    std::ofstream out(c.out + "/report.json", std::ios::binary);
    out << j.dump(2) << "\n";
  }
  Manifest m = base_manifest("report", c);
  m.flags["run"] = run_dir;
  write_manifest(c.out, m);
  std::cout << "report written to " << c.out << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"unbalanced distribution feeder toolkit: power flow, PMU placement, "
               "zone-parallel state estimation, waveform compensation, neuro-fuzzy training"};
  app.require_subcommand(1);

  Common common;

  auto* validate = app.add_subcommand("validate", "parse and check a feeder dataset");
  add_common(validate, common, true);

  auto* powerflow = app.add_subcommand("powerflow", "solve the feeder power flow");
  add_common(powerflow, common, true);

  auto* place = app.add_subcommand("place-pmu", "choose PMU buses and zones");
  add_common(place, common, true);
  std::string channels_text = "inf";
  int max_zone_size = 0;
  bool oracle = false;
  place->add_option("--channels", channels_text, "branch-current channels per PMU, or 'inf'");
  place->add_option("--max-zone-size", max_zone_size, "largest allowed zone (0: unbounded)");
  place->add_flag("--oracle", oracle, "exhaustive search (guarded to 20 buses)");

  auto* simulate = app.add_subcommand("simulate-measurements", "synthesize noisy measurements");
  add_common(simulate, common, true);
  std::string placement_path;
  double sigma_v = 0.001, sigma_i = 0.002, sigma_pseudo = 0.10;
  simulate->add_option("--placement", placement_path, "placement.json from place-pmu")
      ->required();
  simulate->add_option("--sigma-v", sigma_v, "PMU voltage sigma (pu)");
  simulate->add_option("--sigma-i", sigma_i, "PMU current sigma (pu)");
  simulate->add_option("--sigma-pseudo", sigma_pseudo, "pseudo-injection sigma (relative)");

  auto* estimate = app.add_subcommand("estimate", "weighted least squares state estimate");
  add_common(estimate, common, true);
  std::string est_placement, est_measurements;
  bool parallel = false, monolithic = false;
  int workers = 0;
  estimate->add_option("--placement", est_placement, "placement.json from place-pmu")->required();
  estimate->add_option("--measurements", est_measurements, "measurements.csv")->required();
  estimate->add_flag("--parallel", parallel, "zone-parallel solve");
  estimate->add_flag("--monolithic", monolithic, "whole-network solve (default)");
  estimate->add_option("--workers", workers, "thread count for --parallel (0: hardware)");

  auto* upfc_sim = app.add_subcommand("upfc-sim", "waveform compensation and power balance");
  add_common(upfc_sim, common, false);
  std::string scenario_path;
  upfc_sim->add_option("--scenario", scenario_path, "scenario JSON")->required();

  auto* anfis_train = app.add_subcommand("anfis-train", "train the neuro-fuzzy estimator");
  add_common(anfis_train, common, false);
  std::string data_path;
  int epochs = 50, mfs = 2;
  double learn_rate = 0.01;
  bool paired = false;
  anfis_train->add_option("--data", data_path, "training CSV with header x,y,target")->required();
  anfis_train->add_option("--epochs", epochs, "training epochs");
  anfis_train->add_option("--learn-rate", learn_rate, "premise gradient step");
  anfis_train->add_option("--mfs", mfs, "membership functions per input");
  anfis_train->add_flag("--paired", paired, "pair rule wiring instead of grid partition");

  auto* report = app.add_subcommand("report", "summarize a run directory");
  add_common(report, common, false);
  std::string run_dir;
  report->add_option("--run", run_dir, "directory holding run artifacts")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (app.got_subcommand(validate)) return cmd_validate(common);
    if (app.got_subcommand(powerflow)) return cmd_powerflow(common);
    if (app.got_subcommand(place))
      return cmd_place_pmu(common, channels_text, max_zone_size, oracle);
    if (app.got_subcommand(simulate))
      return cmd_simulate(common, placement_path, sigma_v, sigma_i, sigma_pseudo);
    if (app.got_subcommand(estimate))
      return cmd_estimate(common, est_placement, est_measurements, parallel, monolithic, workers);
    if (app.got_subcommand(upfc_sim)) return cmd_upfc_sim(common, scenario_path);
    if (app.got_subcommand(anfis_train))
      return cmd_anfis_train(common, data_path, epochs, learn_rate, mfs, paired);
    if (app.got_subcommand(report)) return cmd_report(common, run_dir);
    std::cerr << "error: no subcommand\n" << app.help();
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_usage() ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("gridest");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace gridest::cli
