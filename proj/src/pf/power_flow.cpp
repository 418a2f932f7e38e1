#include "gridest/pf/power_flow.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace gridest::pf {

using model::BranchAdmittance;
using model::FeederModel;
using model::GeneralData;
using model::LineSegment;
using model::SpotLoad;
using model::ZipKind;

namespace {

using Vec3c = Eigen::Vector3cd;

Vec3c to_vec(const std::array<cd, 3>& a) { return Vec3c(a[0], a[1], a[2]); }
std::array<cd, 3> to_arr(const Vec3c& v) { return {v(0), v(1), v(2)}; }

// Inverse of the series impedance restricted to the present phases.
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

struct Tree {
  std::vector<int> order;                     // canonical buses, slack first, BFS
  std::map<int, int> parent_bus;              // bus -> parent canonical id
  std::map<int, int> parent_segment;          // bus -> segment index
  std::vector<BranchAdmittance> admittance;   // per segment index
  std::map<int, Eigen::Matrix3cd> bus_shunt;  // sum of half-shunts hanging at a bus
  std::map<int, std::vector<const SpotLoad*>> bus_loads;
};

Tree build_tree(const FeederModel& m) {
  Tree t;
  int slack = m.canonical(m.general().slack_bus);
  const auto& buses = m.merged_buses();
  if (std::find(buses.begin(), buses.end(), slack) == buses.end())
    throw Error(Errc::missing_slack, "slack bus " + std::to_string(m.general().slack_bus) +
                                         " does not appear in the network");

  t.admittance.reserve(m.segments().size());
  for (const auto& seg : m.segments()) t.admittance.push_back(model::segment_admittance(m, seg));

  for (int b : buses) t.bus_shunt[b] = Eigen::Matrix3cd::Zero();
  for (std::size_t i = 0; i < m.segments().size(); ++i) {
    const auto& seg = m.segments()[i];
    t.bus_shunt[m.canonical(seg.from_bus)] += t.admittance[i].y_shunt_half;
    t.bus_shunt[m.canonical(seg.to_bus)] += t.admittance[i].y_shunt_half;
  }

  for (const auto& l : m.loads()) t.bus_loads[m.canonical(l.bus)].push_back(&l);

  std::map<int, bool> visited;
  t.order.push_back(slack);
  visited[slack] = true;
  for (std::size_t head = 0; head < t.order.size(); ++head) {
    int n = t.order[head];
    for (int si : m.incident_segments(n)) {
      const auto& seg = m.segments()[si];
      int a = m.canonical(seg.from_bus), b = m.canonical(seg.to_bus);
      int other = (a == n) ? b : a;
      if (other == n)
        throw Error(Errc::not_radial, "segment " + std::to_string(seg.from_bus) + "-" +
                                          std::to_string(seg.to_bus) +
                                          " collapses to a self-loop");
      if (visited.count(other)) {
        if (t.parent_segment.count(n) && t.parent_segment[n] == si) continue;
        if (t.parent_segment.count(other) && t.parent_segment[other] == si) continue;
        throw Error(Errc::not_radial, "segment " + std::to_string(seg.from_bus) + "-" +
                                          std::to_string(seg.to_bus) + " closes a loop");
      }
      visited[other] = true;
      t.parent_bus[other] = n;
      t.parent_segment[other] = si;
      t.order.push_back(other);
    }
  }
  if (t.order.size() != buses.size())
    throw Error(Errc::not_radial,
                std::to_string(buses.size() - t.order.size()) + " bus(es) unreachable from slack");
  return t;
}

cd leg_current(ZipKind kind, double p_w, double q_var, cd v, double v_nom) {
  if (p_w == 0.0 && q_var == 0.0) return cd(0, 0);
  if (std::abs(v) < 1e-9)
    throw Error(Errc::zero_voltage_at_load, "zero voltage at a loaded phase");
  const cd s(p_w, q_var);
  switch (kind) {
    case ZipKind::ConstantPQ:
      return std::conj(s / v);
    case ZipKind::ConstantCurrent: {
      // Magnitude frozen at the nominal-voltage draw; angle tracks the applied
      // voltage minus the rated power-factor angle.
      const double mag = std::abs(s) / v_nom;
      const double ang = std::arg(v) - std::arg(s);
      return std::polar(mag, ang);
    }
    case ZipKind::ConstantImpedance: {
      const cd z = v_nom * v_nom / std::conj(s);
      return v / z;
    }
  }
  return cd(0, 0);
}

}  // namespace

std::array<cd, 3> load_current(const SpotLoad& load, const std::array<cd, 3>& v,
                               const GeneralData& general) {
  std::array<cd, 3> out{cd(0, 0), cd(0, 0), cd(0, 0)};
  if (load.wye) {
    const double v_nom = general.v_base_ln();
    for (int p = 0; p < 3; ++p)
      out[p] = leg_current(load.zip_kind, load.p_kw[p] * 1e3, load.q_kvar[p] * 1e3, v[p], v_nom);
    return out;
  }
  // Delta: entry p is the leg from phase p to phase p+1; line currents are leg
  // differences.
  const double v_nom_ll = general.v_nom_kv * 1e3;
  std::array<cd, 3> leg{cd(0, 0), cd(0, 0), cd(0, 0)};
  for (int p = 0; p < 3; ++p) {
    cd v_leg = v[p] - v[(p + 1) % 3];
    leg[p] = leg_current(load.zip_kind, load.p_kw[p] * 1e3, load.q_kvar[p] * 1e3, v_leg, v_nom_ll);
  }
  for (int p = 0; p < 3; ++p) out[p] = leg[p] - leg[(p + 2) % 3];
  return out;
}

PowerFlowSolution solve_power_flow(const FeederModel& model_in, const SweepOptions& opts) {
  if (opts.tolerance_pu <= 0.0 || opts.max_iterations < 1)
    throw Error(Errc::usage, "sweep options need positive tolerance and at least one iteration");

  const FeederModel merged = model_in.merged() ? model_in : model::merge_switches(model_in);
  const FeederModel& m = merged;
  const GeneralData& gen = m.general();
  const double v_base = gen.v_base_ln();
  const int slack = m.canonical(gen.slack_bus);

  Tree tree = build_tree(m);

  std::map<int, Vec3c> v;
  Vec3c v_slack(gen.slack_voltage(0), gen.slack_voltage(1), gen.slack_voltage(2));
  for (int b : tree.order) {
    PhaseSet ph = m.bus_phases(b);
    Vec3c init = Vec3c::Zero();
    for (int p = 0; p < 3; ++p)
      if (ph.has(p)) {
        if (!opts.flat_start && opts.initial && opts.initial->has(b, p))
          init(p) = opts.initial->voltage(b, p);
        else
          init(p) = v_slack(p);
      }
    v[b] = init;
  }
  v[slack] = v_slack;

  std::map<int, Vec3c> series;  // per bus: current through its parent segment
  PowerFlowSolution sol;

  std::map<int, std::array<double, 3>> taps;
  for (const auto& [bus, si] : tree.parent_segment) taps[bus] = m.segment_tap(m.segments()[si]);

  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    // Backward: accumulate load, shunt and child currents from the leaves.
    std::map<int, Vec3c> acc;
    for (int b : tree.order) acc[b] = Vec3c::Zero();
    for (auto it = tree.order.rbegin(); it != tree.order.rend(); ++it) {
      int b = *it;
      Vec3c local = tree.bus_shunt[b] * v[b];
      for (const SpotLoad* l : tree.bus_loads[b]) {
        auto i_load = load_current(*l, to_arr(v[b]), gen);
        local += to_vec(i_load);
      }
      acc[b] += local;
      if (b == slack) continue;
      series[b] = acc[b];
      const auto& tp = taps[b];
      Vec3c up = acc[b];
      for (int p = 0; p < 3; ++p) up(p) *= tp[p];
      acc[tree.parent_bus[b]] += up;
    }

    // Forward: push voltages from the slack.
    double mismatch = 0.0;
    for (int b : tree.order) {
      if (b == slack) continue;
      const auto& adm = tree.admittance[tree.parent_segment[b]];
      Vec3c v_new = v[tree.parent_bus[b]] - adm.z_series * series[b];
      const auto& tp = taps[b];
      PhaseSet ph = m.bus_phases(b);
      for (int p = 0; p < 3; ++p) {
        if (!ph.has(p)) {
          v_new(p) = cd(0, 0);
          continue;
        }
        v_new(p) *= tp[p];
        mismatch = std::max(mismatch, std::abs(v_new(p) - v[b](p)) / v_base);
      }
      v[b] = v_new;
    }

    sol.iterations = iter;
    sol.max_mismatch_pu = mismatch;
    sol.mismatch_history.push_back(mismatch);
    if (mismatch <= opts.tolerance_pu) {
      sol.converged = true;
      break;
    }
  }

  sol.voltages.v_base_ln = v_base;
  for (int b : tree.order) {
    PhasorSet::Entry e;
    e.v = to_arr(v[b]);
    e.phases = m.bus_phases(b);
    sol.voltages.buses[b] = e;
  }

  // Summary power terms from the final state.
  cd s_source(0, 0), s_load(0, 0), s_loss(0, 0), s_shunt(0, 0);
  Vec3c slack_out = tree.bus_shunt[slack] * v[slack];
  for (int b : tree.order) {
    if (b != slack) {
      const auto& adm = tree.admittance[tree.parent_segment[b]];
      Vec3c drop = adm.z_series * series[b];
      for (int p = 0; p < 3; ++p) s_loss += drop(p) * std::conj(series[b](p));
      if (tree.parent_bus[b] == slack) {
        const auto& tp = taps[b];
        for (int p = 0; p < 3; ++p) slack_out(p) += tp[p] * series[b](p);
      }
    }
    Vec3c i_sh = tree.bus_shunt[b] * v[b];
    for (int p = 0; p < 3; ++p) s_shunt += v[b](p) * std::conj(i_sh(p));
    for (const SpotLoad* l : tree.bus_loads[b]) {
      auto i_load = load_current(*l, to_arr(v[b]), gen);
      for (int p = 0; p < 3; ++p) s_load += v[b](p) * std::conj(i_load[p]);
    }
  }
  for (int p = 0; p < 3; ++p) s_source += v[slack](p) * std::conj(slack_out(p));

  sol.total_source_kw = s_source.real() / 1e3;
  sol.total_source_kvar = s_source.imag() / 1e3;
  sol.total_load_kw = s_load.real() / 1e3;
  sol.total_load_kvar = s_load.imag() / 1e3;
  sol.total_loss_kw = s_loss.real() / 1e3;
  sol.total_loss_kvar = s_loss.imag() / 1e3;
  sol.total_shunt_kw = s_shunt.real() / 1e3;
  sol.total_shunt_kvar = s_shunt.imag() / 1e3;
  return sol;
}

double kcl_residual(const FeederModel& model_in, const PowerFlowSolution& solution) {
  const FeederModel merged = model_in.merged() ? model_in : model::merge_switches(model_in);
  const FeederModel& m = merged;
  const double i_base = kSBaseVA / (3.0 * m.general().v_base_ln());
  const int slack = m.canonical(m.general().slack_bus);

  std::vector<BranchAdmittance> adm;
  std::vector<Eigen::Matrix3cd> y_series;
  adm.reserve(m.segments().size());
  for (const auto& seg : m.segments()) {
    adm.push_back(model::segment_admittance(m, seg));
    y_series.push_back(masked_inverse(adm.back().z_series, adm.back().phases));
  }

  auto volt = [&](int bus) {
    Vec3c out = Vec3c::Zero();
    auto it = solution.voltages.buses.find(bus);
    if (it != solution.voltages.buses.end())
      for (int p = 0; p < 3; ++p) out(p) = it->second.v[p];
    return out;
  };

  std::map<int, std::vector<const SpotLoad*>> bus_loads;
  for (const auto& l : m.loads()) bus_loads[m.canonical(l.bus)].push_back(&l);

  double worst = 0.0;
  for (int b : m.merged_buses()) {
    if (b == slack) continue;
    Vec3c sum = Vec3c::Zero();
    for (int si : m.incident_segments(b)) {
      const auto& seg = m.segments()[si];
      int from = m.canonical(seg.from_bus), to = m.canonical(seg.to_bus);
      const auto tp = m.segment_tap(seg);
      // Ideal tap at the Node-B end: series current is Z^-1 (V_from - V_to/t),
      // and the Node-A side carries t times it.
      Vec3c v_to_ref = volt(to);
      for (int p = 0; p < 3; ++p) v_to_ref(p) /= tp[p];
      Vec3c i_series = y_series[si] * (volt(from) - v_to_ref);
      if (b == to) {
        sum += i_series - adm[si].y_shunt_half * volt(b);
      } else {
        for (int p = 0; p < 3; ++p) sum(p) -= tp[p] * i_series(p);
        sum -= adm[si].y_shunt_half * volt(b);
      }
    }
    auto it = bus_loads.find(b);
    if (it != bus_loads.end())
      for (const SpotLoad* l : it->second) {
        auto i_load = load_current(*l, to_arr(volt(b)), m.general());
        sum -= to_vec(i_load);
      }
    PhaseSet ph = m.bus_phases(b);
    for (int p = 0; p < 3; ++p)
      if (ph.has(p)) worst = std::max(worst, std::abs(sum(p)) / i_base);
  }
  return worst;
}

}  // namespace gridest::pf
