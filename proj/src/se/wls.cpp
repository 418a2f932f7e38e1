#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <random>

#include "se_internal.hpp"

namespace gridest::se {

namespace detail {

GnOutcome gauss_newton(const std::vector<Row>& rows, int n_complex, const Eigen::VectorXd& x0,
                       const EstimationOptions& options, const std::string& label) {
  const int n = 2 * n_complex;
  const int m = 2 * static_cast<int>(rows.size());
  if (m < n)
    throw Error(Errc::rank_deficient,
                label + ": " + std::to_string(m) + " measurement scalars cannot pin " +
                    std::to_string(n) + " state scalars");

  Eigen::VectorXd x = x0;
  GnOutcome out;
  double prev_step = std::numeric_limits<double>::infinity();
  int growing = 0;

  std::vector<Eigen::Triplet<double>> trips;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    trips.clear();
    Eigen::VectorXd r(m);

    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Row& row = rows[i];
      const int r1 = 2 * static_cast<int>(i), r2 = r1 + 1;
      auto v_of = [&](int cidx) { return cd(x(2 * cidx), x(2 * cidx + 1)); };

      if (!row.injection) {
        cd h = row.constant;
        for (const auto& [k, c] : row.terms) h += c * v_of(k);
        r(r1) = row.w1 * (row.z1 - h.real());
        r(r2) = row.w2 * (row.z2 - h.imag());
        for (const auto& [k, c] : row.terms) {
          trips.emplace_back(r1, 2 * k, row.w1 * c.real());
          trips.emplace_back(r1, 2 * k + 1, row.w1 * -c.imag());
          trips.emplace_back(r2, 2 * k, row.w2 * c.imag());
          trips.emplace_back(r2, 2 * k + 1, row.w2 * c.real());
        }
        continue;
      }

      // S = V * conj(I), I = sum(c_k V_k) + const.
      cd v = v_of(row.own);
      cd cur = row.constant;
      for (const auto& [k, c] : row.terms) cur += c * v_of(k);
      const double vr = v.real(), vi = v.imag();
      const double ir = cur.real(), ii = cur.imag();
      r(r1) = row.w1 * (row.z1 - (vr * ir + vi * ii));
      r(r2) = row.w2 * (row.z2 - (vi * ir - vr * ii));

      // Direct dependence through V.
      trips.emplace_back(r1, 2 * row.own, row.w1 * ir);
      trips.emplace_back(r1, 2 * row.own + 1, row.w1 * ii);
      trips.emplace_back(r2, 2 * row.own, row.w2 * -ii);
      trips.emplace_back(r2, 2 * row.own + 1, row.w2 * ir);
      // Dependence through I.
      for (const auto& [k, c] : row.terms) {
        const double cr = c.real(), ci = c.imag();
        trips.emplace_back(r1, 2 * k, row.w1 * (vr * cr + vi * ci));
        trips.emplace_back(r1, 2 * k + 1, row.w1 * (-vr * ci + vi * cr));
        trips.emplace_back(r2, 2 * k, row.w2 * (vi * cr - vr * ci));
        trips.emplace_back(r2, 2 * k + 1, row.w2 * (-vi * ci - vr * cr));
      }
    }

    Eigen::SparseMatrix<double> jac(m, n);
    jac.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseMatrix<double> normal = Eigen::SparseMatrix<double>(jac.transpose()) * jac;
    Eigen::VectorXd rhs = jac.transpose() * r;

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(normal);
    if (ldlt.info() != Eigen::Success)
      throw Error(Errc::rank_deficient, label + ": normal equations are not positive definite");
    {
      const auto& d = ldlt.vectorD();
      double dmax = d.cwiseAbs().maxCoeff();
      double dmin = d.cwiseAbs().minCoeff();
      if (!(dmax > 0.0) || dmin <= 1e-12 * dmax)
        throw Error(Errc::rank_deficient,
                    label + ": rank-deficient system (pivot ratio " +
                        std::to_string(dmax > 0 ? dmin / dmax : 0.0) + ")");
    }
    Eigen::VectorXd dx = ldlt.solve(rhs);
    if (!dx.allFinite()) throw Error(Errc::rank_deficient, label + ": non-finite update");
    x += dx;

    const double step = dx.lpNorm<Eigen::Infinity>();
    out.iterations = iter;
    if (step <= options.tolerance_pu) {
      out.x = x;
      // Weighted SSE at the solution.
      double chi = 0.0;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const Row& row = rows[i];
        auto v_of = [&](int cidx) { return cd(x(2 * cidx), x(2 * cidx + 1)); };
        cd h;
        if (!row.injection) {
          h = row.constant;
          for (const auto& [k, c] : row.terms) h += c * v_of(k);
        } else {
          cd v = v_of(row.own);
          cd cur = row.constant;
          for (const auto& [k, c] : row.terms) cur += c * v_of(k);
          h = v * std::conj(cur);
        }
        chi += std::pow(row.w1 * (row.z1 - h.real()), 2) +
               std::pow(row.w2 * (row.z2 - h.imag()), 2);
      }
      out.chi_square = chi;
      return out;
    }
    if (step > prev_step) {
      if (++growing >= 3)
        throw Error(Errc::diverged, label + ": step norm grew for 3 consecutive iterations");
    } else {
      growing = 0;
    }
    prev_step = step;
  }
  throw Error(Errc::max_iterations,
              label + ": no convergence in " + std::to_string(options.max_iterations) +
                  " iterations");
}

}  // namespace detail

namespace {

using detail::NetworkCtx;
using detail::Row;
using detail::StateIndex;

struct BoundaryInjection {
  int measured_from = -1;     // canonical PMU-side bus
  std::array<cd, 3> current;  // SI series current oriented away from it
  std::array<bool, 3> have{false, false, false};
};

StateIndex make_index(const NetworkCtx& net, const std::vector<int>& buses) {
  StateIndex idx;
  for (int b : buses) {
    PhaseSet ph = net.model().bus_phases(b);
    for (int p = 0; p < 3; ++p)
      if (ph.has(p)) idx.add(b, p);
  }
  return idx;
}

int find_segment(const NetworkCtx& net, int a, int b) {
  for (int s : net.model().incident_segments(a)) {
    auto [x, y] = net.ends(s);
    if ((x == a && y == b) || (x == b && y == a)) return s;
  }
  return -1;
}

// Complex coefficients of the current leaving `bus` into `seg`, over states of
// the index; when the far end is outside the index, the caller must supply the
// measured constant instead and only the local half-shunt terms are emitted.
void leaving_terms(const NetworkCtx& net, const StateIndex& idx, int seg, int bus, int phase,
                   bool far_inside, std::vector<std::pair<int, cd>>& terms) {
  auto [a, b] = net.ends(seg);
  int other = a == bus ? b : a;
  const double scale = net.v_base / net.i_base;
  for (int q = 0; q < 3; ++q) {
    cd ys = net.y_series[seg](phase, q);
    cd yh = net.adm[seg].y_shunt_half(phase, q);
    if (idx.has(bus, q)) {
      cd own = far_inside ? (ys + yh) * scale : yh * scale;
      if (own != cd(0, 0)) terms.emplace_back(idx.at(bus, q), own);
    }
    if (far_inside && idx.has(other, q) && ys != cd(0, 0))
      terms.emplace_back(idx.at(other, q), -ys * scale);
  }
}

std::vector<Row> build_rows(const NetworkCtx& net, const StateIndex& idx,
                            const MeasurementSet& ms, bool include_pseudo,
                            const std::map<int, BoundaryInjection>* boundary) {
  const auto& m = net.model();
  std::vector<Row> rows;

  for (const auto& item : ms.items) {
    const int bus = m.canonical(item.bus);
    const double sigma = item.sigma > 0 ? item.sigma : 1e-9;

    if (item.kind == MeasKind::PmuVoltage) {
      if (!idx.has(bus, item.phase)) continue;
      Row row;
      row.terms.emplace_back(idx.at(bus, item.phase), cd(1.0, 0.0));
      row.z1 = item.a / net.v_base;
      row.z2 = item.b / net.v_base;
      row.w1 = row.w2 = net.v_base / sigma;
      rows.push_back(std::move(row));
      continue;
    }

    if (item.kind == MeasKind::PmuCurrent) {
      const int other = m.canonical(item.other_bus);
      int seg = find_segment(net, bus, other);
      if (seg < 0)
        throw Error(Errc::unknown_bus, "current measurement names a missing branch " +
                                           std::to_string(item.bus) + "-" +
                                           std::to_string(item.other_bus));
      if (!idx.has_bus(bus) || !idx.has_bus(other)) continue;  // cut branches enter via constants
      Row row;
      const double scale = net.v_base / net.i_base;
      for (int q = 0; q < 3; ++q) {
        cd ys = net.y_series[seg](item.phase, q);
        if (ys == cd(0, 0)) continue;
        if (idx.has(bus, q)) row.terms.emplace_back(idx.at(bus, q), ys * scale);
        if (idx.has(other, q)) row.terms.emplace_back(idx.at(other, q), -ys * scale);
      }
      row.z1 = item.a / net.i_base;
      row.z2 = item.b / net.i_base;
      row.w1 = row.w2 = net.i_base / sigma;
      rows.push_back(std::move(row));
      continue;
    }

    if (!include_pseudo || !idx.has(bus, item.phase)) continue;
    Row row;
    row.injection = true;
    row.own = idx.at(bus, item.phase);
    for (int seg : m.incident_segments(bus)) {
      if (!net.adm[seg].phases.has(item.phase)) continue;  // no conductor there
      auto [a, b] = net.ends(seg);
      int other = a == bus ? b : a;
      if (idx.has_bus(other)) {
        leaving_terms(net, idx, seg, bus, item.phase, true, row.terms);
        continue;
      }
      if (!boundary || !boundary->count(seg))
        throw Error(Errc::unobservable_input,
                    "zone injection at bus " + std::to_string(bus) +
                        " touches an unmeasured cut branch");
      const BoundaryInjection& bi = boundary->at(seg);
      if (!bi.have[item.phase])
        throw Error(Errc::unobservable_input,
                    "cut branch measurement lacks phase " + std::string(1, phase_letter(item.phase)));
      cd i_pu = bi.current[item.phase] / net.i_base;
      row.constant += (bi.measured_from == bus) ? i_pu : -i_pu;
      leaving_terms(net, idx, seg, bus, item.phase, false, row.terms);
    }
    row.z1 = item.a / net.s_base_phase;
    row.z2 = item.b / net.s_base_phase;
    row.w1 = row.w2 = net.s_base_phase / sigma;
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::VectorXd flat_start(const NetworkCtx& net, const StateIndex& idx) {
  Eigen::VectorXd x(2 * idx.size());
  const auto& gen = net.model().general();
  for (int k = 0; k < idx.size(); ++k) {
    cd v = gen.slack_voltage(idx.states[k].second) / net.v_base;
    x(2 * k) = v.real();
    x(2 * k + 1) = v.imag();
  }
  return x;
}

pf::PhasorSet to_phasors(const NetworkCtx& net, const StateIndex& idx, const Eigen::VectorXd& x) {
  pf::PhasorSet out;
  out.v_base_ln = net.v_base;
  for (int k = 0; k < idx.size(); ++k) {
    auto [bus, phase] = idx.states[k];
    auto& entry = out.buses[bus];
    entry.v[phase] = cd(x(2 * k), x(2 * k + 1)) * net.v_base;
    entry.phases.add(phase);
  }
  return out;
}

}  // namespace

pf::PhasorSet wls_linear_pmu(const model::FeederModel& model_in, const MeasurementSet& ms,
                             const std::vector<int>& buses) {
  NetworkCtx net;
  net.init(model_in);
  std::vector<int> target = buses;
  if (target.empty()) target = net.model().merged_buses();
  for (int& b : target) b = net.model().canonical(b);
  std::sort(target.begin(), target.end());
  target.erase(std::unique(target.begin(), target.end()), target.end());

  StateIndex idx = make_index(net, target);
  auto rows = build_rows(net, idx, ms, /*include_pseudo=*/false, nullptr);
  EstimationOptions opts;
  opts.tolerance_pu = 1e-10;
  auto res = detail::gauss_newton(rows, idx.size(), Eigen::VectorXd::Zero(2 * idx.size()), opts,
                                  "linear pmu estimate");
  return to_phasors(net, idx, res.x);
}

EstimationResult wls_gauss_newton(const model::FeederModel& model_in, const MeasurementSet& ms,
                                  const EstimationOptions& options) {
  NetworkCtx net;
  net.init(model_in);
  StateIndex idx = make_index(net, net.model().merged_buses());
  auto rows = build_rows(net, idx, ms, /*include_pseudo=*/true, nullptr);

  Eigen::VectorXd x0;
  if (options.init_from_linear) {
    auto lin = wls_linear_pmu(model_in, ms);
    x0 = flat_start(net, idx);
    for (int k = 0; k < idx.size(); ++k) {
      auto [bus, phase] = idx.states[k];
      if (lin.has(bus, phase)) {
        cd v = lin.voltage(bus, phase) / net.v_base;
        x0(2 * k) = v.real();
        x0(2 * k + 1) = v.imag();
      }
    }
  } else {
    x0 = flat_start(net, idx);
  }

  auto res = detail::gauss_newton(rows, idx.size(), x0, options, "estimate");

  EstimationResult out;
  out.voltages = to_phasors(net, idx, res.x);
  out.chi_square = res.chi_square;
  out.degrees_of_freedom = 2 * static_cast<int>(rows.size()) - 2 * idx.size();
  ZoneStat stat;
  stat.root = -1;
  stat.iterations = res.iterations;
  stat.weighted_residual_norm = std::sqrt(res.chi_square);
  stat.measurement_scalars = 2 * static_cast<int>(rows.size());
  stat.state_scalars = 2 * idx.size();
  out.zones.push_back(stat);
  return out;
}

namespace detail {

double jacobian_check(const model::FeederModel& model_in, const MeasurementSet& ms, double step,
                      std::uint64_t seed) {
  NetworkCtx net;
  net.init(model_in);
  StateIndex idx = make_index(net, net.model().merged_buses());
  auto rows = build_rows(net, idx, ms, /*include_pseudo=*/true, nullptr);

  std::mt19937_64 rng(seed);
  auto uni = [&]() { return double(rng() >> 11) * (1.0 / 9007199254740992.0) - 0.5; };
  Eigen::VectorXd x = flat_start(net, idx);
  for (int i = 0; i < x.size(); ++i) x(i) *= 1.0 + 0.08 * uni();

  auto h_of = [&](const Row& row, const Eigen::VectorXd& xx) {
    auto v_of = [&](int cidx) { return cd(xx(2 * cidx), xx(2 * cidx + 1)); };
    if (!row.injection) {
      cd h = row.constant;
      for (const auto& [k, c] : row.terms) h += c * v_of(k);
      return h;
    }
    cd v = v_of(row.own);
    cd cur = row.constant;
    for (const auto& [k, c] : row.terms) cur += c * v_of(k);
    return v * std::conj(cur);
  };

  double worst = 0.0;
  for (const Row& row : rows) {
    // Analytic entries, mirrored from the Gauss-Newton assembly (unweighted).
    std::map<int, std::pair<double, double>> d1, d2;  // scalar state -> (dh1, dh2)
    auto v_of = [&](int cidx) { return cd(x(2 * cidx), x(2 * cidx + 1)); };
    if (!row.injection) {
      for (const auto& [k, c] : row.terms) {
        d1[2 * k].first += c.real();
        d1[2 * k + 1].first += -c.imag();
        d2[2 * k].second += c.imag();
        d2[2 * k + 1].second += c.real();
      }
    } else {
      cd v = v_of(row.own);
      cd cur = row.constant;
      for (const auto& [k, c] : row.terms) cur += c * v_of(k);
      d1[2 * row.own].first += cur.real();
      d1[2 * row.own + 1].first += cur.imag();
      d2[2 * row.own].second += -cur.imag();
      d2[2 * row.own + 1].second += cur.real();
      for (const auto& [k, c] : row.terms) {
        const double cr = c.real(), ci = c.imag();
        d1[2 * k].first += v.real() * cr + v.imag() * ci;
        d1[2 * k + 1].first += -v.real() * ci + v.imag() * cr;
        d2[2 * k].second += v.imag() * cr - v.real() * ci;
        d2[2 * k + 1].second += -v.imag() * ci - v.real() * cr;
      }
    }

    std::set<int> scalars;
    for (const auto& [s, _] : d1) scalars.insert(s);
    for (const auto& [s, _] : d2) scalars.insert(s);
    for (int s : scalars) {
      Eigen::VectorXd hi = x, lo = x;
      hi(s) += step;
      lo(s) -= step;
      cd fh = h_of(row, hi), fl = h_of(row, lo);
      double fd1 = (fh.real() - fl.real()) / (2.0 * step);
      double fd2 = (fh.imag() - fl.imag()) / (2.0 * step);
      double a1 = d1.count(s) ? d1[s].first : 0.0;
      double a2 = d2.count(s) ? d2[s].second : 0.0;
      worst = std::max(worst, std::abs(a1 - fd1) / (std::abs(fd1) + 1e-12));
      worst = std::max(worst, std::abs(a2 - fd2) / (std::abs(fd2) + 1e-12));
    }
  }
  return worst;
}

namespace {
struct ZoneOutcome {
  pf::PhasorSet voltages;
  ZoneStat stat;
  double chi = 0.0;
  int dof = 0;
  std::exception_ptr error;
};
}  // namespace

// Zone-decomposed solve; `run_tasks(count, fn)` schedules fn(0..count-1),
// possibly concurrently. Results are merged in zone order regardless of the
// execution schedule.
EstimationResult solve_zones(const model::FeederModel& model_in,
                             const pmu::ZonePartition& partition, const MeasurementSet& ms,
                             const EstimationOptions& options, const TaskRunner& run_tasks) {
  NetworkCtx net;
  net.init(model_in);
  const auto& m = net.model();

  // Cut-branch measurements, keyed by segment, valued from the owning PMU.
  std::map<int, BoundaryInjection> boundary;
  std::map<int, int> owner_of;  // segment -> owner pmu bus
  for (const auto& b : partition.boundaries) owner_of[b.segment] = b.owner_pmu;
  for (const auto& item : ms.items) {
    if (item.kind != MeasKind::PmuCurrent) continue;
    int bus = m.canonical(item.bus), other = m.canonical(item.other_bus);
    int seg = find_segment(net, bus, other);
    if (seg < 0 || !owner_of.count(seg)) continue;
    if (owner_of[seg] != bus) continue;  // keep the owner's record
    auto& bi = boundary[seg];
    bi.measured_from = bus;
    bi.current[item.phase] = cd(item.a, item.b);
    bi.have[item.phase] = true;
  }
  for (const auto& b : partition.boundaries)
    if (!boundary.count(b.segment))
      throw Error(Errc::unobservable_input,
                  "measurement set lacks the cut-branch current owned by PMU " +
                      std::to_string(b.owner_pmu));

  const int n_zones = static_cast<int>(partition.zones.size());
  std::vector<ZoneOutcome> outcomes(n_zones);

  auto solve_one = [&](int zi) {
    auto& out = outcomes[zi];
    try {
      const auto& zone = partition.zones[zi];
      StateIndex idx = make_index(net, zone.members);
      auto rows = build_rows(net, idx, ms, /*include_pseudo=*/true, &boundary);
      GnOutcome res;
      try {
        res = gauss_newton(rows, idx.size(), flat_start(net, idx), options,
                           "zone " + std::to_string(zone.root));
      } catch (const Error& e) {
        if (e.code() == Errc::max_iterations)
          throw Error(Errc::diverged, std::string(e.what()) + " (zone poisons the merge)");
        throw;
      }
      out.voltages = to_phasors(net, idx, res.x);
      out.chi = res.chi_square;
      out.dof = 2 * static_cast<int>(rows.size()) - 2 * idx.size();
      out.stat.root = zone.root;
      out.stat.iterations = res.iterations;
      out.stat.weighted_residual_norm = std::sqrt(res.chi_square);
      out.stat.measurement_scalars = 2 * static_cast<int>(rows.size());
      out.stat.state_scalars = 2 * idx.size();
    } catch (...) {
      out.error = std::current_exception();
    }
  };

  run_tasks(n_zones, solve_one);

  for (int zi = 0; zi < n_zones; ++zi)
    if (outcomes[zi].error) std::rethrow_exception(outcomes[zi].error);

  EstimationResult merged;
  merged.voltages.v_base_ln = net.v_base;
  for (int zi = 0; zi < n_zones; ++zi) {
    auto& out = outcomes[zi];
    for (const auto& [bus, entry] : out.voltages.buses) {
      if (merged.voltages.buses.count(bus))
        throw Error(Errc::merge_conflict, "bus " + std::to_string(bus) + " estimated twice");
      merged.voltages.buses[bus] = entry;
    }
    merged.chi_square += out.chi;
    merged.degrees_of_freedom += out.dof;
    merged.zones.push_back(out.stat);
  }
  return merged;
}

}  // namespace detail
}  // namespace gridest::se
