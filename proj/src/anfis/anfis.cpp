#include "gridest/anfis/anfis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace gridest::anfis {

double MembershipFunction::eval(double x) const {
  const double t = std::abs((x - c) / a);
  return 1.0 / (1.0 + std::pow(t, 2.0 * b));
}

namespace {

std::vector<MembershipFunction> spread(int n, double lo, double hi) {
  std::vector<MembershipFunction> mfs(n);
  if (n == 1) {
    mfs[0] = {std::max((hi - lo) / 2.0, 1e-6), 2.0, (lo + hi) / 2.0};
    return mfs;
  }
  const double spacing = (hi - lo) / double(n - 1);
  for (int i = 0; i < n; ++i) mfs[i] = {std::max(spacing / 2.0, 1e-6), 2.0, lo + spacing * i};
  return mfs;
}

struct Firing {
  std::vector<double> w;     // raw strengths per rule
  std::vector<double> wbar;  // normalized
  double total = 0.0;
};

Firing fire(const AnfisModel& m, double x, double y) {
  Firing f;
  f.w.resize(m.rules.size());
  f.wbar.resize(m.rules.size());
  for (std::size_t k = 0; k < m.rules.size(); ++k) {
    f.w[k] = m.premise_x[m.rules[k].mf_x].eval(x) * m.premise_y[m.rules[k].mf_y].eval(y);
    f.total += f.w[k];
  }
  if (!(f.total > 0.0))
    throw Error(Errc::nan_gradient, "all rule firing strengths vanished");
  for (std::size_t k = 0; k < m.rules.size(); ++k) f.wbar[k] = f.w[k] / f.total;
  return f;
}

double rmse_of(const AnfisModel& m, const TrainingSet& data) {
  double sse = 0.0;
  for (const auto& row : data) {
    double e = infer(m, row.x, row.y) - row.target;
    sse += e * e;
  }
  return std::sqrt(sse / double(data.size()));
}

// d(mu)/d{a,b,c} for the generalized bell, written with u = (1-mu)/mu.
struct BellGrad {
  double da = 0.0, db = 0.0, dc = 0.0;
};

BellGrad bell_grad(const MembershipFunction& mf, double x) {
  BellGrad g;
  const double mu = mf.eval(x);
  const double dx = x - mf.c;
  g.da = 2.0 * mf.b * mu * (1.0 - mu) / mf.a;
  if (std::abs(dx) > 1e-300) {
    g.dc = 2.0 * mf.b * mu * (1.0 - mu) / dx;
    g.db = -2.0 * mu * (1.0 - mu) * std::log(std::abs(dx / mf.a));
  }
  return g;
}

// Gradient of sum of squared errors over all premise parameters, laid out as
// [x-mf0 a,b,c, x-mf1 a,b,c, ..., y-mf0 a,b,c, ...].
Eigen::VectorXd premise_gradient(const AnfisModel& m, const TrainingSet& data) {
  const int nx = int(m.premise_x.size());
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(m.parameter_count());

  for (const auto& row : data) {
    Firing f = fire(m, row.x, row.y);
    double out = 0.0;
    std::vector<double> g(m.rules.size());
    for (std::size_t k = 0; k < m.rules.size(); ++k) {
      g[k] = m.rules[k].p * row.x + m.rules[k].q * row.y + m.rules[k].r;
      out += f.wbar[k] * g[k];
    }
    const double err2 = 2.0 * (out - row.target);

    for (std::size_t k = 0; k < m.rules.size(); ++k) {
      // d(out)/d(w_k) with the normalization in place.
      const double dout_dwk = (g[k] - out) / f.total;
      const auto& rule = m.rules[k];

      const double mu_x = m.premise_x[rule.mf_x].eval(row.x);
      const double mu_y = m.premise_y[rule.mf_y].eval(row.y);
      BellGrad gx = bell_grad(m.premise_x[rule.mf_x], row.x);
      BellGrad gy = bell_grad(m.premise_y[rule.mf_y], row.y);

      const double common = err2 * dout_dwk;
      grad(3 * rule.mf_x + 0) += common * mu_y * gx.da;
      grad(3 * rule.mf_x + 1) += common * mu_y * gx.db;
      grad(3 * rule.mf_x + 2) += common * mu_y * gx.dc;
      grad(3 * (nx + rule.mf_y) + 0) += common * mu_x * gy.da;
      grad(3 * (nx + rule.mf_y) + 1) += common * mu_x * gy.db;
      grad(3 * (nx + rule.mf_y) + 2) += common * mu_x * gy.dc;
    }
  }
  return grad;
}

void apply_premise_step(AnfisModel& m, const Eigen::VectorXd& step) {
  const int nx = int(m.premise_x.size());
  for (int i = 0; i < nx; ++i) {
    m.premise_x[i].a = std::max(m.premise_x[i].a - step(3 * i + 0), 1e-9);
    m.premise_x[i].b = std::max(m.premise_x[i].b - step(3 * i + 1), 1e-9);
    m.premise_x[i].c -= step(3 * i + 2);
  }
  for (int j = 0; j < int(m.premise_y.size()); ++j) {
    m.premise_y[j].a = std::max(m.premise_y[j].a - step(3 * (nx + j) + 0), 1e-9);
    m.premise_y[j].b = std::max(m.premise_y[j].b - step(3 * (nx + j) + 1), 1e-9);
    m.premise_y[j].c -= step(3 * (nx + j) + 2);
  }
}

// Exact least squares on the consequents with premises frozen.
void solve_consequents(AnfisModel& m, const TrainingSet& data) {
  const int n_rules = int(m.rules.size());
  const int cols = 3 * n_rules;
  Eigen::MatrixXd a(data.size(), cols);
  Eigen::VectorXd t(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    Firing f = fire(m, data[i].x, data[i].y);
    for (int k = 0; k < n_rules; ++k) {
      a(i, 3 * k + 0) = f.wbar[k] * data[i].x;
      a(i, 3 * k + 1) = f.wbar[k] * data[i].y;
      a(i, 3 * k + 2) = f.wbar[k];
    }
    t(i) = data[i].target;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < cols)
    throw Error(Errc::singular_lse, "consequent least squares is rank-deficient (rank " +
                                        std::to_string(qr.rank()) + " of " + std::to_string(cols) +
                                        ")");
  Eigen::VectorXd sol = qr.solve(t);
  for (int k = 0; k < n_rules; ++k) {
    m.rules[k].p = sol(3 * k + 0);
    m.rules[k].q = sol(3 * k + 1);
    m.rules[k].r = sol(3 * k + 2);
  }
}

}  // namespace

AnfisModel AnfisModel::grid(int n_mf_per_input, double x_lo, double x_hi, double y_lo,
                            double y_hi) {
  if (n_mf_per_input < 1) throw Error(Errc::usage, "need at least one membership function");
  AnfisModel m;
  m.premise_x = spread(n_mf_per_input, x_lo, x_hi);
  m.premise_y = spread(n_mf_per_input, y_lo, y_hi);
  for (int i = 0; i < n_mf_per_input; ++i)
    for (int j = 0; j < n_mf_per_input; ++j) m.rules.push_back({i, j, 0.0, 0.0, 0.0});
  return m;
}

AnfisModel AnfisModel::paired(int n_rules, double x_lo, double x_hi, double y_lo, double y_hi) {
  if (n_rules < 1) throw Error(Errc::usage, "need at least one rule");
  AnfisModel m;
  m.premise_x = spread(n_rules, x_lo, x_hi);
  m.premise_y = spread(n_rules, y_lo, y_hi);
  for (int k = 0; k < n_rules; ++k) m.rules.push_back({k, k, 0.0, 0.0, 0.0});
  return m;
}

double infer(const AnfisModel& model, double x, double y) {
  Firing f = fire(model, x, y);
  double out = 0.0;
  for (std::size_t k = 0; k < model.rules.size(); ++k)
    out += f.wbar[k] * (model.rules[k].p * x + model.rules[k].q * y + model.rules[k].r);
  return out;
}

TrainingReport train_hybrid(AnfisModel& model, const TrainingSet& data, int epochs,
                            double learn_rate) {
  if (data.empty()) throw Error(Errc::usage, "training set is empty");
  if (learn_rate < 0.0) throw Error(Errc::usage, "learning rate cannot be negative");

  TrainingReport report;
  report.initial_rmse = rmse_of(model, data);

  double prev = report.initial_rmse;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    solve_consequents(model, data);
    const double after_lse = rmse_of(model, data);
    report.rmse_per_epoch.push_back(after_lse);

    if (learn_rate > 0.0) {
      Eigen::VectorXd grad = premise_gradient(model, data);
      if (!grad.allFinite())
        throw Error(Errc::nan_gradient, "premise gradient is not finite");
      apply_premise_step(model, grad * learn_rate);
    }

    if (after_lse <= 1e-14 || std::abs(prev - after_lse) <= 1e-9 * std::max(prev, 1e-30)) {
      report.converged = true;
      // Keep training for the requested epochs; the flag records stagnation.
    }
    prev = after_lse;
  }
  return report;
}

double gradient_check(const AnfisModel& model, const TrainingSet& data, double step) {
  if (step <= 1e-8 || step >= 1e-2)
    throw Error(Errc::usage, "finite-difference step must sit in (1e-8, 1e-2)");

  auto sse = [&](const AnfisModel& m) {
    double acc = 0.0;
    for (const auto& row : data) {
      double e = infer(m, row.x, row.y) - row.target;
      acc += e * e;
    }
    return acc;
  };

  const Eigen::VectorXd analytic = premise_gradient(model, data);
  const int nx = int(model.premise_x.size());

  auto param = [&](AnfisModel& m, int flat) -> double& {
    const int mf = flat / 3, slot = flat % 3;
    MembershipFunction& f = mf < nx ? m.premise_x[mf] : m.premise_y[mf - nx];
    return slot == 0 ? f.a : slot == 1 ? f.b : f.c;
  };

  double worst = 0.0;
  for (int i = 0; i < model.parameter_count(); ++i) {
    AnfisModel hi = model, lo = model;
    param(hi, i) += step;
    param(lo, i) -= step;
    const double fd = (sse(hi) - sse(lo)) / (2.0 * step);
    worst = std::max(worst, std::abs(analytic(i) - fd) / (std::abs(fd) + 1e-12));
  }
  return worst;
}

double VdcEstimator::predict(double power_error, double dc_voltage_error) const {
  auto norm = [](double v, double lo, double hi) { return -1.0 + 2.0 * (v - lo) / (hi - lo); };
  return infer(model, norm(power_error, x_lo, x_hi), norm(dc_voltage_error, y_lo, y_hi));
}

VdcEstimator fit_vdc_estimator(const std::vector<std::array<double, 3>>& traces, int epochs,
                               double learn_rate) {
  if (traces.empty()) throw Error(Errc::usage, "no traces given");
  VdcEstimator est;
  est.x_lo = est.x_hi = traces[0][0];
  est.y_lo = est.y_hi = traces[0][1];
  for (const auto& t : traces) {
    est.x_lo = std::min(est.x_lo, t[0]);
    est.x_hi = std::max(est.x_hi, t[0]);
    est.y_lo = std::min(est.y_lo, t[1]);
    est.y_hi = std::max(est.y_hi, t[1]);
  }
  if (est.x_hi - est.x_lo <= 1e-12 * std::max(std::abs(est.x_hi), 1.0))
    throw Error(Errc::degenerate_trace_range, "power-error input has no spread");
  if (est.y_hi - est.y_lo <= 1e-12 * std::max(std::abs(est.y_hi), 1.0))
    throw Error(Errc::degenerate_trace_range, "dc-voltage-error input has no spread");

  TrainingSet data;
  data.reserve(traces.size());
  auto norm = [](double v, double lo, double hi) { return -1.0 + 2.0 * (v - lo) / (hi - lo); };
  for (const auto& t : traces)
    data.push_back({norm(t[0], est.x_lo, est.x_hi), norm(t[1], est.y_lo, est.y_hi), t[2]});

  est.model = AnfisModel::grid(2, -1.0, 1.0, -1.0, 1.0);
  train_hybrid(est.model, data, epochs, learn_rate);
  return est;
}

}  // namespace gridest::anfis
