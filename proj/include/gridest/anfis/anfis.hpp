#pragma once

#include <array>
#include <vector>

#include "gridest/common.hpp"

namespace gridest::anfis {

// Generalized bell membership: 1 / (1 + |(x - c)/a|^(2b)).
struct MembershipFunction {
  double a = 1.0;  // width, > 0
  double b = 2.0;  // slope, > 0
  double c = 0.0;  // center

  double eval(double x) const;
};

// First-order Sugeno system with two inputs. Rules pair one membership
// function per input with a linear consequent p*x + q*y + r.
struct AnfisModel {
  struct Rule {
    int mf_x = 0;
    int mf_y = 0;
    double p = 0.0, q = 0.0, r = 0.0;
  };

  std::vector<MembershipFunction> premise_x;
  std::vector<MembershipFunction> premise_y;
  std::vector<Rule> rules;

  // Grid partition: one rule per membership pair. Centers spread evenly over
  // the ranges, width at half the center spacing, slope 2.
  static AnfisModel grid(int n_mf_per_input, double x_lo, double x_hi, double y_lo, double y_hi);
  // Paired wiring: rule k uses the k-th membership function of both inputs.
  static AnfisModel paired(int n_rules, double x_lo, double x_hi, double y_lo, double y_hi);

  int parameter_count() const { return 3 * int(premise_x.size() + premise_y.size()); }
};

struct TrainingRow {
  double x = 0.0, y = 0.0, target = 0.0;
};
using TrainingSet = std::vector<TrainingRow>;

struct TrainingReport {
  double initial_rmse = 0.0;
  std::vector<double> rmse_per_epoch;  // after each least-squares sub-step
  bool converged = false;              // stagnated or reached machine floor
};

// Normalized firing strengths and the rule outputs combined; strengths always
// sum to one (bell memberships never vanish, guarded regardless).
double infer(const AnfisModel& model, double x, double y);

// Hybrid pass per epoch: exact linear least squares on the consequents with
// premises frozen, then one batch gradient-descent step on the premises.
TrainingReport train_hybrid(AnfisModel& model, const TrainingSet& data, int epochs,
                            double learn_rate);

// Max relative disagreement between the analytic premise gradient of the
// squared-error loss and a central finite difference with the given step.
double gradient_check(const AnfisModel& model, const TrainingSet& data, double step);

// Input-normalized wrapper for the DC-link reference correction estimator.
struct VdcEstimator {
  AnfisModel model;
  double x_lo = 0.0, x_hi = 0.0;
  double y_lo = 0.0, y_hi = 0.0;

  double predict(double power_error, double dc_voltage_error) const;
};

// Trains on rows of (load-power error, dc-voltage error, reference correction).
VdcEstimator fit_vdc_estimator(const std::vector<std::array<double, 3>>& traces, int epochs = 50,
                               double learn_rate = 0.01);

}  // namespace gridest::anfis
