#pragma once

// Error-amplification analysis and preventive tightening of line and slack limits.
//
// M = X_reduced * B_reduced^{-1} maps non-slack bus injections to line flows. A bounded
// per-injection error |delta_j| <= eps can move line i by at most k_i * eps with
// k_i = sum_j |M_ij|, and moves the balance-determined slack output by at most
// (n_gens - 1) * eps. Tightening line i by k_i*eps and the slack range by (n_gens-1)*eps
// on each side therefore keeps any prediction within eps of a calibrated optimum
// feasible for the original limits.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

#include "calopf/errors.hpp"
#include "calopf/grid_model.hpp"
#include "json.hpp"

namespace calopf {

struct SensitivityMatrix {
  Eigen::MatrixXd m;  // |E| x (N-1), columns follow AdmittanceSystem::reduced_to_bus
  Eigen::VectorXd k;  // absolute row sums
};

inline SensitivityMatrix compute_sensitivity(const AdmittanceSystem& adm) {
  SensitivityMatrix out;
  if (adm.n_reduced() == 0) {
    out.m = Eigen::MatrixXd::Zero(adm.x_incidence.rows(), 0);
    out.k = Eigen::VectorXd::Zero(adm.x_incidence.rows());
    return out;
  }
  if (adm.factor.info() != Eigen::Success) throw NumericalError("reduced admittance matrix is not factorized");
  // B_reduced is symmetric, so M' = B_reduced^{-1} X_reduced'.
  out.m = adm.factor.solve(adm.x_incidence_reduced.transpose()).transpose();
  out.k = out.m.cwiseAbs().rowwise().sum();
  return out;
}

/// Worst-case approximation error of a ReLU network with `n_hidden` layers of at most
/// `n_neurons` units for a target with Lipschitz constant `lipschitz` on a domain of
/// diameter `diameter`: lipschitz * diameter / (4 * (2 n_neurons)^n_hidden).
inline double worst_case_error_bound(double lipschitz, double diameter, double n_neurons, double n_hidden) {
  if (!(lipschitz > 0.0) || !(diameter > 0.0) || !(n_neurons > 0.0) || !(n_hidden > 0.0))
    throw std::invalid_argument("worst_case_error_bound: all arguments must be positive");
  return lipschitz * diameter / (4.0 * std::pow(2.0 * n_neurons, n_hidden));
}

struct CalibrationPlan {
  enum class Mode { absolute, percent };
  Mode mode = Mode::absolute;
  double percent = 0.0;               // fraction c, percent mode
  Eigen::VectorXd line_margin_mw;     // eta per line, absolute mode (empty = zero)
  double slack_margin_mw = 0.0;       // xi, absolute mode
  std::string note;                   // how the margins were derived

  bool is_zero() const {
    if (mode == Mode::percent) return percent == 0.0;
    return slack_margin_mw == 0.0 && (line_margin_mw.size() == 0 || line_margin_mw.isZero(0.0));
  }
};

inline CalibrationPlan zero_plan() {
  CalibrationPlan p;
  p.note = "uncalibrated";
  return p;
}

/// Slack generator limits shrunk by c*(max-min) at each end, every line capacity scaled by (1-c).
inline CalibrationPlan plan_from_percent(double c) {
  if (!(c >= 0.0) || !(c < 1.0)) throw std::invalid_argument("calibration fraction must satisfy 0 <= c < 1");
  CalibrationPlan p;
  p.mode = CalibrationPlan::Mode::percent;
  p.percent = c;
  p.note = "percent c=" + nlohmann::json(c).dump();
  return p;
}

namespace detail {

inline void check_plan(const PowerNetwork& net, const EffectiveLimits& calibrated) {
  for (Eigen::Index k = 0; k < calibrated.line_capacity.size(); ++k)
    if (!(calibrated.line_capacity[k] > 0.0))
      throw CalibrationError("calibration margin on line " + std::to_string(k) + " (buses " +
                                 std::to_string(net.buses[static_cast<std::size_t>(net.branches[static_cast<std::size_t>(k)].from)].id) + "-" +
                                 std::to_string(net.buses[static_cast<std::size_t>(net.branches[static_cast<std::size_t>(k)].to)].id) +
                                 ") meets or exceeds its capacity",
                             static_cast<int>(k));
  const int s = net.slack_generator();
  if (calibrated.gen_min[s] > calibrated.gen_max[s])
    throw CalibrationError("calibrated slack generation range is empty");
}

}  // namespace detail

/// Calibrated limits for `net`. Non-slack generator bounds pass through untouched.
inline EffectiveLimits apply_plan(const PowerNetwork& net, const CalibrationPlan& plan) {
  EffectiveLimits lim = default_limits(net);
  const int s = net.slack_generator();
  if (plan.mode == CalibrationPlan::Mode::percent) {
    const double c = plan.percent;
    lim.line_capacity *= (1.0 - c);
    const double width = lim.gen_max[s] - lim.gen_min[s];
    lim.gen_min[s] += c * width;
    lim.gen_max[s] -= c * width;
  } else {
    if (plan.line_margin_mw.size() != 0) {
      if (plan.line_margin_mw.size() != lim.line_capacity.size())
        throw CalibrationError("plan has " + std::to_string(plan.line_margin_mw.size()) + " line margins, network has " +
                               std::to_string(lim.line_capacity.size()) + " lines");
      lim.line_capacity -= plan.line_margin_mw / net.base_mva;
    }
    lim.gen_min[s] += plan.slack_margin_mw / net.base_mva;
    lim.gen_max[s] -= plan.slack_margin_mw / net.base_mva;
  }
  detail::check_plan(net, lim);
  return lim;
}

/// eta_i = k_i * eps on every line and xi = (n_gens - 1) * eps, with eps in MW.
/// Throws CalibrationError naming the first line whose margin reaches its capacity.
inline CalibrationPlan plan_from_epsilon(const PowerNetwork& net, const SensitivityMatrix& sens, std::size_t n_gens,
                                         double epsilon_mw) {
  if (!(epsilon_mw >= 0.0)) throw std::invalid_argument("epsilon must be nonnegative");
  CalibrationPlan p;
  p.mode = CalibrationPlan::Mode::absolute;
  p.line_margin_mw = sens.k * epsilon_mw;
  p.slack_margin_mw = static_cast<double>(n_gens > 0 ? n_gens - 1 : 0) * epsilon_mw;
  p.note = "epsilon=" + nlohmann::json(epsilon_mw).dump() + " MW";
  apply_plan(net, p);
  return p;
}

inline nlohmann::json plan_to_json(const CalibrationPlan& p) {
  nlohmann::json j;
  j["mode"] = p.mode == CalibrationPlan::Mode::percent ? "percent" : "absolute";
  j["note"] = p.note;
  if (p.mode == CalibrationPlan::Mode::percent) {
    j["percent"] = p.percent;
  } else {
    j["line_margin_mw"] = std::vector<double>(p.line_margin_mw.data(), p.line_margin_mw.data() + p.line_margin_mw.size());
    j["slack_margin_mw"] = p.slack_margin_mw;
  }
  return j;
}

inline CalibrationPlan plan_from_json(const nlohmann::json& j) {
  CalibrationPlan p;
  try {
    const auto mode = j.at("mode").get<std::string>();
    p.note = j.value("note", "");
    if (mode == "percent") {
      p.mode = CalibrationPlan::Mode::percent;
      p.percent = j.at("percent").get<double>();
    } else if (mode == "absolute") {
      const auto margins = j.at("line_margin_mw").get<std::vector<double>>();
      p.line_margin_mw = Eigen::Map<const Eigen::VectorXd>(margins.data(), static_cast<Eigen::Index>(margins.size()));
      p.slack_margin_mw = j.at("slack_margin_mw").get<double>();
    } else {
      throw FormatError("unknown calibration mode '" + mode + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed calibration plan: ") + e.what());
  }
  return p;
}

}  // namespace calopf
