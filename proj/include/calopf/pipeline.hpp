#pragma once

// Prediction path: loads -> scaling factors -> generation (slack by balance) -> angles
// -> feasibility check against the original limits -> optional l1 projection.

#include <Eigen/Dense>

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "calopf/dcopf.hpp"
#include "calopf/mlp.hpp"
#include "calopf/scaling.hpp"
#include "json.hpp"

namespace calopf {

enum class Fallback { none, l1_projection };

inline const char* to_string(Fallback f) { return f == Fallback::none ? "none" : "l1-projection"; }

inline Fallback fallback_from_string(const std::string& s) {
  if (s == "none") return Fallback::none;
  if (s == "l1-projection" || s == "l1") return Fallback::l1_projection;
  throw std::invalid_argument("unknown fallback '" + s + "' (expected none or l1-projection)");
}

/// Full angle vector (slack = 0) for a generation vector and per-bus load.
inline Eigen::VectorXd reconstruct_angles(const PowerNetwork& net, const AdmittanceSystem& adm, const Eigen::VectorXd& p_g,
                                          const Eigen::VectorXd& load) {
  if (static_cast<std::size_t>(p_g.size()) != net.n_generators() || static_cast<std::size_t>(load.size()) != net.n_buses())
    throw std::invalid_argument("reconstruct_angles: dimension mismatch");
  return adm.angles_from_injection(net_injection(net, p_g, load));
}

struct FeasibilityCheck {
  bool feasible = true;
  std::vector<Violation> violations;
};

/// Every line in both directions and every generator bound including the slack, with flows
/// evaluated branch by branch from the angles. Tolerance is in normalized units.
inline FeasibilityCheck check_feasibility(const PowerNetwork& net, const Eigen::VectorXd& p_g, const Eigen::VectorXd& theta,
                                          const EffectiveLimits& limits, const Eigen::VectorXd& load,
                                          double tol = kFeasibilityTol) {
  if (static_cast<std::size_t>(theta.size()) != net.n_buses() || static_cast<std::size_t>(p_g.size()) != net.n_generators())
    throw std::invalid_argument("check_feasibility: dimension mismatch");
  Eigen::VectorXd flow(static_cast<Eigen::Index>(net.n_branches()));
  for (std::size_t k = 0; k < net.n_branches(); ++k) {
    const auto& br = net.branches[k];
    flow[static_cast<Eigen::Index>(k)] = (theta[br.from] - theta[br.to]) / br.x;
  }
  FeasibilityCheck out;
  out.violations = find_violations(net, limits, p_g, flow, load, tol);
  out.feasible = out.violations.empty();
  return out;
}

/// Immutable per-network state shared by predictions: network copy, factorized admittance
/// system and the original limits.
struct InferenceBundle {
  PowerNetwork network;
  AdmittanceSystem admittance;
  EffectiveLimits limits;
  std::vector<int> load_buses;

  explicit InferenceBundle(PowerNetwork net)
      : network(std::move(net)),
        admittance(build_admittance(network)),
        limits(default_limits(network)),
        load_buses(network.load_buses()) {}

  Eigen::VectorXd load_features(const Eigen::VectorXd& load) const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(load_buses.size()));
    for (std::size_t l = 0; l < load_buses.size(); ++l) x[static_cast<Eigen::Index>(l)] = load[load_buses[l]];
    return x;
  }
};

struct StageTimes {
  double dnn = 0.0;
  double reconstruction = 0.0;
  double check = 0.0;
  double projection = 0.0;

  double total() const { return dnn + reconstruction + check + projection; }
};

struct PredictionResult {
  Eigen::VectorXd alpha_hat;
  Eigen::VectorXd p_g_hat;    // per-unit, slack included
  Eigen::VectorXd theta_hat;  // radians, slack = 0
  bool feasible_direct = false;
  std::vector<Violation> violations;
  bool projected = false;
  std::optional<SolveStatus> projection_status;
  Eigen::VectorXd p_g;  // final dispatch
  double cost = 0.0;    // $/h of the final dispatch
  StageTimes timing;    // seconds
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Runs everything after the network evaluation for given scaling factors.
inline PredictionResult predict_from_alpha(const InferenceBundle& bundle, const Eigen::VectorXd& alpha,
                                           const Eigen::VectorXd& load, Fallback fallback = Fallback::l1_projection,
                                           const SolverOptions& opts = {}, QpSolver* solver = nullptr) {
  const auto& net = bundle.network;
  PredictionResult r;
  r.alpha_hat = alpha;

  auto t0 = std::chrono::steady_clock::now();
  r.p_g_hat = decode_generation(net, alpha, load.sum());
  r.theta_hat = reconstruct_angles(net, bundle.admittance, r.p_g_hat, load);
  r.timing.reconstruction = detail::seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  auto check = check_feasibility(net, r.p_g_hat, r.theta_hat, bundle.limits, load);
  r.timing.check = detail::seconds_since(t0);
  r.feasible_direct = check.feasible;
  r.violations = std::move(check.violations);
  r.p_g = r.p_g_hat;

  if (!r.feasible_direct && fallback == Fallback::l1_projection) {
    t0 = std::chrono::steady_clock::now();
    const DcOpfProblem prob{net, bundle.admittance, load, bundle.limits};
    const auto proj = l1_project(prob, r.p_g_hat, opts, solver);
    r.timing.projection = detail::seconds_since(t0);
    r.projected = true;
    r.projection_status = proj.status;
    if (proj.status == SolveStatus::optimal) r.p_g = proj.p_g;
  }
  r.cost = evaluate_cost(net, r.p_g);
  return r;
}

/// Full pipeline for a per-bus load vector (per-unit).
inline PredictionResult predict(const MlpModel& model, const InferenceBundle& bundle, const Eigen::VectorXd& load,
                                Fallback fallback = Fallback::l1_projection, const SolverOptions& opts = {},
                                QpSolver* solver = nullptr) {
  if (static_cast<std::size_t>(load.size()) != bundle.network.n_buses())
    throw std::invalid_argument("load vector dimension does not match bus count");
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::VectorXd alpha = model.predict(bundle.load_features(load));
  const double dnn = detail::seconds_since(t0);
  auto r = predict_from_alpha(bundle, alpha, load, fallback, opts, solver);
  r.timing.dnn = dnn;
  return r;
}

/// One JSON object per prediction, physical units.
inline nlohmann::json to_json(const PredictionResult& r, double base_mva) {
  auto mw = [base_mva](const Eigen::VectorXd& v) {
    std::vector<double> out(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = v[i] * base_mva;
    return out;
  };
  nlohmann::json j;
  j["p_g_hat_mw"] = mw(r.p_g_hat);
  j["theta_hat"] = std::vector<double>(r.theta_hat.data(), r.theta_hat.data() + r.theta_hat.size());
  j["feasible_direct"] = r.feasible_direct;
  auto& v = j["violations"] = nlohmann::json::array();
  for (const auto& x : r.violations) v.push_back({{"kind", to_string(x.kind)}, {"index", x.index}, {"magnitude", x.magnitude}});
  j["projected"] = r.projected;
  if (r.projection_status) j["projection_status"] = to_string(*r.projection_status);
  j["p_g_mw"] = mw(r.p_g);
  j["cost"] = r.cost;
  j["timing"] = {{"dnn", r.timing.dnn},
                 {"reconstruction", r.timing.reconstruction},
                 {"check", r.timing.check},
                 {"projection", r.timing.projection}};
  return j;
}

}  // namespace calopf
