#pragma once

// DC optimal power flow on top of the interior-point core.
//
// Decision vector for the dispatch QP: [P_G (one per generator); theta at non-slack buses].
// Power balance B*theta = C_g P_G - P_D is kept as an explicit equality (one row per bus),
// generator bounds and both directions of every line limit are inequalities.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "calopf/grid_model.hpp"
#include "calopf/qp.hpp"

namespace calopf {

struct DcOpfProblem {
  const PowerNetwork& network;
  const AdmittanceSystem& admittance;
  Eigen::VectorXd load;  // per bus, per-unit
  EffectiveLimits limits;
};

using SolveStatus = QpStatus;

struct SolverOptions {
  double tol_kkt = 1e-8;
  double tol_gap = 1e-8;
  int max_iter = 100;
  int verbosity = 0;

  QpOptions qp() const {
    QpOptions o;
    o.tol_kkt = tol_kkt;
    o.tol_gap = tol_gap;
    o.max_iter = max_iter;
    o.verbosity = verbosity;
    return o;
  }
};

struct DispatchSolution {
  Eigen::VectorXd p_g;    // per generator, per-unit
  Eigen::VectorXd theta;  // per bus, radians, exactly 0 at the slack
  Eigen::VectorXd flow;   // per branch, per-unit
  double cost = 0.0;      // $/h
  SolveStatus status = SolveStatus::max_iterations;
  double solve_time = 0.0;  // seconds
  double duality_gap = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool possibly_infeasible = false;  // total load exceeded total capacity before solving
  QpResult raw;                      // multipliers for KKT inspection
};

/// sum_g c2 p^2 + c1 p + c0, in $/h for per-unit p.
inline double evaluate_cost(const PowerNetwork& net, const Eigen::VectorXd& p_g) {
  if (static_cast<std::size_t>(p_g.size()) != net.n_generators())
    throw std::invalid_argument("generation vector has " + std::to_string(p_g.size()) + " entries, network has " +
                                std::to_string(net.n_generators()) + " generators");
  double total = 0.0;
  for (std::size_t g = 0; g < net.n_generators(); ++g) total += net.generators[g].cost(p_g[static_cast<Eigen::Index>(g)]);
  return total;
}

/// Net injection per bus for a generation vector and load.
inline Eigen::VectorXd net_injection(const PowerNetwork& net, const Eigen::VectorXd& p_g, const Eigen::VectorXd& load) {
  Eigen::VectorXd inj = -load;
  for (std::size_t g = 0; g < net.n_generators(); ++g) inj[net.generators[g].bus] += p_g[static_cast<Eigen::Index>(g)];
  return inj;
}

struct Violation {
  enum class Kind { line, gen_upper, gen_lower, balance };
  Kind kind = Kind::line;
  int index = 0;           // branch or generator index
  double magnitude = 0.0;  // normalized excess beyond the limit
};

inline const char* to_string(Violation::Kind k) {
  switch (k) {
    case Violation::Kind::line: return "line";
    case Violation::Kind::gen_upper: return "gen-upper";
    case Violation::Kind::gen_lower: return "gen-lower";
    case Violation::Kind::balance: return "balance";
  }
  return "?";
}

inline constexpr double kFeasibilityTol = 1e-6;
inline constexpr double kBalanceTol = 1e-6;  // per-unit total mismatch

/// Every constraint of the DC-OPF polytope checked against `limits`.
/// Line excess is |flow|/cap - 1; generator excess is measured in units of the
/// generator's limit range (1 per-unit when the range is empty).
inline std::vector<Violation> find_violations([[maybe_unused]] const PowerNetwork& net, const EffectiveLimits& limits,
                                              const Eigen::VectorXd& p_g, const Eigen::VectorXd& flow,
                                              const Eigen::VectorXd& load, double tol = kFeasibilityTol) {
  std::vector<Violation> out;
  for (Eigen::Index k = 0; k < flow.size(); ++k) {
    const double excess = std::abs(flow[k]) / limits.line_capacity[k] - 1.0;
    if (excess > tol) out.push_back({Violation::Kind::line, static_cast<int>(k), excess});
  }
  for (Eigen::Index g = 0; g < p_g.size(); ++g) {
    const double width = limits.gen_max[g] - limits.gen_min[g];
    const double unit = width > 0.0 ? width : 1.0;
    const double hi = (p_g[g] - limits.gen_max[g]) / unit;
    const double lo = (limits.gen_min[g] - p_g[g]) / unit;
    if (hi > tol) out.push_back({Violation::Kind::gen_upper, static_cast<int>(g), hi});
    if (lo > tol) out.push_back({Violation::Kind::gen_lower, static_cast<int>(g), lo});
  }
  const double mismatch = std::abs(p_g.sum() - load.sum());
  if (mismatch > kBalanceTol) out.push_back({Violation::Kind::balance, -1, mismatch});
  return out;
}

namespace detail {

/// Rows: bus balance. Columns: [generators | extra | reduced angles].
inline void fill_balance(const PowerNetwork& net, const AdmittanceSystem& adm, Eigen::MatrixXd& A, Eigen::Index gen_col,
                         Eigen::Index angle_col, double gen_sign = 1.0) {
  for (std::size_t g = 0; g < net.n_generators(); ++g)
    A(net.generators[g].bus, gen_col + static_cast<Eigen::Index>(g)) = gen_sign;
  for (Eigen::Index r = 0; r < adm.n_reduced(); ++r)
    A.col(angle_col + r) = -adm.b_full.col(adm.reduced_to_bus[static_cast<std::size_t>(r)]);
}

inline void fill_line_rows(const AdmittanceSystem& adm, const EffectiveLimits& lim, Eigen::MatrixXd& G, Eigen::VectorXd& h,
                           Eigen::Index row, Eigen::Index angle_col) {
  const Eigen::Index ne = adm.x_incidence_reduced.rows();
  const Eigen::Index nr = adm.n_reduced();
  G.block(row, angle_col, ne, nr) = adm.x_incidence_reduced;
  G.block(row + ne, angle_col, ne, nr) = -adm.x_incidence_reduced;
  h.segment(row, ne) = lim.line_capacity;
  h.segment(row + ne, ne) = lim.line_capacity;
}

inline void finish_dispatch(const DcOpfProblem& prob, DispatchSolution& sol) {
  sol.theta = prob.admittance.angles_from_injection(net_injection(prob.network, sol.p_g, prob.load));
  sol.flow = prob.admittance.flows(sol.theta);
  sol.cost = evaluate_cost(prob.network, sol.p_g);
}

}  // namespace detail

/// Builds the dispatch QP (exposed for tests that inspect KKT conditions).
inline QpProblem build_dispatch_qp(const DcOpfProblem& prob) {
  const auto& net = prob.network;
  const auto& adm = prob.admittance;
  const Eigen::Index ng = static_cast<Eigen::Index>(net.n_generators());
  const Eigen::Index nr = adm.n_reduced();
  const Eigen::Index nb = static_cast<Eigen::Index>(net.n_buses());
  const Eigen::Index ne = static_cast<Eigen::Index>(net.n_branches());
  const Eigen::Index n = ng + nr;

  QpProblem qp;
  qp.Q = Eigen::MatrixXd::Zero(n, n);
  qp.c = Eigen::VectorXd::Zero(n);
  for (Eigen::Index g = 0; g < ng; ++g) {
    qp.Q(g, g) = 2.0 * net.generators[static_cast<std::size_t>(g)].c2;
    qp.c[g] = net.generators[static_cast<std::size_t>(g)].c1;
  }
  qp.A = Eigen::MatrixXd::Zero(nb, n);
  qp.b = prob.load;
  detail::fill_balance(net, adm, qp.A, 0, ng);

  qp.G = Eigen::MatrixXd::Zero(2 * ng + 2 * ne, n);
  qp.h.resize(2 * ng + 2 * ne);
  for (Eigen::Index g = 0; g < ng; ++g) {
    qp.G(g, g) = 1.0;
    qp.h[g] = prob.limits.gen_max[g];
    qp.G(ng + g, g) = -1.0;
    qp.h[ng + g] = -prob.limits.gen_min[g];
  }
  detail::fill_line_rows(adm, prob.limits, qp.G, qp.h, 2 * ng, ng);
  return qp;
}

/// Cold-start interior-point solve of the dispatch problem.
inline DispatchSolution solve_dcopf(const DcOpfProblem& prob, const SolverOptions& opts = {}, QpSolver* solver = nullptr) {
  const auto& net = prob.network;
  if (static_cast<std::size_t>(prob.load.size()) != net.n_buses())
    throw std::invalid_argument("load vector dimension does not match bus count");

  const auto t0 = std::chrono::steady_clock::now();
  DispatchSolution sol;
  sol.possibly_infeasible = prob.load.sum() > prob.limits.gen_max.sum();

  const QpProblem qp = build_dispatch_qp(prob);
  const Eigen::Index ng = static_cast<Eigen::Index>(net.n_generators());
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(qp.c.size());
  x0.head(ng) = 0.5 * (prob.limits.gen_min + prob.limits.gen_max);

  QpSolver local;
  QpSolver& ipm = solver ? *solver : local;
  sol.raw = ipm.solve(qp, x0, opts.qp());
  sol.status = sol.raw.status;
  sol.iterations = sol.raw.iterations;
  sol.duality_gap = sol.raw.gap;
  sol.kkt_residual = sol.raw.kkt_residual();

  sol.p_g = sol.raw.x.head(ng);
  sol.theta = prob.admittance.expand(sol.raw.x.tail(prob.admittance.n_reduced()));
  sol.flow = prob.admittance.flows(sol.theta);
  sol.cost = evaluate_cost(net, sol.p_g);
  sol.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

/// Nearest feasible dispatch in l1 distance to `p_hat` under `prob.limits`.
/// A point that already passes the feasibility check is returned unchanged.
/// The linear program is solved with the same interior-point core, using the split
/// p = p_hat + u - v (u, v >= 0) and a 1e-10 ridge to keep the KKT matrix nonsingular.
inline DispatchSolution l1_project(const DcOpfProblem& prob, const Eigen::VectorXd& p_hat, const SolverOptions& opts = {},
                                   QpSolver* solver = nullptr) {
  const auto& net = prob.network;
  const auto& adm = prob.admittance;
  const Eigen::Index ng = static_cast<Eigen::Index>(net.n_generators());
  if (p_hat.size() != ng) throw std::invalid_argument("p_hat dimension does not match generator count");

  const auto t0 = std::chrono::steady_clock::now();
  DispatchSolution sol;
  sol.p_g = p_hat;
  detail::finish_dispatch(prob, sol);
  if (find_violations(net, prob.limits, sol.p_g, sol.flow, prob.load).empty()) {
    sol.status = SolveStatus::optimal;
    sol.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  }

  const Eigen::Index nr = adm.n_reduced();
  const Eigen::Index nb = static_cast<Eigen::Index>(net.n_buses());
  const Eigen::Index ne = static_cast<Eigen::Index>(net.n_branches());
  const Eigen::Index n = 2 * ng + nr;

  QpProblem lp;
  lp.Q = 1e-10 * Eigen::MatrixXd::Identity(n, n);
  lp.c = Eigen::VectorXd::Zero(n);
  lp.c.head(2 * ng).setOnes();

  lp.A = Eigen::MatrixXd::Zero(nb, n);
  detail::fill_balance(net, adm, lp.A, 0, 2 * ng);
  detail::fill_balance(net, adm, lp.A, ng, 2 * ng, -1.0);
  lp.b = prob.load - net_injection(net, p_hat, Eigen::VectorXd::Zero(nb));

  const Eigen::Index m = 4 * ng + 2 * ne;
  lp.G = Eigen::MatrixXd::Zero(m, n);
  lp.h = Eigen::VectorXd::Zero(m);
  for (Eigen::Index g = 0; g < ng; ++g) {
    lp.G(g, g) = -1.0;            // u >= 0
    lp.G(ng + g, ng + g) = -1.0;  // v >= 0
    lp.G(2 * ng + g, g) = 1.0;    // p_hat + u - v <= max
    lp.G(2 * ng + g, ng + g) = -1.0;
    lp.h[2 * ng + g] = prob.limits.gen_max[g] - p_hat[g];
    lp.G(3 * ng + g, g) = -1.0;  // p_hat + u - v >= min
    lp.G(3 * ng + g, ng + g) = 1.0;
    lp.h[3 * ng + g] = p_hat[g] - prob.limits.gen_min[g];
  }
  detail::fill_line_rows(adm, prob.limits, lp.G, lp.h, 4 * ng, 2 * ng);

  QpSolver local;
  QpSolver& ipm = solver ? *solver : local;
  sol.raw = ipm.solve(lp, Eigen::VectorXd::Zero(n), opts.qp());
  sol.status = sol.raw.status;
  sol.iterations = sol.raw.iterations;
  sol.duality_gap = sol.raw.gap;
  sol.kkt_residual = sol.raw.kkt_residual();

  sol.p_g = p_hat + sol.raw.x.head(ng) - sol.raw.x.segment(ng, ng);
  // Close the balance exactly through the slack generator.
  const int slack = net.slack_generator();
  sol.p_g[slack] += prob.load.sum() - sol.p_g.sum();
  detail::finish_dispatch(prob, sol);
  sol.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

}  // namespace calopf
