#include <gtest/gtest.h>

#include <random>

#include "calopf/calibration.hpp"
#include "calopf/case_io.hpp"
#include "calopf/dataset.hpp"
#include "calopf/dcopf.hpp"
#include "test_support.hpp"

using namespace calopf;
using calopf::testing::data_path;

namespace {

struct Instance {
  PowerNetwork net;
  AdmittanceSystem adm;
  Eigen::VectorXd load;
  EffectiveLimits limits;

  DcOpfProblem problem() const { return {net, adm, load, limits}; }
};

Instance make_instance(PowerNetwork net) {
  Instance in;
  in.adm = build_admittance(net);
  in.load = net.default_load();
  in.limits = default_limits(net);
  in.net = std::move(net);
  return in;
}

PowerNetwork three_bus_binding() {
  PowerNetwork net;
  net.name = "three";
  net.buses = {{1, 0.0}, {2, 0.0}, {3, 1.5}};
  // cheap generator at the slack, expensive one at bus 2; line 1-3 limits the cheap import
  net.generators = {{0, 0.0, 2.0, 10.0, 100.0, 0.0}, {1, 0.0, 2.0, 20.0, 300.0, 0.0}};
  net.branches = {{0, 1, 0.1, 2.0}, {1, 2, 0.1, 2.0}, {0, 2, 0.1, 0.8}};
  validate(net);
  return net;
}

// Minimum l1 distance over the feasible dispatch polytope of a network with two or three
// generators (generator 0 is the slack), by enumerating intersections of every pair of
// constraint or objective-kink lines in the space of the free generations.
double l1_vertex_oracle(const PowerNetwork& net, const Eigen::VectorXd& load, const EffectiveLimits& lim,
                        const Eigen::VectorXd& p_hat) {
  const int ng = static_cast<int>(net.n_generators());
  const int nf = ng - 1;
  const double total = load.sum();
  Eigen::VectorXd inj = -load;
  inj[net.slack_bus] += total;
  const Eigen::VectorXd f0 = calopf::testing::oracle_flows(net, inj);
  std::vector<Eigen::VectorXd> dir;
  for (int j = 1; j < ng; ++j) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.n_buses()));
    u[net.generators[static_cast<std::size_t>(j)].bus] += 1.0;
    u[net.slack_bus] -= 1.0;
    dir.push_back(calopf::testing::oracle_flows(net, u));
  }
  // rows a.q <= b in the free variables q
  std::vector<std::pair<Eigen::VectorXd, double>> rows;
  auto add = [&](Eigen::VectorXd a, double b) { rows.emplace_back(std::move(a), b); };
  for (int j = 0; j < nf; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(nf);
    e[j] = 1.0;
    add(e, lim.gen_max[j + 1]);
    add(-e, -lim.gen_min[j + 1]);
  }
  add(-Eigen::VectorXd::Ones(nf), lim.gen_max[0] - total);
  add(Eigen::VectorXd::Ones(nf), total - lim.gen_min[0]);
  for (Eigen::Index k = 0; k < f0.size(); ++k) {
    Eigen::VectorXd a(nf);
    for (int j = 0; j < nf; ++j) a[j] = dir[static_cast<std::size_t>(j)][k];
    add(a, lim.line_capacity[k] - f0[k]);
    add(-a, lim.line_capacity[k] + f0[k]);
  }
  // kink lines are only candidate hyperplanes, not constraints
  std::vector<std::pair<Eigen::VectorXd, double>> planes = rows;
  for (int j = 0; j < nf; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(nf);
    e[j] = 1.0;
    planes.emplace_back(e, p_hat[j + 1]);
  }
  planes.emplace_back(Eigen::VectorXd::Ones(nf), total - p_hat[0]);

  auto objective = [&](const Eigen::VectorXd& q) {
    double d = std::abs(total - q.sum() - p_hat[0]);
    for (int j = 0; j < nf; ++j) d += std::abs(q[j] - p_hat[j + 1]);
    return d;
  };
  auto feasible = [&](const Eigen::VectorXd& q) {
    for (const auto& [a, b] : rows)
      if (a.dot(q) > b + 1e-9) return false;
    return true;
  };
  double best = std::numeric_limits<double>::infinity();
  if (nf == 1) {
    for (const auto& [a, b] : planes) {
      if (std::abs(a[0]) < 1e-14) continue;
      Eigen::VectorXd q(1);
      q[0] = b / a[0];
      if (feasible(q)) best = std::min(best, objective(q));
    }
  } else {
    for (std::size_t i = 0; i < planes.size(); ++i)
      for (std::size_t j = i + 1; j < planes.size(); ++j) {
        Eigen::Matrix2d m;
        m.row(0) = planes[i].first.transpose();
        m.row(1) = planes[j].first.transpose();
        if (std::abs(m.determinant()) < 1e-12) continue;
        const Eigen::Vector2d q2 = calopf::testing::gauss_solve(m, Eigen::Vector2d(planes[i].second, planes[j].second));
        const Eigen::VectorXd q = q2;
        if (feasible(q)) best = std::min(best, objective(q));
      }
  }
  return best;
}

// Redraws until the original-limit dispatch problem is solvable.
Instance feasible_instance(std::mt19937_64& rng, int n_lo, int n_hi, int ng_lo, int ng_hi, double cap_lo = 0.15,
                           double cap_hi = 0.8) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    auto in = make_instance(calopf::testing::random_network(rng, calopf::testing::uniform_int(rng, n_lo, n_hi),
                                                            calopf::testing::uniform_int(rng, ng_lo, ng_hi), cap_lo, cap_hi));
    if (solve_dcopf(in.problem()).status == SolveStatus::optimal) return in;
  }
  throw std::runtime_error("no feasible random instance");
}

}  // namespace

TEST(EvaluateCost, Examples) {
  PowerNetwork net;
  net.generators = {{0, 0.0, 10.0, 1.0, 2.0, 3.0}};
  EXPECT_DOUBLE_EQ(evaluate_cost(net, Eigen::VectorXd::Constant(1, 0.0)), 3.0);
  EXPECT_DOUBLE_EQ(evaluate_cost(net, Eigen::VectorXd::Constant(1, 2.0)), 11.0);
  EXPECT_THROW(evaluate_cost(net, Eigen::VectorXd::Zero(2)), std::invalid_argument);
}

TEST(SolveDcopf, TwoBusSingleDispatch) {
  const auto in = make_instance(parse_case(data_path("case2_toy.m")));
  const auto sol = solve_dcopf(in.problem());
  ASSERT_EQ(sol.status, SolveStatus::optimal);
  EXPECT_NEAR(sol.p_g[0] * 100.0, 50.0, 1e-6);
  EXPECT_NEAR(sol.cost, 2500.0, 1e-4);
  EXPECT_NEAR(sol.flow[0] * 100.0, 50.0, 1e-6);
  EXPECT_EQ(sol.theta[0], 0.0);
  EXPECT_LE(sol.kkt_residual, 1e-8);
  EXPECT_LE(sol.duality_gap, 1e-8);
}

TEST(SolveDcopf, SingleBusBalanceOnly) {
  PowerNetwork net;
  net.buses = {{1, 0.7}};
  net.generators = {{0, 0.0, 2.0, 5.0, 10.0, 1.0}};
  validate(net);
  const auto in = make_instance(net);
  const auto sol = solve_dcopf(in.problem());
  ASSERT_EQ(sol.status, SolveStatus::optimal);
  EXPECT_NEAR(sol.p_g[0], 0.7, 1e-9);
  ASSERT_EQ(sol.theta.size(), 1);
  EXPECT_EQ(sol.theta[0], 0.0);
}

TEST(SolveDcopf, ThreeBusBindingLineMatchesGridSearch) {
  const auto in = make_instance(three_bus_binding());
  const auto sol = solve_dcopf(in.problem());
  ASSERT_EQ(sol.status, SolveStatus::optimal);
  calopf::testing::BruteForceDispatch oracle(in.net, in.load, in.limits.line_capacity, in.limits.gen_min, in.limits.gen_max);
  const auto ref = oracle.solve();
  ASSERT_TRUE(ref.feasible);
  EXPECT_NEAR(sol.p_g[0], ref.p_g[0], 1e-4);
  EXPECT_NEAR(sol.p_g[1], ref.p_g[1], 1e-4);
  EXPECT_NEAR(sol.cost, ref.cost, 1e-4 * ref.cost);
  // the limited line is at its bound
  EXPECT_NEAR(std::abs(sol.flow[2]), 0.8, 1e-6);
}

TEST(SolveDcopf, Case30CostConsistency) {
  const auto in = make_instance(parse_case(data_path("case30.m")));
  const auto sol = solve_dcopf(in.problem());
  ASSERT_EQ(sol.status, SolveStatus::optimal);
  double constant = 0.0;
  for (const auto& g : in.net.generators) constant += g.c0;
  EXPECT_NEAR(evaluate_cost(in.net, sol.p_g), sol.raw.objective + constant, 1e-6 * sol.cost);
  EXPECT_TRUE(find_violations(in.net, in.limits, sol.p_g, sol.flow, in.load).empty());
}

TEST(SolveDcopf, ReproducibleCost) {
  const auto in = make_instance(parse_case(data_path("case30.m")));
  const auto a = solve_dcopf(in.problem());
  const auto b = solve_dcopf(in.problem());
  EXPECT_LE(std::abs(a.cost - b.cost), 1e-9 * std::abs(a.cost));
  EXPECT_EQ(a.p_g, b.p_g);
}

TEST(SolveDcopf, OverloadedSystemIsInfeasible) {
  auto net = parse_case(data_path("case2_toy.m"));
  net.buses[1].load = 1.5;  // generator max is 1.0 pu
  const auto in = make_instance(net);
  const auto sol = solve_dcopf(in.problem());
  EXPECT_TRUE(sol.possibly_infeasible);
  EXPECT_EQ(sol.status, SolveStatus::infeasible);
}

TEST(SolveDcopf, LineLimitedSystemIsInfeasible) {
  auto net = parse_case(data_path("case2_toy.m"));
  net.branches[0].capacity = 0.3;  // load 0.5 pu can never be delivered
  const auto in = make_instance(net);
  const auto sol = solve_dcopf(in.problem());
  EXPECT_FALSE(sol.possibly_infeasible);
  EXPECT_EQ(sol.status, SolveStatus::infeasible);
}

TEST(SolveDcopf, IterationCap) {
  const auto in = make_instance(parse_case(data_path("case30.m")));
  SolverOptions opts;
  opts.max_iter = 2;
  EXPECT_EQ(solve_dcopf(in.problem(), opts).status, SolveStatus::max_iterations);
}

TEST(SolveDcopf, LoadDimensionChecked) {
  const auto in = make_instance(parse_case(data_path("case30.m")));
  DcOpfProblem p{in.net, in.adm, Eigen::VectorXd::Zero(3), in.limits};
  EXPECT_THROW(solve_dcopf(p), std::invalid_argument);
}

class RandomDispatch : public ::testing::TestWithParam<int> {};

TEST_P(RandomDispatch, MatchesBruteForceAndSatisfiesKkt) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(GetParam()) * 7919);
  int tried = 0;
  for (;;) {
    ++tried;
    ASSERT_LT(tried, 100) << "could not draw a feasible instance";
    const int n = calopf::testing::uniform_int(rng, 3, 10);
    const int ng = calopf::testing::uniform_int(rng, 2, 3);
    const auto in = make_instance(calopf::testing::random_network(rng, n, ng));
    calopf::testing::BruteForceDispatch oracle(in.net, in.load, in.limits.line_capacity, in.limits.gen_min, in.limits.gen_max);
    const auto ref = oracle.solve();
    if (!ref.feasible) continue;

    const auto sol = solve_dcopf(in.problem());
    ASSERT_EQ(sol.status, SolveStatus::optimal);
    EXPECT_LE((sol.p_g - ref.p_g).lpNorm<Eigen::Infinity>() * in.net.base_mva, 1e-2);
    EXPECT_LE(std::abs(sol.cost - ref.cost), 1e-4 * std::abs(ref.cost));

    const auto k = calopf::testing::kkt_of(build_dispatch_qp(in.problem()), sol.raw);
    EXPECT_LE(k.stationarity, 1e-8);
    EXPECT_LE(k.equality, 1e-8);
    EXPECT_LE(k.inequality, 1e-8);
    EXPECT_LE(k.complementarity, 1e-8);
    EXPECT_GT(k.min_sz, 0.0);
    EXPECT_EQ(sol.theta[in.net.slack_bus], 0.0);
    break;
  }
}

TEST_P(RandomDispatch, TighteningALineNeverLowersCost) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(GetParam()) * 104729);
  auto in = feasible_instance(rng, 3, 10, 3, 3, 0.4, 1.5);
  auto base = solve_dcopf(in.problem());
  for (int step = 0; step < 5; ++step) {
    const auto k = static_cast<Eigen::Index>(calopf::testing::uniform_int(rng, 0, static_cast<int>(in.net.n_branches()) - 1));
    in.limits.line_capacity[k] *= 0.8;
    const auto next = solve_dcopf(in.problem());
    if (next.status != SolveStatus::optimal) break;
    EXPECT_GE(next.cost, base.cost - 1e-7 * std::abs(base.cost));
    base = next;
  }
}

TEST_P(RandomDispatch, CalibratedOptimumFeasibleForOriginalLimits) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(GetParam()) * 15485863);
  DispatchSolution sol;
  Instance in;
  EffectiveLimits original;
  do {
    in = feasible_instance(rng, 3, 10, 3, 3, 0.4, 1.5);
    original = in.limits;
    in.limits = apply_plan(in.net, plan_from_percent(0.05));
    sol = solve_dcopf(in.problem());
  } while (sol.status != SolveStatus::optimal);
  EXPECT_TRUE(find_violations(in.net, original, sol.p_g, sol.flow, in.load).empty());
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomDispatch, ::testing::Range(1, 21));

TEST(L1Project, FeasiblePointUnchanged) {
  const auto in = make_instance(parse_case(data_path("case30.m")));
  const auto opt = solve_dcopf(in.problem());
  const auto proj = l1_project(in.problem(), opt.p_g);
  EXPECT_EQ(proj.p_g, opt.p_g);
  EXPECT_EQ(proj.status, SolveStatus::optimal);
}

TEST(L1Project, TwoBusSingleActiveBound) {
  auto net = parse_case(data_path("case2_toy.m"));
  net.buses[1].load = 1.0;
  const auto in = make_instance(net);
  const auto proj = l1_project(in.problem(), Eigen::VectorXd::Constant(1, 1.2));
  ASSERT_EQ(proj.status, SolveStatus::optimal);
  EXPECT_NEAR(proj.p_g[0] * 100.0, 100.0, 1e-8);
}

TEST(L1Project, InfeasibleOriginalProblemReported) {
  auto net = parse_case(data_path("case2_toy.m"));
  net.branches[0].capacity = 0.3;
  const auto in = make_instance(net);
  EXPECT_EQ(l1_project(in.problem(), Eigen::VectorXd::Constant(1, 0.5)).status, SolveStatus::infeasible);
}

TEST(L1Project, ThreeBusMatchesVertexEnumeration) {
  const auto in = make_instance(three_bus_binding());
  const auto opt = solve_dcopf(in.problem());
  Eigen::VectorXd p_hat = opt.p_g;
  p_hat[1] -= 0.2;  // pushes more power over the congested line
  const auto proj = l1_project(in.problem(), p_hat);
  ASSERT_EQ(proj.status, SolveStatus::optimal);
  const double dist = (proj.p_g - p_hat).lpNorm<1>();
  EXPECT_NEAR(dist, l1_vertex_oracle(in.net, in.load, in.limits, p_hat), 1e-7);
  EXPECT_TRUE(find_violations(in.net, in.limits, proj.p_g, proj.flow, in.load).empty());
}

TEST_P(RandomDispatch, ProjectionMatchesVertexEnumerationAndIsIdempotent) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(GetParam()) * 2654435761u);
  const auto in = feasible_instance(rng, 3, 8, 2, 3);
  const auto opt = solve_dcopf(in.problem());
  Eigen::VectorXd p_hat = opt.p_g;
  for (Eigen::Index g = 0; g < p_hat.size(); ++g) p_hat[g] += calopf::testing::uniform(rng, -0.3, 0.3);
  const auto proj = l1_project(in.problem(), p_hat);
  ASSERT_EQ(proj.status, SolveStatus::optimal);
  EXPECT_TRUE(find_violations(in.net, in.limits, proj.p_g, proj.flow, in.load).empty());
  EXPECT_NEAR((proj.p_g - p_hat).lpNorm<1>(), l1_vertex_oracle(in.net, in.load, in.limits, p_hat), 1e-7);
  const auto again = l1_project(in.problem(), proj.p_g);
  EXPECT_LE((again.p_g - proj.p_g).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(SolveDcopf, NearDegenerateCalibratedSampleConverges) {
  // this load stalls the dual residual just above 1e-8 before the reduced system degrades
  const auto in = make_instance(parse_case(data_path("case30.m")));
  const auto lim = apply_plan(in.net, plan_from_percent(0.07));
  const auto s = sample_load(in.net, {1.0, 1.3}, 1, 6);
  const DcOpfProblem p{in.net, in.adm, s.load, lim};
  const auto sol = solve_dcopf(p);
  ASSERT_EQ(sol.status, SolveStatus::optimal);
  const auto k = calopf::testing::kkt_of(build_dispatch_qp(p), sol.raw);
  EXPECT_LE(std::max({k.stationarity, k.equality, k.inequality}), 1e-6);
  EXPECT_LE(k.complementarity, 1e-6);
  EXPECT_TRUE(find_violations(in.net, lim, sol.p_g, sol.flow, s.load).empty());
  const auto plain = solve_dcopf(DcOpfProblem{in.net, in.adm, s.load, in.limits});
  EXPECT_GE(sol.cost, plain.cost - 1e-9 * plain.cost);
}
