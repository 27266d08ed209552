#pragma once

// Immutable grid description and the DC linear-algebra objects built from it.
// All quantities are per-unit on base_mva; cost coefficients are rescaled so that
// cost($/h) = c2*p^2 + c1*p + c0 with p in per-unit.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "calopf/errors.hpp"

namespace calopf {

struct Bus {
  int id = 0;          // external bus number from the case file
  double load = 0.0;   // default active load

  bool operator==(const Bus&) const = default;
};

struct Generator {
  int bus = 0;  // internal (0-based) bus index
  double p_min = 0.0;
  double p_max = 0.0;
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;

  double cost(double p) const { return (c2 * p + c1) * p + c0; }

  bool operator==(const Generator&) const = default;
};

struct Branch {
  int from = 0;
  int to = 0;
  double x = 0.0;
  double capacity = 0.0;

  bool operator==(const Branch&) const = default;
};

struct PowerNetwork {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Branch> branches;
  int slack_bus = 0;

  std::size_t n_buses() const { return buses.size(); }
  std::size_t n_generators() const { return generators.size(); }
  std::size_t n_branches() const { return branches.size(); }

  Eigen::VectorXd default_load() const {
    Eigen::VectorXd d(static_cast<Eigen::Index>(buses.size()));
    for (std::size_t i = 0; i < buses.size(); ++i) d[static_cast<Eigen::Index>(i)] = buses[i].load;
    return d;
  }

  /// Index of the generator hosted by the slack bus.
  int slack_generator() const {
    for (std::size_t g = 0; g < generators.size(); ++g)
      if (generators[g].bus == slack_bus) return static_cast<int>(g);
    throw ValidationError("slack bus hosts no generator");
  }

  /// Buses whose default load is nonzero: the learning inputs.
  std::vector<int> load_buses() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].load != 0.0) out.push_back(static_cast<int>(i));
    return out;
  }

  bool operator==(const PowerNetwork&) const = default;
};

/// Generators with a nonzero output range, excluding the slack: the prediction targets.
inline std::vector<int> predicted_generators(const PowerNetwork& net) {
  std::vector<int> out;
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const auto& gen = net.generators[g];
    if (gen.bus == net.slack_bus) continue;
    if (gen.p_max - gen.p_min <= 0.0) continue;
    out.push_back(static_cast<int>(g));
  }
  return out;
}

/// Limits actually enforced by a solve; either the network defaults or a calibrated copy.
struct EffectiveLimits {
  Eigen::VectorXd line_capacity;
  Eigen::VectorXd gen_min;
  Eigen::VectorXd gen_max;

  bool operator==(const EffectiveLimits& o) const {
    return line_capacity.size() == o.line_capacity.size() && gen_min.size() == o.gen_min.size() &&
           gen_max.size() == o.gen_max.size() && line_capacity == o.line_capacity && gen_min == o.gen_min &&
           gen_max == o.gen_max;
  }
};

inline EffectiveLimits default_limits(const PowerNetwork& net) {
  EffectiveLimits lim;
  const auto ne = static_cast<Eigen::Index>(net.n_branches());
  const auto ng = static_cast<Eigen::Index>(net.n_generators());
  lim.line_capacity.resize(ne);
  lim.gen_min.resize(ng);
  lim.gen_max.resize(ng);
  for (Eigen::Index k = 0; k < ne; ++k) lim.line_capacity[k] = net.branches[static_cast<std::size_t>(k)].capacity;
  for (Eigen::Index g = 0; g < ng; ++g) {
    lim.gen_min[g] = net.generators[static_cast<std::size_t>(g)].p_min;
    lim.gen_max[g] = net.generators[static_cast<std::size_t>(g)].p_max;
  }
  return lim;
}

namespace detail {

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
      parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
      a = parent[static_cast<std::size_t>(a)];
    }
    return a;
  }
  void unite(int a, int b) { parent[static_cast<std::size_t>(find(a))] = find(b); }
};

}  // namespace detail

/// Throws ValidationError describing the first violated network invariant.
inline void validate(const PowerNetwork& net) {
  const int n = static_cast<int>(net.n_buses());
  if (!(net.base_mva > 0.0)) throw ValidationError("base_mva must be positive");
  if (n == 0) throw ValidationError("network has no buses");
  if (net.slack_bus < 0 || net.slack_bus >= n) throw ValidationError("slack bus index out of range");

  std::vector<int> gens_at(static_cast<std::size_t>(n), 0);
  for (std::size_t g = 0; g < net.generators.size(); ++g) {
    const auto& gen = net.generators[g];
    const std::string tag = "generator " + std::to_string(g);
    if (gen.bus < 0 || gen.bus >= n) throw ValidationError(tag + ": bus index out of range");
    if (!std::isfinite(gen.p_min) || !std::isfinite(gen.p_max))
      throw ValidationError(tag + ": limits must be finite");
    if (gen.p_min > gen.p_max) throw ValidationError(tag + ": p_min exceeds p_max");
    if (gen.c2 < 0.0) throw ValidationError(tag + ": quadratic cost coefficient must be nonnegative");
    if (++gens_at[static_cast<std::size_t>(gen.bus)] > 1)
      throw ValidationError(tag + ": more than one generator on bus " + std::to_string(net.buses[static_cast<std::size_t>(gen.bus)].id));
  }
  if (gens_at[static_cast<std::size_t>(net.slack_bus)] == 0) throw ValidationError("slack bus hosts no generator");

  detail::DisjointSets sets(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    const auto& br = net.branches[k];
    const std::string tag = "branch " + std::to_string(k);
    if (br.from < 0 || br.from >= n || br.to < 0 || br.to >= n) throw ValidationError(tag + ": endpoint out of range");
    if (br.from == br.to) throw ValidationError(tag + ": self loop");
    if (!(br.x > 0.0) || !std::isfinite(br.x)) throw ValidationError(tag + ": reactance must be strictly positive");
    if (!(br.capacity > 0.0) || !std::isfinite(br.capacity))
      throw ValidationError(tag + ": capacity must be strictly positive");
    sets.unite(br.from, br.to);
  }
  const int root = sets.find(0);
  for (int i = 1; i < n; ++i)
    if (sets.find(i) != root)
      throw ValidationError("network is disconnected: bus " + std::to_string(net.buses[static_cast<std::size_t>(i)].id) +
                            " is not reachable from bus " + std::to_string(net.buses[0].id));
}

/// DC susceptance Laplacian, branch-flow matrix and their slack-reduced forms.
/// Holds a Cholesky factorization of the reduced matrix for repeated angle solves.
struct AdmittanceSystem {
  Eigen::MatrixXd b_full;
  Eigen::MatrixXd b_reduced;
  Eigen::MatrixXd x_incidence;          // flow_k = sum_i X(k,i) theta_i, entries +-1/x
  Eigen::MatrixXd x_incidence_reduced;  // slack column removed
  std::vector<int> reduced_to_bus;      // reduced index -> bus index
  std::vector<int> bus_to_reduced;      // bus index -> reduced index, -1 at the slack
  int slack_bus = 0;
  Eigen::LLT<Eigen::MatrixXd> factor;

  Eigen::Index n_reduced() const { return b_reduced.rows(); }

  /// Drops the slack entry of a per-bus vector.
  Eigen::VectorXd reduce(const Eigen::VectorXd& per_bus) const {
    Eigen::VectorXd out(n_reduced());
    for (Eigen::Index r = 0; r < out.size(); ++r) out[r] = per_bus[reduced_to_bus[static_cast<std::size_t>(r)]];
    return out;
  }

  /// Inserts a zero at the slack.
  Eigen::VectorXd expand(const Eigen::VectorXd& reduced) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(bus_to_reduced.size()));
    for (Eigen::Index r = 0; r < reduced.size(); ++r) out[reduced_to_bus[static_cast<std::size_t>(r)]] = reduced[r];
    return out;
  }

  /// Full angle vector (slack = 0) for a per-bus net injection vector.
  Eigen::VectorXd angles_from_injection(const Eigen::VectorXd& injection) const {
    if (n_reduced() == 0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(bus_to_reduced.size()));
    return expand(factor.solve(reduce(injection)));
  }

  Eigen::VectorXd flows(const Eigen::VectorXd& theta) const { return x_incidence * theta; }
};

inline AdmittanceSystem build_admittance(const PowerNetwork& net) {
  const auto n = static_cast<Eigen::Index>(net.n_buses());
  const auto ne = static_cast<Eigen::Index>(net.n_branches());
  AdmittanceSystem adm;
  adm.slack_bus = net.slack_bus;
  adm.b_full = Eigen::MatrixXd::Zero(n, n);
  adm.x_incidence = Eigen::MatrixXd::Zero(ne, n);
  for (Eigen::Index k = 0; k < ne; ++k) {
    const auto& br = net.branches[static_cast<std::size_t>(k)];
    const double b = 1.0 / br.x;
    adm.b_full(br.from, br.from) += b;
    adm.b_full(br.to, br.to) += b;
    adm.b_full(br.from, br.to) -= b;
    adm.b_full(br.to, br.from) -= b;
    adm.x_incidence(k, br.from) = b;
    adm.x_incidence(k, br.to) = -b;
  }

  adm.bus_to_reduced.assign(static_cast<std::size_t>(n), -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i == net.slack_bus) continue;
    adm.bus_to_reduced[static_cast<std::size_t>(i)] = static_cast<int>(adm.reduced_to_bus.size());
    adm.reduced_to_bus.push_back(static_cast<int>(i));
  }
  const auto nr = static_cast<Eigen::Index>(adm.reduced_to_bus.size());
  adm.b_reduced.resize(nr, nr);
  adm.x_incidence_reduced.resize(ne, nr);
  for (Eigen::Index c = 0; c < nr; ++c) {
    const int bc = adm.reduced_to_bus[static_cast<std::size_t>(c)];
    for (Eigen::Index r = 0; r < nr; ++r) adm.b_reduced(r, c) = adm.b_full(adm.reduced_to_bus[static_cast<std::size_t>(r)], bc);
    adm.x_incidence_reduced.col(c) = adm.x_incidence.col(bc);
  }

  if (nr > 0) {
    adm.factor.compute(adm.b_reduced);
    if (adm.factor.info() != Eigen::Success || !(adm.factor.rcond() > 0.0))
      throw NumericalError("reduced admittance matrix is singular (network disconnected?)");
  }
  return adm;
}

}  // namespace calopf
