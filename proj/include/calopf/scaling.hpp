#pragma once

// Scaling-factor encoding of a dispatch: alpha = (P - Pmin)/(Pmax - Pmin) for every
// predicted generator (non-slack, nonzero range). Fixed-output generators sit at Pmin
// and the slack closes the power balance.

#include <Eigen/Dense>

#include <algorithm>
#include <stdexcept>
#include <string>

#include "calopf/grid_model.hpp"

namespace calopf {

inline constexpr double kAlphaClampTolMw = 1e-6;

/// Throws std::invalid_argument if a predicted generator lies outside its bounds by more
/// than 1e-6 MW; smaller excursions are clamped.
inline Eigen::VectorXd encode_alpha(const PowerNetwork& net, const Eigen::VectorXd& p_g) {
  if (static_cast<std::size_t>(p_g.size()) != net.n_generators())
    throw std::invalid_argument("generation vector dimension does not match generator count");
  const auto pred = predicted_generators(net);
  const double tol = kAlphaClampTolMw / net.base_mva;
  Eigen::VectorXd alpha(static_cast<Eigen::Index>(pred.size()));
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const auto& gen = net.generators[static_cast<std::size_t>(pred[j])];
    const double p = p_g[pred[j]];
    if (p < gen.p_min - tol || p > gen.p_max + tol)
      throw std::invalid_argument("generator " + std::to_string(pred[j]) + " output outside its bounds");
    alpha[static_cast<Eigen::Index>(j)] = std::clamp((p - gen.p_min) / (gen.p_max - gen.p_min), 0.0, 1.0);
  }
  return alpha;
}

/// Full generation vector from scaling factors; the slack takes total load minus the rest.
inline Eigen::VectorXd decode_generation(const PowerNetwork& net, const Eigen::VectorXd& alpha, double total_load) {
  const auto pred = predicted_generators(net);
  if (static_cast<std::size_t>(alpha.size()) != pred.size())
    throw std::invalid_argument("alpha has " + std::to_string(alpha.size()) + " entries, network predicts " +
                                std::to_string(pred.size()) + " generators");
  Eigen::VectorXd p(static_cast<Eigen::Index>(net.n_generators()));
  for (std::size_t g = 0; g < net.n_generators(); ++g) p[static_cast<Eigen::Index>(g)] = net.generators[g].p_min;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const auto& gen = net.generators[static_cast<std::size_t>(pred[j])];
    p[pred[j]] = alpha[static_cast<Eigen::Index>(j)] * (gen.p_max - gen.p_min) + gen.p_min;
  }
  const int s = net.slack_generator();
  p[s] = 0.0;
  p[s] = total_load - p.sum();
  return p;
}

}  // namespace calopf
