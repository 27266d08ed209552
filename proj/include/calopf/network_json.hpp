#pragma once

// Native JSON case format. Fields mirror PowerNetwork one-to-one (per-unit values):
//
// {
//   "schema_version": 1,
//   "name": "case30",
//   "base_mva": 100.0,
//   "slack_bus": 0,                                   // 0-based bus index
//   "buses":      [{"id": 1, "load": 0.0}, ...],
//   "generators": [{"bus": 0, "p_min": 0.0, "p_max": 0.8, "cost": [c2, c1, c0]}, ...],
//   "branches":   [{"from": 0, "to": 1, "x": 0.06, "capacity": 1.3}, ...]
// }

#include <cstdint>
#include <fstream>
#include <string>

#include "calopf/binary_io.hpp"
#include "calopf/errors.hpp"
#include "calopf/grid_model.hpp"
#include "json.hpp"

namespace calopf {

inline constexpr int kNetworkSchemaVersion = 1;

inline nlohmann::json network_to_json(const PowerNetwork& net) {
  nlohmann::json j;
  j["schema_version"] = kNetworkSchemaVersion;
  j["name"] = net.name;
  j["base_mva"] = net.base_mva;
  j["slack_bus"] = net.slack_bus;
  auto& buses = j["buses"] = nlohmann::json::array();
  for (const auto& b : net.buses) buses.push_back({{"id", b.id}, {"load", b.load}});
  auto& gens = j["generators"] = nlohmann::json::array();
  for (const auto& g : net.generators)
    gens.push_back({{"bus", g.bus}, {"p_min", g.p_min}, {"p_max", g.p_max}, {"cost", {g.c2, g.c1, g.c0}}});
  auto& brs = j["branches"] = nlohmann::json::array();
  for (const auto& b : net.branches) brs.push_back({{"from", b.from}, {"to", b.to}, {"x", b.x}, {"capacity", b.capacity}});
  return j;
}

namespace detail {

template <class T>
T json_field(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError("missing field '" + std::string(key) + "' in " + where, 0, key);
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError("field '" + std::string(key) + "' in " + where + " has the wrong type", 0, key);
  }
}

}  // namespace detail

/// Parses and validates; syntax problems raise ParseError, invariant problems ValidationError.
inline PowerNetwork network_from_json(const nlohmann::json& j) {
  const int version = detail::json_field<int>(j, "schema_version", "network");
  if (version != kNetworkSchemaVersion)
    throw ParseError("unsupported schema_version " + std::to_string(version), 0, "schema_version");
  PowerNetwork net;
  net.name = detail::json_field<std::string>(j, "name", "network");
  net.base_mva = detail::json_field<double>(j, "base_mva", "network");
  net.slack_bus = detail::json_field<int>(j, "slack_bus", "network");
  const auto buses = detail::json_field<nlohmann::json>(j, "buses", "network");
  const auto gens = detail::json_field<nlohmann::json>(j, "generators", "network");
  const auto brs = detail::json_field<nlohmann::json>(j, "branches", "network");
  if (!buses.is_array() || !gens.is_array() || !brs.is_array())
    throw ParseError("buses, generators and branches must be arrays");

  for (std::size_t i = 0; i < buses.size(); ++i) {
    const std::string where = "buses[" + std::to_string(i) + "]";
    net.buses.push_back(Bus{detail::json_field<int>(buses[i], "id", where), detail::json_field<double>(buses[i], "load", where)});
  }
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const std::string where = "generators[" + std::to_string(i) + "]";
    Generator g;
    g.bus = detail::json_field<int>(gens[i], "bus", where);
    g.p_min = detail::json_field<double>(gens[i], "p_min", where);
    g.p_max = detail::json_field<double>(gens[i], "p_max", where);
    const auto cost = detail::json_field<std::vector<double>>(gens[i], "cost", where);
    if (cost.size() != 3) throw ParseError(where + ".cost must hold [c2, c1, c0]", 0, "cost");
    g.c2 = cost[0];
    g.c1 = cost[1];
    g.c0 = cost[2];
    net.generators.push_back(g);
  }
  for (std::size_t i = 0; i < brs.size(); ++i) {
    const std::string where = "branches[" + std::to_string(i) + "]";
    net.branches.push_back(Branch{detail::json_field<int>(brs[i], "from", where), detail::json_field<int>(brs[i], "to", where),
                                  detail::json_field<double>(brs[i], "x", where),
                                  detail::json_field<double>(brs[i], "capacity", where)});
  }
  validate(net);
  return net;
}

inline PowerNetwork parse_network_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    int line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    throw ParseError(std::string("malformed JSON: ") + e.what(), line);
  }
  return network_from_json(j);
}

/// Content hash of the canonical JSON form; identifies a network in dataset and model files.
inline std::string network_hash(const PowerNetwork& net) { return hex64(fnv1a64(network_to_json(net).dump())); }

}  // namespace calopf
