#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "calopf/matpower.hpp"
#include "calopf/network_json.hpp"

namespace calopf {

enum class CaseFormat { matpower, native_json };

inline CaseFormat guess_case_format(const std::string& path) {
  return std::filesystem::path(path).extension() == ".json" ? CaseFormat::native_json : CaseFormat::matpower;
}

inline PowerNetwork parse_case(const std::string& path, CaseFormat format, std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file '" + path + "'");
  if (format == CaseFormat::native_json) return parse_network_json(slurp(in));
  auto net = parse_matpower(in, {}, warnings);
  if (net.name.empty()) net.name = std::filesystem::path(path).stem().string();
  return net;
}

inline PowerNetwork parse_case(const std::string& path, std::vector<std::string>* warnings = nullptr) {
  return parse_case(path, guess_case_format(path), warnings);
}

inline void write_network_json(const PowerNetwork& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << network_to_json(net).dump(2) << '\n';
}

}  // namespace calopf
