#pragma once

// Reader for the subset of the MATPOWER case format this library uses.
//
// Grammar (one statement per assignment, `%` starts a comment):
//
//   function mpc = <name>
//   mpc.baseMVA = <number>;
//   mpc.<table> = [ <row> ; <row> ; ... ];     rows end with ';' or a newline,
//                                              values split by whitespace or ','
//   mpc.<other> = <anything>;                  ignored with a warning
//   mpc.<cell>  = { ... };                     ignored with a warning
//
// Only bus, gen, branch and gencost feed the model. Column layout follows
// MATPOWER version 2:
//   bus:     bus_i type Pd ...           (type 3 = reference, 4 = isolated)
//   gen:     bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin ...
//   branch:  fbus tbus r x b rateA rateB rateC ratio angle status ...
//   gencost: model startup shutdown n c(n-1) ... c0   (model 2 only, n <= 3)

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "calopf/errors.hpp"
#include "calopf/grid_model.hpp"

namespace calopf {

struct MatpowerRow {
  std::vector<double> values;
  int line = 0;
};

struct MatpowerTables {
  std::string function_name;
  double base_mva = 0.0;
  int base_mva_line = 0;
  std::map<std::string, std::vector<MatpowerRow>> tables;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string_view strip_comment(std::string_view line) {
  bool in_quote = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\'') in_quote = !in_quote;
    if (line[i] == '%' && !in_quote) return line.substr(0, i);
  }
  return line;
}

inline double parse_number(std::string_view tok, int line, const std::string& field) {
  std::string_view t = tok;
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw ParseError("cannot parse '" + std::string(tok) + "' as a number in " + field, line, field);
  return v;
}

inline void split_values(std::string_view text, int line, const std::string& table, std::vector<double>& out) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == ',' || text[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < text.size() && !(text[j] == ' ' || text[j] == '\t' || text[j] == ',' || text[j] == '\r')) ++j;
    if (j > i) out.push_back(parse_number(text.substr(i, j - i), line, table));
    i = j;
  }
}

}  // namespace detail

/// Tokenizes a MATPOWER-style text into named numeric tables.
inline MatpowerTables read_matpower_tables(std::istream& in) {
  MatpowerTables out;
  std::string raw;
  int lineno = 0;

  enum class State { top, matrix, skip_block };
  State state = State::top;
  std::string current;
  char closer = ']';
  MatpowerRow pending;

  auto flush_row = [&](std::vector<MatpowerRow>& rows) {
    if (!pending.values.empty()) rows.push_back(std::move(pending));
    pending = MatpowerRow{};
  };

  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = detail::strip_comment(raw);

    while (true) {
      line = detail::trim(line);
      if (line.empty()) break;

      if (state == State::skip_block) {
        const auto pos = line.find(closer);
        if (pos == std::string_view::npos) break;
        state = State::top;
        line.remove_prefix(pos + 1);
        continue;
      }

      if (state == State::matrix) {
        auto& rows = out.tables[current];
        const auto close = line.find(']');
        std::string_view body = close == std::string_view::npos ? line : line.substr(0, close);
        std::size_t start = 0;
        while (true) {
          const auto semi = body.find(';', start);
          const auto piece = body.substr(start, semi == std::string_view::npos ? std::string_view::npos : semi - start);
          if (pending.values.empty()) pending.line = lineno;
          detail::split_values(piece, lineno, current, pending.values);
          if (semi == std::string_view::npos) break;
          flush_row(rows);
          start = semi + 1;
        }
        if (close == std::string_view::npos) {
          flush_row(rows);  // newline ends a row
          break;
        }
        flush_row(rows);
        state = State::top;
        line.remove_prefix(close + 1);
        if (!line.empty() && line.front() == ';') line.remove_prefix(1);
        continue;
      }

      // top level
      if (line.rfind("function", 0) == 0) {
        const auto eq = line.find('=');
        if (eq != std::string_view::npos) out.function_name = std::string(detail::trim(line.substr(eq + 1)));
        break;
      }
      if (line.rfind("mpc.", 0) != 0)
        throw ParseError("expected an 'mpc.<field> = ...' statement, got '" + std::string(line) + "'", lineno);
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError("missing '=' in assignment", lineno);
      const std::string name(detail::trim(line.substr(4, eq - 4)));
      std::string_view rhs = detail::trim(line.substr(eq + 1));

      if (!rhs.empty() && rhs.front() == '[') {
        if (out.tables.count(name)) throw ParseError("table '" + name + "' assigned twice", lineno, name);
        out.tables[name];
        current = name;
        state = State::matrix;
        line = rhs.substr(1);
        continue;
      }
      if (!rhs.empty() && rhs.front() == '{') {
        out.warnings.push_back("ignoring cell array mpc." + name);
        state = State::skip_block;
        closer = '}';
        line = rhs.substr(1);
        continue;
      }
      const auto semi = rhs.find(';');
      const std::string_view value = detail::trim(rhs.substr(0, semi));
      if (name == "baseMVA") {
        out.base_mva = detail::parse_number(value, lineno, "baseMVA");
        out.base_mva_line = lineno;
      } else if (name != "version") {
        out.warnings.push_back("ignoring field mpc." + name);
      }
      if (semi == std::string_view::npos) break;
      line = rhs.substr(semi + 1);
    }
  }
  if (state != State::top) throw ParseError("unterminated matrix or block for '" + current + "'", lineno, current);
  return out;
}

namespace detail {

inline const std::vector<MatpowerRow>& require_table(const MatpowerTables& t, const std::string& name) {
  const auto it = t.tables.find(name);
  if (it == t.tables.end()) throw ParseError("missing required table mpc." + name, 0, name);
  return it->second;
}

inline void require_columns(const MatpowerRow& row, std::size_t n, const std::string& table) {
  if (row.values.size() < n)
    throw ParseError(table + " row has " + std::to_string(row.values.size()) + " columns, need at least " +
                         std::to_string(n),
                     row.line, table);
}

}  // namespace detail

/// Builds a validated PowerNetwork (per-unit) from parsed tables.
/// Non-fatal observations are appended to `warnings`.
inline PowerNetwork network_from_matpower(const MatpowerTables& t, std::string name,
                                          std::vector<std::string>* warnings = nullptr) {
  auto warn = [&](const std::string& w) {
    if (warnings) warnings->push_back(w);
  };
  for (const auto& w : t.warnings) warn(w);
  for (const auto& [tab, rows] : t.tables)
    if (tab != "bus" && tab != "gen" && tab != "branch" && tab != "gencost") warn("ignoring table mpc." + tab);

  if (!(t.base_mva > 0.0)) throw ParseError("mpc.baseMVA missing or non-positive", t.base_mva_line, "baseMVA");
  const double base = t.base_mva;

  PowerNetwork net;
  net.name = std::move(name);
  net.base_mva = base;

  const auto& bus_rows = detail::require_table(t, "bus");
  std::unordered_map<int, int> index_of;
  std::vector<int> ref_buses;
  for (const auto& row : bus_rows) {
    detail::require_columns(row, 3, "bus");
    const int id = static_cast<int>(row.values[0]);
    const int type = static_cast<int>(row.values[1]);
    if (static_cast<double>(id) != row.values[0]) throw ParseError("non-integer bus number", row.line, "bus");
    if (type == 4) throw ValidationError("bus " + std::to_string(id) + " is isolated (type 4); not supported");
    if (index_of.count(id)) throw ValidationError("duplicate bus number " + std::to_string(id));
    index_of[id] = static_cast<int>(net.buses.size());
    if (type == 3) ref_buses.push_back(static_cast<int>(net.buses.size()));
    net.buses.push_back(Bus{id, row.values[2] / base});
  }
  auto bus_index = [&](double raw, int line, const std::string& table) {
    const auto it = index_of.find(static_cast<int>(raw));
    if (it == index_of.end() || static_cast<double>(it->first) != raw)
      throw ValidationError(table + " row at line " + std::to_string(line) + " references unknown bus " +
                            std::to_string(static_cast<long long>(raw)));
    return it->second;
  };

  const auto& gen_rows = detail::require_table(t, "gen");
  const auto& cost_rows = detail::require_table(t, "gencost");
  if (cost_rows.size() < gen_rows.size())
    throw ParseError("gencost has fewer rows than gen", cost_rows.empty() ? 0 : cost_rows.back().line, "gencost");
  if (cost_rows.size() > gen_rows.size()) warn("ignoring reactive-power rows of mpc.gencost");

  std::map<int, std::size_t> gen_on_bus;
  for (std::size_t r = 0; r < gen_rows.size(); ++r) {
    const auto& row = gen_rows[r];
    detail::require_columns(row, 10, "gen");
    const auto& crow = cost_rows[r];
    detail::require_columns(crow, 4, "gencost");
    if (row.values[7] <= 0.0) {
      warn("skipping out-of-service generator at line " + std::to_string(row.line));
      continue;
    }
    Generator g;
    g.bus = bus_index(row.values[0], row.line, "gen");
    g.p_max = row.values[8] / base;
    g.p_min = row.values[9] / base;

    const int model = static_cast<int>(crow.values[0]);
    const int ncoef = static_cast<int>(crow.values[3]);
    if (model != 2)
      throw ValidationError("gencost line " + std::to_string(crow.line) + ": only polynomial cost (model 2) is supported");
    if (ncoef < 1 || ncoef > 3)
      throw ValidationError("gencost line " + std::to_string(crow.line) + ": polynomial degree above 2 not supported");
    detail::require_columns(crow, 4 + static_cast<std::size_t>(ncoef), "gencost");
    double coef[3] = {0.0, 0.0, 0.0};  // c2, c1, c0 in $/MW^k h
    for (int k = 0; k < ncoef; ++k) coef[3 - ncoef + k] = crow.values[4 + static_cast<std::size_t>(k)];
    g.c2 = coef[0] * base * base;
    g.c1 = coef[1] * base;
    g.c0 = coef[2];

    const auto it = gen_on_bus.find(g.bus);
    if (it == gen_on_bus.end()) {
      gen_on_bus[g.bus] = net.generators.size();
      net.generators.push_back(g);
      continue;
    }
    auto& prev = net.generators[it->second];
    if (prev.c2 != g.c2 || prev.c1 != g.c1 || prev.c0 != g.c0)
      throw ValidationError("bus " + std::to_string(net.buses[static_cast<std::size_t>(g.bus)].id) +
                            " hosts several generators with different costs; aggregate them in the case file");
    prev.p_min += g.p_min;
    prev.p_max += g.p_max;
    warn("aggregated identical-cost generators on bus " + std::to_string(net.buses[static_cast<std::size_t>(g.bus)].id));
  }

  const auto& br_rows = detail::require_table(t, "branch");
  for (const auto& row : br_rows) {
    detail::require_columns(row, 6, "branch");
    if (row.values.size() > 10 && row.values[10] <= 0.0) {
      warn("skipping out-of-service branch at line " + std::to_string(row.line));
      continue;
    }
    Branch b;
    b.from = bus_index(row.values[0], row.line, "branch");
    b.to = bus_index(row.values[1], row.line, "branch");
    b.x = row.values[3];
    b.capacity = row.values[5] / base;
    if (row.values[5] == 0.0)
      throw ValidationError("branch at line " + std::to_string(row.line) +
                            " has rateA = 0 (unlimited); a finite line rating is required");
    net.branches.push_back(b);
  }

  if (ref_buses.size() > 1) throw ValidationError("case declares more than one reference bus");
  if (ref_buses.size() == 1) {
    net.slack_bus = ref_buses.front();
  } else {
    int best = -1;
    for (const auto& g : net.generators)
      if (best < 0 || net.buses[static_cast<std::size_t>(g.bus)].id < net.buses[static_cast<std::size_t>(best)].id) best = g.bus;
    if (best < 0) throw ValidationError("no reference bus and no generators");
    net.slack_bus = best;
    warn("no reference bus declared; using bus " + std::to_string(net.buses[static_cast<std::size_t>(best)].id) + " as slack");
  }

  validate(net);
  return net;
}

inline PowerNetwork parse_matpower(std::istream& in, std::string name, std::vector<std::string>* warnings = nullptr) {
  auto tables = read_matpower_tables(in);
  if (name.empty()) name = tables.function_name;
  return network_from_matpower(tables, std::move(name), warnings);
}

inline PowerNetwork parse_matpower_file(const std::string& path, std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file '" + path + "'");
  return parse_matpower(in, {}, warnings);
}

}  // namespace calopf
