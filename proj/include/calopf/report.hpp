#pragma once

// Evaluation reports. Aggregates are pure functions of the per-instance rows, and the
// CSV form prints doubles with 17 significant digits so that re-aggregating a parsed
// CSV reproduces the aggregate block bit for bit.

#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "calopf/errors.hpp"
#include "json.hpp"

namespace calopf {

struct InstanceRow {
  std::uint64_t index = 0;
  bool feasible_direct = false;  // before any projection
  bool line_ok = false;
  bool gen_ok = false;           // slack and other generator bounds
  bool projected = false;
  double cost_dnn = 0.0;         // $/h, final dispatch
  double cost_ref = 0.0;         // $/h, solver optimum under the original limits
  double time_dnn = 0.0;         // seconds, whole prediction pipeline
  double time_solver = 0.0;      // seconds, cold interior-point solve
  double ratio = 0.0;            // time_solver / time_dnn
};

struct Aggregates {
  std::size_t n = 0;
  double feasibility_rate = 0.0;  // %
  double line_feasibility_rate = 0.0;
  double gen_feasibility_rate = 0.0;
  double avg_cost_dnn = 0.0;
  double avg_cost_ref = 0.0;
  double optimality_loss = 0.0;  // %, mean of per-instance relative excess
  double avg_time_dnn_ms = 0.0;
  double avg_time_solver_ms = 0.0;
  double avg_speedup = 0.0;      // mean of per-instance ratios
  std::size_t projected = 0;

  bool operator==(const Aggregates&) const = default;
};

inline Aggregates aggregate(const std::vector<InstanceRow>& rows) {
  Aggregates a;
  a.n = rows.size();
  if (rows.empty()) return a;
  std::size_t feasible = 0, line_ok = 0, gen_ok = 0;
  double cost_dnn = 0, cost_ref = 0, loss = 0, t_dnn = 0, t_solver = 0, ratio = 0;
  for (const auto& r : rows) {
    feasible += r.feasible_direct;
    line_ok += r.line_ok;
    gen_ok += r.gen_ok;
    a.projected += r.projected;
    cost_dnn += r.cost_dnn;
    cost_ref += r.cost_ref;
    loss += (r.cost_dnn - r.cost_ref) / r.cost_ref;
    t_dnn += r.time_dnn;
    t_solver += r.time_solver;
    ratio += r.ratio;
  }
  const double n = static_cast<double>(rows.size());
  a.feasibility_rate = 100.0 * static_cast<double>(feasible) / n;
  a.line_feasibility_rate = 100.0 * static_cast<double>(line_ok) / n;
  a.gen_feasibility_rate = 100.0 * static_cast<double>(gen_ok) / n;
  a.avg_cost_dnn = cost_dnn / n;
  a.avg_cost_ref = cost_ref / n;
  a.optimality_loss = 100.0 * loss / n;
  a.avg_time_dnn_ms = 1e3 * t_dnn / n;
  a.avg_time_solver_ms = 1e3 * t_solver / n;
  a.avg_speedup = ratio / n;
  return a;
}

struct EvaluationReport {
  std::vector<InstanceRow> rows;
  Aggregates agg;
  nlohmann::json config;  // case, calibration, seeds, sizes, regime, fallback
};

inline nlohmann::json to_json(const Aggregates& a) {
  return {{"n", a.n},
          {"feasibility_rate", a.feasibility_rate},
          {"line_feasibility_rate", a.line_feasibility_rate},
          {"gen_feasibility_rate", a.gen_feasibility_rate},
          {"avg_cost_dnn", a.avg_cost_dnn},
          {"avg_cost_ref", a.avg_cost_ref},
          {"optimality_loss", a.optimality_loss},
          {"avg_time_dnn_ms", a.avg_time_dnn_ms},
          {"avg_time_solver_ms", a.avg_time_solver_ms},
          {"avg_speedup", a.avg_speedup},
          {"projected", a.projected}};
}

inline constexpr const char* kInstanceCsvHeader =
    "index,feasible_direct,line_ok,gen_ok,projected,cost_dnn,cost_ref,time_dnn,time_solver,ratio";

inline std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string instances_csv(const std::vector<InstanceRow>& rows) {
  std::string out = std::string(kInstanceCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.index) + "," + (r.feasible_direct ? "1" : "0") + "," + (r.line_ok ? "1" : "0") + "," +
           (r.gen_ok ? "1" : "0") + "," + (r.projected ? "1" : "0") + "," + format_g17(r.cost_dnn) + "," +
           format_g17(r.cost_ref) + "," + format_g17(r.time_dnn) + "," + format_g17(r.time_solver) + "," +
           format_g17(r.ratio) + "\n";
  }
  return out;
}

inline std::vector<InstanceRow> parse_instances_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kInstanceCsvHeader) throw FormatError("instance CSV header mismatch");
  std::vector<InstanceRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw FormatError("instance CSV line " + std::to_string(line_no) + ": expected 10 fields");
    try {
      InstanceRow r;
      r.index = std::stoull(f[0]);
      r.feasible_direct = f[1] == "1";
      r.line_ok = f[2] == "1";
      r.gen_ok = f[3] == "1";
      r.projected = f[4] == "1";
      r.cost_dnn = std::stod(f[5]);
      r.cost_ref = std::stod(f[6]);
      r.time_dnn = std::stod(f[7]);
      r.time_solver = std::stod(f[8]);
      r.ratio = std::stod(f[9]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw FormatError("instance CSV line " + std::to_string(line_no) + ": malformed number");
    }
  }
  return rows;
}

inline constexpr const char* kSummaryCsvHeader =
    "case,calibration_pct,n,feasibility_rate,line_feasibility_rate,gen_feasibility_rate,avg_cost_dnn,avg_cost_ref,"
    "optimality_loss_pct,avg_time_dnn_ms,avg_time_solver_ms,avg_speedup,projected";

inline std::string summary_csv_row(const std::string& case_name, double calibration_pct, const Aggregates& a) {
  return case_name + "," + format_g17(calibration_pct) + "," + std::to_string(a.n) + "," + format_g17(a.feasibility_rate) +
         "," + format_g17(a.line_feasibility_rate) + "," + format_g17(a.gen_feasibility_rate) + "," +
         format_g17(a.avg_cost_dnn) + "," + format_g17(a.avg_cost_ref) + "," + format_g17(a.optimality_loss) + "," +
         format_g17(a.avg_time_dnn_ms) + "," + format_g17(a.avg_time_solver_ms) + "," + format_g17(a.avg_speedup) + "," +
         std::to_string(a.projected);
}

struct SummaryLine {
  std::string case_name;
  double calibration_pct = 0.0;
  Aggregates agg;
  std::string error;  // non-empty when this configuration failed
};

inline std::string summary_csv(const std::vector<SummaryLine>& lines) {
  std::string out = std::string(kSummaryCsvHeader) + "\n";
  for (const auto& l : lines)
    if (l.error.empty()) out += summary_csv_row(l.case_name, l.calibration_pct, l.agg) + "\n";
  return out;
}

/// Comparison table: one row per configuration, columns as in the usual feasibility /
/// cost / loss / runtime / speedup layout.
inline std::string markdown_table(const std::vector<SummaryLine>& lines) {
  std::string out =
      "| Case | Calibration (%) | Feasibility rate (%) | Cost DNN ($/h) | Cost Ref. ($/h) | Loss (%) | "
      "Time DNN (ms) | Time Ref. (ms) | Speedup |\n"
      "|---|---|---|---|---|---|---|---|---|\n";
  char buf[512];
  for (const auto& l : lines) {
    if (!l.error.empty()) {
      std::snprintf(buf, sizeof buf, "| %s | %g | failed: %s | | | | | | |\n", l.case_name.c_str(), l.calibration_pct,
                    l.error.c_str());
    } else {
      const auto& a = l.agg;
      std::snprintf(buf, sizeof buf, "| %s | %g | %.2f | %.1f | %.1f | %.2f | %.3f | %.3f | x%.0f |\n", l.case_name.c_str(),
                    l.calibration_pct, a.feasibility_rate, a.avg_cost_dnn, a.avg_cost_ref, a.optimality_loss,
                    a.avg_time_dnn_ms, a.avg_time_solver_ms, a.avg_speedup);
    }
    out += buf;
  }
  return out;
}

}  // namespace calopf
