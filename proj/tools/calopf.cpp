// calopf: dataset generation, training, evaluation and calibration sweeps.
//
// Exit codes: 0 success, 2 usage, 3 validation/parse/format, 4 numerical failure.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "calopf/calopf.hpp"

namespace fs = std::filesystem;
using namespace calopf;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNumerical = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverFlags {
  double tol_kkt = 1e-8;
  double tol_gap = 1e-8;
  int max_iter = 100;

  void add(CLI::App* app) {
    app->add_option("--tol-kkt", tol_kkt, "Interior-point KKT tolerance")->capture_default_str();
    app->add_option("--tol-gap", tol_gap, "Interior-point complementarity tolerance")->capture_default_str();
    app->add_option("--max-iter", max_iter, "Interior-point iteration cap")->capture_default_str();
  }

  SolverOptions options() const {
    SolverOptions o;
    o.tol_kkt = tol_kkt;
    o.tol_gap = tol_gap;
    o.max_iter = max_iter;
    return o;
  }
};

struct TrainFlags {
  std::string hidden;
  int epochs = 200;
  int batch_size = 64;
  double lr = 1e-3;
  double momentum = 0.9;
  double w1 = 1.0;
  double w2 = 1.0;
  std::uint64_t seed = 1;

  void add(CLI::App* app) {
    app->add_option("--hidden", hidden, "Hidden layer widths, e.g. 32,16,8 (default: by bus count)");
    app->add_option("--epochs", epochs)->capture_default_str();
    app->add_option("--batch-size", batch_size)->capture_default_str();
    app->add_option("--lr", lr, "Learning rate")->capture_default_str();
    app->add_option("--momentum", momentum)->capture_default_str();
    app->add_option("--w1", w1, "Weight of the generation loss")->capture_default_str();
    app->add_option("--w2", w2, "Weight of the line penalty")->capture_default_str();
    app->add_option("--train-seed", seed, "Weight initialization and shuffling seed")->capture_default_str();
  }

  TrainConfig config() const {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.learning_rate = lr;
    c.momentum = momentum;
    c.w1 = w1;
    c.w2 = w2;
    c.seed = seed;
    c.check();
    return c;
  }
};

std::vector<int> parse_hidden(const std::string& s) {
  std::vector<int> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(tok, &used);
      if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::logic_error&) {
      throw UsageError("--hidden expects positive integers separated by commas, got '" + s + "'");
    }
  }
  return out;
}

std::string output_dir(const std::string& flag) {
  std::string dir = flag;
  if (dir.empty()) {
    const char* env = std::getenv("CALOPF_OUT");
    dir = env && *env ? env : ".";
  }
  fs::create_directories(dir);
  return dir;
}

std::string in_dir(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

PowerNetwork load_case(const std::string& path) {
  std::vector<std::string> warnings;
  auto net = parse_case(path, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  return net;
}

LoadRange pick_range(const std::vector<double>& range, const std::optional<Regime>& regime) {
  if (!range.empty()) return LoadRange{range[0], range[1]};
  return regime_range(regime.value_or(Regime::full));
}

double plan_percent_label(const CalibrationPlan& p) {
  if (p.mode == CalibrationPlan::Mode::percent) return 100.0 * p.percent;
  return p.is_zero() ? 0.0 : std::numeric_limits<double>::quiet_NaN();
}

void print_aggregates(const Aggregates& a) {
  std::printf("instances           %zu\n", a.n);
  std::printf("feasibility rate    %.2f %% (lines %.2f %%, generators %.2f %%)\n", a.feasibility_rate,
              a.line_feasibility_rate, a.gen_feasibility_rate);
  std::printf("average cost        DNN %.3f $/h, solver %.3f $/h\n", a.avg_cost_dnn, a.avg_cost_ref);
  std::printf("optimality loss     %.4f %%\n", a.optimality_loss);
  std::printf("average time        DNN %.4f ms, solver %.4f ms\n", a.avg_time_dnn_ms, a.avg_time_solver_ms);
  std::printf("average speedup     x%.1f\n", a.avg_speedup);
  std::printf("projected           %zu\n", a.projected);
}

// ---- gen-data ----

struct GenDataArgs {
  std::string case_path;
  std::optional<double> calibration_pct;
  std::optional<double> epsilon_mw;
  std::string plan_path;
  std::size_t n_train = 5000;
  std::size_t n_test = 1000;
  std::vector<double> range;
  std::optional<Regime> regime;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string prefix;
  std::string out;
  SolverFlags solver;
};

CalibrationPlan make_plan(const PowerNetwork& net, const GenDataArgs& a) {
  if (a.epsilon_mw) {
    const auto adm = build_admittance(net);
    return plan_from_epsilon(net, compute_sensitivity(adm), net.n_generators(), *a.epsilon_mw);
  }
  if (!a.plan_path.empty()) {
    std::ifstream in(a.plan_path);
    if (!in) throw FormatError("cannot open plan '" + a.plan_path + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("plan '" + a.plan_path + "': " + e.what());
    }
    auto plan = plan_from_json(j);
    apply_plan(net, plan);
    return plan;
  }
  const double c = a.calibration_pct.value_or(0.0);
  if (c == 0.0) return zero_plan();
  return plan_from_percent(c / 100.0);
}

int run_gen_data(const GenDataArgs& a) {
  const auto net = load_case(a.case_path);
  const auto plan = make_plan(net, a);
  const auto range = pick_range(a.range, a.regime);
  GenerateOptions g;
  g.solver = a.solver.options();
  g.regime = a.regime.value_or(Regime::full);
  g.workers = a.workers;
  const auto [train_set, test_set] = generate_dataset(net, plan, a.n_train, a.n_test, range, a.seed, g);

  const auto dir = output_dir(a.out);
  const auto prefix = a.prefix.empty() ? net.name : a.prefix;
  nlohmann::json manifest;
  manifest["case"] = net.name;
  manifest["network_hash"] = network_hash(net);
  manifest["plan"] = plan_to_json(plan);
  manifest["label"] = plan.is_zero() ? "uncalibrated" : "calibrated";
  manifest["seed"] = a.seed;
  manifest["range"] = {range.lo, range.hi};
  manifest["regime"] = to_string(g.regime);
  auto emit = [&](const TrainingDataset& ds, const char* key) {
    const auto path = in_dir(dir, prefix + "_" + key + ".calds");
    if (ds.records.empty()) return;
    save_dataset(ds, path);
    manifest[key] = {{"path", path}, {"n", ds.size()}, {"discarded", ds.discarded},
                     {"limits", ds.split == Split::train ? "calibrated" : "original"}};
    std::cout << key << ": " << ds.size() << " records, " << ds.discarded << " discarded -> " << path << "\n";
  };
  emit(train_set, "train");
  emit(test_set, "test");
  const auto manifest_path = in_dir(dir, prefix + "_manifest.json");
  write_text(manifest_path, manifest.dump(2) + "\n");
  std::cout << "manifest -> " << manifest_path << "\n";
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string case_path;
  std::string train_path;
  std::string init_model;
  std::string model_out;
  std::string trace_out;
  std::string out;
  TrainFlags flags;
};

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::string out = "epoch,L_PG,L_pen,total\n";
  for (const auto& r : trace)
    out += std::to_string(r.epoch) + "," + format_g17(r.l_pg) + "," + format_g17(r.l_pen) + "," + format_g17(r.total) + "\n";
  return out;
}

int run_train(const TrainArgs& a) {
  const auto net = load_case(a.case_path);
  const auto hash = network_hash(net);
  const auto ds = load_dataset(a.train_path, hash);
  if (ds.split != Split::train) std::cerr << "warning: '" << a.train_path << "' is a test split\n";
  const auto hidden = parse_hidden(a.flags.hidden);
  const auto cfg = a.flags.config();

  MlpModel model;
  if (!a.init_model.empty()) {
    model = load_model(a.init_model, hash);
    if (!hidden.empty() && std::vector<int>(model.dims.begin() + 1, model.dims.end() - 1) != hidden)
      throw ValidationError("--hidden does not match the architecture of '" + a.init_model + "' (" + model.architecture_tag + ")");
  } else {
    model = make_model_for(net, ds, hidden, cfg.seed);
  }

  const auto adm = build_admittance(net);
  const auto pen = make_penalty_operator(net, adm, apply_plan(net, ds.plan));
  const auto trace = train(model, ds, pen, cfg);
  model.provenance = {{"plan", plan_to_json(ds.plan)},
                      {"train_dataset", a.train_path},
                      {"data_seed", ds.seed},
                      {"n_train", ds.size()},
                      {"init_model", a.init_model}};

  const auto dir = output_dir(a.out);
  const auto model_path = a.model_out.empty() ? in_dir(dir, net.name + ".calm") : a.model_out;
  const auto trace_path = a.trace_out.empty() ? in_dir(dir, net.name + "_trace.csv") : a.trace_out;
  save_model(model, model_path);
  write_text(trace_path, trace_csv(trace));
  const auto& last = trace.back();
  std::printf("%s: %d epochs, L_PG %.6g, L_pen %.6g, total %.6g\n", model.architecture_tag.c_str(), cfg.epochs, last.l_pg,
              last.l_pen, last.total);
  std::cout << "model -> " << model_path << "\ntrace -> " << trace_path << "\n";
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string case_path;
  std::string model_path;
  bool oracle = false;
  std::string test_path;
  std::optional<Regime> regime;
  std::vector<double> range;
  std::size_t n = 1000;
  std::uint64_t seed = 2;
  unsigned workers = 1;
  std::string fallback = "l1-projection";
  std::string predictions;
  std::string name = "eval";
  std::string out;
  SolverFlags solver;
};

int run_eval(const EvalArgs& a) {
  if (a.oracle == !a.model_path.empty()) throw UsageError("exactly one of --model and --oracle is required");
  const InferenceBundle bundle(load_case(a.case_path));
  const auto hash = network_hash(bundle.network);

  TrainingDataset test;
  if (!a.test_path.empty()) {
    test = load_dataset(a.test_path, hash);
  } else {
    GenerateOptions g;
    g.solver = a.solver.options();
    g.regime = a.regime.value_or(Regime::full);
    g.workers = a.workers;
    test = generate_dataset(bundle.network, zero_plan(), 0, a.n, pick_range(a.range, a.regime), a.seed, g).second;
  }

  std::optional<MlpModel> model;
  if (!a.oracle) model = load_model(a.model_path, hash);

  EvalOptions opts;
  opts.fallback = fallback_from_string(a.fallback);
  opts.solver = a.solver.options();

  const auto dir = output_dir(a.out);
  std::ofstream jsonl;
  PredictionSink sink;
  if (!a.predictions.empty()) {
    jsonl.open(a.predictions);
    if (!jsonl) throw std::runtime_error("cannot write '" + a.predictions + "'");
    sink = [&](const DatasetRecord& rec, const PredictionResult& pr) {
      auto j = to_json(pr, bundle.network.base_mva);
      j["index"] = rec.sample.index;
      jsonl << j.dump() << "\n";
    };
  }
  auto report = evaluate(bundle, test, model ? &*model : nullptr, opts, sink);

  double calibration_pct = 0.0;
  if (model && model->provenance.contains("plan")) calibration_pct = plan_percent_label(plan_from_json(model->provenance["plan"]));
  report.config["calibration_pct"] = calibration_pct;

  SummaryLine line{bundle.network.name, calibration_pct, report.agg, {}};
  write_text(in_dir(dir, a.name + "_instances.csv"), instances_csv(report.rows));
  write_text(in_dir(dir, a.name + "_summary.csv"), summary_csv({line}));
  write_text(in_dir(dir, a.name + "_report.md"), markdown_table({line}));
  nlohmann::json j{{"config", report.config}, {"aggregates", to_json(report.agg)}};
  write_text(in_dir(dir, a.name + "_report.json"), j.dump(2) + "\n");
  print_aggregates(report.agg);
  std::cout << "report -> " << in_dir(dir, a.name + "_report.md") << "\n";
  return 0;
}

// ---- sweep ----

struct SweepArgs {
  std::string case_path;
  std::string calibrations;  // comma-separated percent values
  std::size_t n_train = 5000;
  std::size_t n_test = 1000;
  std::vector<double> range;
  std::optional<Regime> regime;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string fallback = "l1-projection";
  std::string name = "sweep";
  std::string out;
  TrainFlags flags;
  SolverFlags solver;
};

int exit_code_for(const std::exception& e);

std::vector<double> parse_calibrations(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::logic_error&) {
      throw UsageError("--calibrations expects numbers separated by commas, got '" + s + "'");
    }
  }
  if (out.empty()) throw UsageError("sweep needs at least one calibration value");
  return out;
}

int run_sweep(const SweepArgs& a) {
  const auto calibrations = parse_calibrations(a.calibrations);
  const InferenceBundle bundle(load_case(a.case_path));
  ExperimentConfig cfg;
  cfg.n_train = a.n_train;
  cfg.n_test = a.n_test;
  cfg.range = pick_range(a.range, a.regime);
  cfg.regime = a.regime.value_or(Regime::full);
  cfg.data_seed = a.seed;
  cfg.train = a.flags.config();
  cfg.hidden = parse_hidden(a.flags.hidden);
  cfg.eval.fallback = fallback_from_string(a.fallback);
  cfg.eval.solver = a.solver.options();
  cfg.workers = a.workers;

  const auto dir = output_dir(a.out);
  const auto test = make_test_set(bundle, cfg);
  std::vector<SummaryLine> lines;
  int status = 0;
  for (const double pct : calibrations) {
    SummaryLine line{bundle.network.name, pct, {}, {}};
    try {
      cfg.calibration = pct / 100.0;
      const auto outcome = run_experiment(bundle, cfg, test);
      line.agg = outcome.report.agg;
      const auto tag = a.name + "_c" + format_g17(pct);
      write_text(in_dir(dir, tag + "_instances.csv"), instances_csv(outcome.report.rows));
      write_text(in_dir(dir, tag + "_trace.csv"), trace_csv(outcome.trace));
      save_model(outcome.model, in_dir(dir, tag + ".calm"));
      std::printf("c = %g %%: feasibility %.2f %%, loss %.4f %%, speedup x%.1f\n", pct, line.agg.feasibility_rate,
                  line.agg.optimality_loss, line.agg.avg_speedup);
    } catch (const std::exception& e) {
      line.error = e.what();
      if (status == 0) status = exit_code_for(e);
      std::cerr << "c = " << pct << " %: failed: " << e.what() << "\n";
    }
    lines.push_back(std::move(line));
  }
  write_text(in_dir(dir, a.name + "_summary.csv"), summary_csv(lines));
  const auto md = markdown_table(lines);
  write_text(in_dir(dir, a.name + "_report.md"), md);
  std::cout << md;
  return status;
}

// ---- calibrate ----

struct CalibrateArgs {
  std::string case_path;
  std::optional<double> epsilon_mw;
  std::string plan_out;
  std::vector<double> bound;  // lipschitz, diameter, neurons, hidden layers
  int top = 5;
};

int run_calibrate(const CalibrateArgs& a) {
  const auto net = load_case(a.case_path);
  const auto adm = build_admittance(net);
  const auto sens = compute_sensitivity(adm);
  const auto& k = sens.k;
  std::printf("case %s: %zu buses, %zu lines, %zu generators (%zu predicted)\n", net.name.c_str(), net.n_buses(),
              net.n_branches(), net.n_generators(), predicted_generators(net).size());
  if (k.size() > 0) {
    Eigen::Index arg = 0;
    const double kmax = k.maxCoeff(&arg);
    std::printf("k: max %.6g (line %ld), mean %.6g, min %.6g\n", kmax, static_cast<long>(arg), k.mean(), k.minCoeff());
    std::vector<Eigen::Index> order(static_cast<std::size_t>(k.size()));
    for (Eigen::Index i = 0; i < k.size(); ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return k[x] > k[y]; });
    for (int i = 0; i < a.top && i < static_cast<int>(order.size()); ++i) {
      const auto l = order[static_cast<std::size_t>(i)];
      const auto& br = net.branches[static_cast<std::size_t>(l)];
      std::printf("  line %ld (%d-%d): k = %.6g\n", static_cast<long>(l), net.buses[br.from].id, net.buses[br.to].id, k[l]);
    }
    const auto absm = sens.m.cwiseAbs();
    std::printf("M: %ldx%ld, max |M| %.6g, nonzeros %ld\n", static_cast<long>(sens.m.rows()), static_cast<long>(sens.m.cols()),
                absm.size() ? absm.maxCoeff() : 0.0, static_cast<long>((absm.array() > 1e-12).count()));
  }
  if (!a.bound.empty()) {
    const double e = worst_case_error_bound(a.bound[0], a.bound[1], a.bound[2], a.bound[3]);
    std::printf("worst-case approximation error bound: %.12g\n", e);
  }
  if (a.epsilon_mw) {
    const auto plan = plan_from_epsilon(net, sens, net.n_generators(), *a.epsilon_mw);
    std::printf("epsilon %.6g MW: max line margin %.6g MW, slack margin %.6g MW\n", *a.epsilon_mw,
                plan.line_margin_mw.size() ? plan.line_margin_mw.maxCoeff() : 0.0, plan.slack_margin_mw);
    if (!a.plan_out.empty()) {
      write_text(a.plan_out, plan_to_json(plan).dump(2) + "\n");
      std::cout << "plan -> " << a.plan_out << "\n";
    }
  } else if (!a.plan_out.empty()) {
    throw UsageError("--plan-out requires --epsilon");
  }
  return 0;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e) || dynamic_cast<const std::invalid_argument*>(&e)) return kExitUsage;
  if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const FormatError*>(&e))
    return kExitValidation;
  return 1;
}

std::map<std::string, Regime> regime_map() {
  return {{"full", Regime::full}, {"light", Regime::light}, {"heavy", Regime::heavy}};
}

void add_range(CLI::App* app, std::vector<double>& range, std::optional<Regime>& regime) {
  app->add_option("--range", range, "Load multiplier interval LO HI")->expected(2);
  app->add_option("--regime", regime, "Load regime: full [1.0,1.3], light [0.9,1.1], heavy [1.1,1.3]")
      ->transform(CLI::CheckedTransformer(regime_map(), CLI::ignore_case));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DC optimal power flow learning with calibrated constraints"};
  app.set_config("--config", "", "TOML configuration file (command-line flags take precedence)");
  app.require_subcommand(1);
  std::string out;
  app.add_option("--out", out, "Output directory (default: $CALOPF_OUT or .)");

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate labelled train/test splits");
  gen_cmd->add_option("--case", gen.case_path, "MATPOWER .m or network .json file")->required()->check(CLI::ExistingFile);
  auto* c_opt = gen_cmd->add_option("--calibration", gen.calibration_pct, "Calibration magnitude c in percent");
  auto* e_opt = gen_cmd->add_option("--epsilon", gen.epsilon_mw, "Calibrate from a prediction error bound (MW)");
  auto* p_opt = gen_cmd->add_option("--plan", gen.plan_path, "Calibration plan JSON")->check(CLI::ExistingFile);
  c_opt->excludes(e_opt)->excludes(p_opt);
  e_opt->excludes(p_opt);
  gen_cmd->add_option("--n-train", gen.n_train)->capture_default_str();
  gen_cmd->add_option("--n-test", gen.n_test)->capture_default_str();
  add_range(gen_cmd, gen.range, gen.regime);
  gen_cmd->add_option("--seed", gen.seed, "Load sampling seed")->capture_default_str();
  gen_cmd->add_option("--workers", gen.workers, "Labelling threads (0 = all cores)")->capture_default_str();
  gen_cmd->add_option("--prefix", gen.prefix, "Output file prefix (default: case name)");
  gen.solver.add(gen_cmd);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a training split");
  train_cmd->add_option("--case", tr.case_path)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--train", tr.train_path, "Training split (.calds)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--init-model", tr.init_model, "Continue from an existing model")->check(CLI::ExistingFile);
  train_cmd->add_option("--model-out", tr.model_out);
  train_cmd->add_option("--trace-out", tr.trace_out);
  tr.flags.add(train_cmd);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model (or the stored labels) against the solver");
  eval_cmd->add_option("--case", ev.case_path)->required()->check(CLI::ExistingFile);
  auto* m_opt = eval_cmd->add_option("--model", ev.model_path)->check(CLI::ExistingFile);
  auto* o_opt = eval_cmd->add_flag("--oracle", ev.oracle, "Feed the test set's ground-truth scaling factors through the pipeline");
  m_opt->excludes(o_opt);
  auto* t_opt = eval_cmd->add_option("--test", ev.test_path, "Test split (.calds)")->check(CLI::ExistingFile);
  add_range(eval_cmd, ev.range, ev.regime);
  eval_cmd->add_option("--n", ev.n, "Instances when sampling a fresh test set")->capture_default_str()->excludes(t_opt);
  eval_cmd->add_option("--seed", ev.seed, "Seed when sampling a fresh test set")->capture_default_str()->excludes(t_opt);
  eval_cmd->add_option("--workers", ev.workers)->capture_default_str();
  eval_cmd->add_option("--fallback", ev.fallback, "none or l1-projection")->capture_default_str();
  eval_cmd->add_option("--predictions", ev.predictions, "Write one JSON line per prediction");
  eval_cmd->add_option("--name", ev.name, "Report file prefix")->capture_default_str();
  ev.solver.add(eval_cmd);

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Generate, train and evaluate for several calibration values");
  sweep_cmd->add_option("--case", sw.case_path)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--calibrations", sw.calibrations, "Calibration magnitudes in percent, e.g. 0,3.5,7")->required();
  sweep_cmd->add_option("--n-train", sw.n_train)->capture_default_str();
  sweep_cmd->add_option("--n-test", sw.n_test)->capture_default_str();
  add_range(sweep_cmd, sw.range, sw.regime);
  sweep_cmd->add_option("--seed", sw.seed, "Shared load sampling seed")->capture_default_str();
  sweep_cmd->add_option("--workers", sw.workers)->capture_default_str();
  sweep_cmd->add_option("--fallback", sw.fallback)->capture_default_str();
  sweep_cmd->add_option("--name", sw.name)->capture_default_str();
  sw.flags.add(sweep_cmd);
  sw.solver.add(sweep_cmd);

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Print line sensitivities and derive calibration margins");
  cal_cmd->add_option("--case", cal.case_path)->required()->check(CLI::ExistingFile);
  cal_cmd->add_option("--epsilon", cal.epsilon_mw, "Prediction error bound per generator (MW)");
  cal_cmd->add_option("--plan-out", cal.plan_out, "Write the epsilon plan as JSON");
  cal_cmd->add_option("--bound", cal.bound, "Evaluate the approximation error bound: LIPSCHITZ DIAMETER NEURONS LAYERS")
      ->expected(4);
  cal_cmd->add_option("--top", cal.top, "Lines to list by sensitivity")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  gen.out = tr.out = ev.out = sw.out = out;
  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*train_cmd) return run_train(tr);
    if (*eval_cmd) return run_eval(ev);
    if (*sweep_cmd) return run_sweep(sw);
    if (*cal_cmd) return run_calibrate(cal);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitUsage;
}
