#pragma once

// End-to-end experiment plumbing: evaluation of a model (or of the ground-truth labels)
// on a test split, and the generate / train / evaluate sequence for one calibration value.

#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include "calopf/calibration.hpp"
#include "calopf/dataset.hpp"
#include "calopf/mlp.hpp"
#include "calopf/pipeline.hpp"
#include "calopf/report.hpp"

namespace calopf {

struct EvalOptions {
  Fallback fallback = Fallback::l1_projection;
  SolverOptions solver;
};

/// Per-instance callback, e.g. for writing predictions as JSON lines.
using PredictionSink = std::function<void(const DatasetRecord&, const PredictionResult&)>;

/// Evaluates `model` on every record of `test`; with `model == nullptr` the stored
/// ground-truth scaling factors are fed through the pipeline instead. Instances run
/// serially so that timings do not contend.
inline EvaluationReport evaluate(const InferenceBundle& bundle, const TrainingDataset& test, const MlpModel* model,
                                 const EvalOptions& opts = {}, const PredictionSink& sink = {}) {
  const auto hash = network_hash(bundle.network);
  if (test.network_hash != hash)
    throw ValidationError("test set network " + test.network_hash + " does not match case " + hash);
  if (model && model->network_hash != hash)
    throw ValidationError("model network " + model->network_hash + " does not match case " + hash);

  EvaluationReport rep;
  rep.config = {{"case", bundle.network.name},
                {"network_hash", hash},
                {"model", model ? model->architecture_tag : std::string("oracle")},
                {"test_seed", test.seed},
                {"test_range", {test.range.lo, test.range.hi}},
                {"regime", to_string(test.regime)},
                {"n_test", test.records.size()},
                {"fallback", to_string(opts.fallback)}};
  if (model) rep.config["train_config"] = to_json(model->config);

  QpSolver pipeline_solver;
  QpSolver ref_solver;
  for (const auto& rec : test.records) {
    const auto& load = rec.sample.load;
    PredictionResult pr;
    if (model) {
      pr = predict(*model, bundle, load, opts.fallback, opts.solver, &pipeline_solver);
    } else {
      const auto t0 = std::chrono::steady_clock::now();
      const Eigen::VectorXd alpha = rec.alpha;
      const double lookup = detail::seconds_since(t0);
      pr = predict_from_alpha(bundle, alpha, load, opts.fallback, opts.solver, &pipeline_solver);
      pr.timing.dnn = lookup;
    }
    const DcOpfProblem prob{bundle.network, bundle.admittance, load, bundle.limits};
    const auto ref = solve_dcopf(prob, opts.solver, &ref_solver);
    if (ref.status != SolveStatus::optimal)
      throw NumericalError("reference solve failed on test sample " + std::to_string(rec.sample.index) + ": " +
                           to_string(ref.status));

    InstanceRow row;
    row.index = rec.sample.index;
    row.feasible_direct = pr.feasible_direct;
    row.line_ok = true;
    row.gen_ok = true;
    for (const auto& v : pr.violations) {
      if (v.kind == Violation::Kind::line) row.line_ok = false;
      if (v.kind == Violation::Kind::gen_upper || v.kind == Violation::Kind::gen_lower) row.gen_ok = false;
    }
    row.projected = pr.projected;
    row.cost_dnn = pr.cost;
    row.cost_ref = ref.cost;
    row.time_dnn = pr.timing.total();
    row.time_solver = ref.solve_time;
    row.ratio = row.time_solver / row.time_dnn;
    rep.rows.push_back(row);
    if (sink) sink(rec, pr);
  }
  rep.agg = aggregate(rep.rows);
  return rep;
}

struct ExperimentConfig {
  double calibration = 0.0;  // fraction c
  std::size_t n_train = 5000;
  std::size_t n_test = 1000;
  LoadRange range{1.0, 1.3};
  Regime regime = Regime::full;
  std::uint64_t data_seed = 1;
  TrainConfig train;
  std::vector<int> hidden;  // empty: sized by bus count
  EvalOptions eval;
  unsigned workers = 1;
};

struct ExperimentOutcome {
  TrainingDataset train_set;
  MlpModel model;
  std::vector<TraceRow> trace;
  EvaluationReport report;
};

/// Test split under the original limits; identical for every calibration value.
inline TrainingDataset make_test_set(const InferenceBundle& bundle, const ExperimentConfig& cfg) {
  GenerateOptions g;
  g.solver = cfg.eval.solver;
  g.regime = cfg.regime;
  g.workers = cfg.workers;
  return generate_dataset(bundle.network, zero_plan(), 0, cfg.n_test, cfg.range, cfg.data_seed, g).second;
}

/// Generate the calibrated training split, train, evaluate on `test`. The training penalty
/// measures flows against the calibrated capacities.
inline ExperimentOutcome run_experiment(const InferenceBundle& bundle, const ExperimentConfig& cfg, const TrainingDataset& test) {
  const auto& net = bundle.network;
  const auto plan = plan_from_percent(cfg.calibration);
  GenerateOptions g;
  g.solver = cfg.eval.solver;
  g.regime = cfg.regime;
  g.workers = cfg.workers;
  ExperimentOutcome out;
  out.train_set = generate_dataset(net, plan, cfg.n_train, 0, cfg.range, cfg.data_seed, g).first;
  out.model = make_model_for(net, out.train_set, cfg.hidden, cfg.train.seed);
  const auto pen = make_penalty_operator(net, bundle.admittance, apply_plan(net, plan));
  out.trace = train(out.model, out.train_set, pen, cfg.train);
  out.model.provenance = {{"plan", plan_to_json(plan)}, {"data_seed", cfg.data_seed}, {"n_train", cfg.n_train}};
  out.report = evaluate(bundle, test, &out.model, cfg.eval);
  out.report.config["training_calibration"] = plan_to_json(plan);
  out.report.config["n_train"] = cfg.n_train;
  out.report.config["train_discarded"] = out.train_set.discarded;
  out.report.config["data_seed"] = cfg.data_seed;
  return out;
}

}  // namespace calopf
