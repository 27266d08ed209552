#pragma once

// Feed-forward network: ReLU hidden layers, sigmoid output, trained by mini-batch SGD
// with momentum on
//
//   L = w1 * L_PG + w2 * L_pen
//   L_PG  = mean over samples and outputs of (alpha_hat - alpha)^2
//   L_pen = mean over samples and lines of max(f^2 - 1, 0)
//
// where f is the capacity-normalized line flow of the decoded prediction. Decoding and
// angle reconstruction are linear, so f = J alpha_hat + L loads + offset with constant
// J, L and offset (see PenaltyOperator).

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "calopf/binary_io.hpp"
#include "calopf/calibration.hpp"
#include "calopf/dataset.hpp"
#include "calopf/errors.hpp"
#include "calopf/grid_model.hpp"
#include "json.hpp"

namespace calopf {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double w1 = 1.0;
  double w2 = 1.0;
  std::uint64_t seed = 1;

  void check() const {
    if (epochs < 0) throw std::invalid_argument("epochs must be nonnegative");
    if (batch_size <= 0) throw std::invalid_argument("batch size must be positive");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning rate must be nonnegative");
    if (!(momentum >= 0.0) || !(momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
    if (!(w1 >= 0.0) || !(w2 >= 0.0)) throw std::invalid_argument("loss weights must be nonnegative");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
          {"momentum", c.momentum}, {"w1", c.w1}, {"w2", c.w2}, {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.w1 = j.at("w1").get<double>();
  c.w2 = j.at("w2").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

/// Hidden layer widths by network size: 32/16/8 up to 30 buses, 128/64/32 up to 200, else 256/128/64.
inline std::vector<int> default_hidden_sizes(std::size_t n_buses) {
  if (n_buses <= 30) return {32, 16, 8};
  if (n_buses <= 200) return {128, 64, 32};
  return {256, 128, 64};
}

struct DenseLayer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;
};

namespace detail {

inline double sigmoid(double z) {
  // clamped so the output stays strictly inside (0, 1) in floating point
  constexpr double lo = 0x1.0p-53;
  constexpr double hi = 1.0 - 0x1.0p-53;
  if (std::isnan(z)) return z;
  const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return std::min(hi, std::max(lo, s));
}

inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

}  // namespace detail

struct MlpModel {
  std::vector<int> dims;  // input, hidden..., output
  std::vector<DenseLayer> layers;
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_scale;
  std::string architecture_tag;
  std::string network_hash;
  TrainConfig config;
  nlohmann::json provenance = nlohmann::json::object();  // training plan, dataset, seeds

  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }

  Eigen::MatrixXd normalize(const Eigen::MatrixXd& raw) const {
    if (raw.rows() != input_dim())
      throw std::invalid_argument("input has " + std::to_string(raw.rows()) + " features, model expects " +
                                  std::to_string(input_dim()));
    return (raw.colwise() - input_mean).array().colwise() / input_scale.array();
  }

  /// Columns are samples; inputs already normalized.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const {
    if (x.rows() != input_dim())
      throw std::invalid_argument("input has " + std::to_string(x.rows()) + " features, model expects " +
                                  std::to_string(input_dim()));
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      Eigen::MatrixXd z = layers[l].w * a;
      z.colwise() += layers[l].b;
      if (l + 1 < layers.size())
        a = z.cwiseMax(0.0);
      else
        a = z.unaryExpr([](double v) { return detail::sigmoid(v); });
    }
    return a;
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const { return forward_batch(x); }

  /// Raw (per-unit) loads at the load buses to scaling factors.
  Eigen::VectorXd predict(const Eigen::VectorXd& raw) const { return forward_batch(normalize(raw)); }
};

/// Uniform(-r, r) weights with r = sqrt(6 / (fan_in + fan_out)), zero biases, identity normalization.
inline MlpModel make_model(const std::vector<int>& dims, std::uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("a model needs at least input and output dimensions");
  for (const int d : dims)
    if (d <= 0) throw std::invalid_argument("layer dimensions must be positive");
  MlpModel m;
  m.dims = dims;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x6d6c70u};
  std::mt19937_64 rng(seq);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    const double r = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    layer.w.resize(dims[l + 1], dims[l]);
    for (Eigen::Index i = 0; i < layer.w.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.w.cols(); ++j) layer.w(i, j) = r * (2.0 * detail::unit_uniform(rng) - 1.0);
    layer.b = Eigen::VectorXd::Zero(dims[l + 1]);
    m.layers.push_back(std::move(layer));
  }
  m.input_mean = Eigen::VectorXd::Zero(dims.front());
  m.input_scale = Eigen::VectorXd::Ones(dims.front());
  return m;
}

/// Per-feature mean and standard deviation of `raw` (columns are samples); constant features keep scale 1.
inline void fit_normalization(MlpModel& m, const Eigen::MatrixXd& raw) {
  if (raw.rows() != m.input_dim()) throw std::invalid_argument("normalization data has the wrong feature count");
  if (raw.cols() == 0) return;
  m.input_mean = raw.rowwise().mean();
  const Eigen::MatrixXd centered = raw.colwise() - m.input_mean;
  m.input_scale = (centered.rowwise().squaredNorm() / static_cast<double>(raw.cols())).cwiseSqrt();
  for (Eigen::Index i = 0; i < m.input_scale.size(); ++i)
    if (!(m.input_scale[i] > 1e-12)) m.input_scale[i] = 1.0;
}

/// Capacity-normalized line flows as an affine function of predicted scaling factors and loads:
/// f = alpha_map * alpha + load_map * loads + offset, loads per-unit at the load buses.
/// Row k of `a` holds +-1/(cap_k x_k) at the endpoints of line k, so f = a * theta.
struct PenaltyOperator {
  Eigen::MatrixXd a;
  Eigen::MatrixXd alpha_map;
  Eigen::MatrixXd load_map;
  Eigen::VectorXd offset;

  Eigen::Index n_lines() const { return offset.size(); }

  Eigen::MatrixXd flows(const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& loads) const {
    Eigen::MatrixXd f = alpha_map * alpha + load_map * loads;
    f.colwise() += offset;
    return f;
  }
};

inline PenaltyOperator make_penalty_operator(const PowerNetwork& net, const AdmittanceSystem& adm, const EffectiveLimits& limits) {
  const auto sens = compute_sensitivity(adm);
  const Eigen::VectorXd inv_cap = limits.line_capacity.cwiseInverse();
  const Eigen::MatrixXd scaled = inv_cap.asDiagonal() * sens.m;  // lines x reduced buses
  const auto pred = predicted_generators(net);
  const auto loads = net.load_buses();
  const Eigen::Index ne = static_cast<Eigen::Index>(net.n_branches());

  PenaltyOperator op;
  op.a = inv_cap.asDiagonal() * adm.x_incidence;
  op.alpha_map = Eigen::MatrixXd::Zero(ne, static_cast<Eigen::Index>(pred.size()));
  op.load_map = Eigen::MatrixXd::Zero(ne, static_cast<Eigen::Index>(loads.size()));
  op.offset = Eigen::VectorXd::Zero(ne);
  // Slack-bus injections never enter the reduced system.
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const auto& gen = net.generators[static_cast<std::size_t>(pred[j])];
    op.alpha_map.col(static_cast<Eigen::Index>(j)) = scaled.col(adm.bus_to_reduced[static_cast<std::size_t>(gen.bus)]) * (gen.p_max - gen.p_min);
  }
  for (const auto& gen : net.generators) {
    if (gen.bus == net.slack_bus) continue;
    op.offset += scaled.col(adm.bus_to_reduced[static_cast<std::size_t>(gen.bus)]) * gen.p_min;
  }
  for (std::size_t l = 0; l < loads.size(); ++l) {
    const int r = adm.bus_to_reduced[static_cast<std::size_t>(loads[l])];
    if (r >= 0) op.load_map.col(static_cast<Eigen::Index>(l)) = -scaled.col(r);
  }
  return op;
}

struct LossValue {
  double total = 0.0;
  double l_pg = 0.0;
  double l_pen = 0.0;
};

/// Columns are samples. `inputs` normalized, `loads` raw per-unit at the load buses.
struct Batch {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd loads;
  Eigen::MatrixXd targets;

  Eigen::Index size() const { return inputs.cols(); }
};

namespace detail {

inline void check_batch(const MlpModel& m, const Batch& b, const PenaltyOperator& pen) {
  if (b.size() == 0) throw std::invalid_argument("empty batch");
  if (b.inputs.rows() != m.input_dim() || b.targets.rows() != m.output_dim() || b.loads.cols() != b.size() ||
      b.targets.cols() != b.size())
    throw std::invalid_argument("batch dimensions do not match the model");
  if (pen.alpha_map.cols() != m.output_dim() || pen.load_map.cols() != b.loads.rows())
    throw std::invalid_argument("penalty operator does not match the model");
}

inline LossValue evaluate(const Eigen::MatrixXd& out, const Batch& b, const PenaltyOperator& pen, double w1, double w2,
                          Eigen::MatrixXd* f_out = nullptr) {
  LossValue v;
  const double s = static_cast<double>(b.size());
  v.l_pg = (out - b.targets).squaredNorm() / (s * static_cast<double>(out.rows()));
  if (pen.n_lines() > 0) {
    Eigen::MatrixXd f = pen.flows(out, b.loads);
    v.l_pen = (f.array().square() - 1.0).cwiseMax(0.0).sum() / (s * static_cast<double>(pen.n_lines()));
    if (f_out) *f_out = std::move(f);
  }
  v.total = w1 * v.l_pg + w2 * v.l_pen;
  return v;
}

}  // namespace detail

inline LossValue loss(const MlpModel& m, const Batch& b, const PenaltyOperator& pen, double w1 = 1.0, double w2 = 1.0) {
  detail::check_batch(m, b, pen);
  return detail::evaluate(m.forward_batch(b.inputs), b, pen, w1, w2);
}

/// Loss and its gradient with respect to every weight matrix and bias vector.
inline std::pair<LossValue, std::vector<DenseLayer>> loss_and_gradient(const MlpModel& m, const Batch& b,
                                                                       const PenaltyOperator& pen, double w1 = 1.0,
                                                                       double w2 = 1.0) {
  detail::check_batch(m, b, pen);
  const std::size_t nl = m.layers.size();
  std::vector<Eigen::MatrixXd> acts(nl + 1);  // acts[0] = input, acts[l+1] = output of layer l
  std::vector<Eigen::MatrixXd> pre(nl);
  acts[0] = b.inputs;
  for (std::size_t l = 0; l < nl; ++l) {
    pre[l] = m.layers[l].w * acts[l];
    pre[l].colwise() += m.layers[l].b;
    if (l + 1 < nl)
      acts[l + 1] = pre[l].cwiseMax(0.0);
    else
      acts[l + 1] = pre[l].unaryExpr([](double v) { return detail::sigmoid(v); });
  }
  const Eigen::MatrixXd& out = acts[nl];
  Eigen::MatrixXd f;
  const LossValue v = detail::evaluate(out, b, pen, w1, w2, &f);

  const double s = static_cast<double>(b.size());
  Eigen::MatrixXd d_out = (2.0 * w1 / (s * static_cast<double>(out.rows()))) * (out - b.targets);
  if (pen.n_lines() > 0 && w2 != 0.0) {
    const Eigen::MatrixXd d_f = (f.array().square() > 1.0).select(2.0 * f.array(), 0.0).matrix();
    d_out.noalias() += (w2 / (s * static_cast<double>(pen.n_lines()))) * pen.alpha_map.transpose() * d_f;
  }
  Eigen::MatrixXd delta = d_out.cwiseProduct(out.cwiseProduct((1.0 - out.array()).matrix()));

  std::vector<DenseLayer> grad(nl);
  for (std::size_t l = nl; l-- > 0;) {
    grad[l].w = delta * acts[l].transpose();
    grad[l].b = delta.rowwise().sum();
    if (l > 0) delta = (m.layers[l].w.transpose() * delta).cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return {v, std::move(grad)};
}

/// v <- mu v - lr g; w <- w + v, elementwise.
template <class Dense>
void momentum_step(Dense& w, Dense& v, const Dense& g, double lr, double mu) {
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    v.data()[i] = mu * v.data()[i] - lr * g.data()[i];
    w.data()[i] = w.data()[i] + v.data()[i];
  }
}

struct TraceRow {
  int epoch = 0;
  double l_pg = 0.0;
  double l_pen = 0.0;
  double total = 0.0;
};

/// Inputs normalized with the model's statistics, targets and raw loads from a dataset.
inline Batch make_batch(const MlpModel& m, const TrainingDataset& ds) {
  const auto nl = static_cast<Eigen::Index>(ds.load_buses.size());
  const auto n = static_cast<Eigen::Index>(ds.records.size());
  Batch b;
  b.loads.resize(nl, n);
  b.targets.resize(static_cast<Eigen::Index>(ds.predicted.size()), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = ds.records[static_cast<std::size_t>(i)];
    for (Eigen::Index l = 0; l < nl; ++l) b.loads(l, i) = r.sample.load[ds.load_buses[static_cast<std::size_t>(l)]];
    b.targets.col(i) = r.alpha;
  }
  b.inputs = m.normalize(b.loads);
  return b;
}

inline Batch select_columns(const Batch& all, const std::vector<Eigen::Index>& cols) {
  Batch b;
  b.inputs.resize(all.inputs.rows(), static_cast<Eigen::Index>(cols.size()));
  b.loads.resize(all.loads.rows(), static_cast<Eigen::Index>(cols.size()));
  b.targets.resize(all.targets.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    b.inputs.col(c) = all.inputs.col(cols[i]);
    b.loads.col(c) = all.loads.col(cols[i]);
    b.targets.col(c) = all.targets.col(cols[i]);
  }
  return b;
}

/// Mini-batch SGD with momentum. Row 0 of the trace is the untrained loss on the whole set;
/// row e is the sample-weighted mean of the mini-batch losses seen during epoch e.
inline std::vector<TraceRow> train(MlpModel& m, const Batch& data, const PenaltyOperator& pen, const TrainConfig& cfg) {
  cfg.check();
  std::vector<TraceRow> trace;
  if (data.size() == 0) {
    trace.push_back({});
    m.config = cfg;
    return trace;
  }
  const LossValue init = loss(m, data, pen, cfg.w1, cfg.w2);
  trace.push_back({0, init.l_pg, init.l_pen, init.total});

  std::vector<DenseLayer> vel(m.layers.size());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    vel[l].w = Eigen::MatrixXd::Zero(m.layers[l].w.rows(), m.layers[l].w.cols());
    vel[l].b = Eigen::VectorXd::Zero(m.layers[l].b.size());
  }
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), 0x73686675u};
  std::mt19937_64 rng(seq);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[detail::bounded(rng, i)]);
    TraceRow row{epoch, 0.0, 0.0, 0.0};
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const Batch mb = select_columns(data, std::vector<Eigen::Index>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                                      order.begin() + static_cast<std::ptrdiff_t>(end)));
      auto [v, grad] = loss_and_gradient(m, mb, pen, cfg.w1, cfg.w2);
      if (!std::isfinite(v.total))
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) +
                             " (learning rate " + nlohmann::json(cfg.learning_rate).dump() + " too high?)");
      const double weight = static_cast<double>(end - start) / static_cast<double>(order.size());
      row.l_pg += weight * v.l_pg;
      row.l_pen += weight * v.l_pen;
      row.total += weight * v.total;
      for (std::size_t l = 0; l < m.layers.size(); ++l) {
        momentum_step(m.layers[l].w, vel[l].w, grad[l].w, cfg.learning_rate, cfg.momentum);
        momentum_step(m.layers[l].b, vel[l].b, grad[l].b, cfg.learning_rate, cfg.momentum);
      }
    }
    trace.push_back(row);
  }
  m.config = cfg;
  return trace;
}

/// Refuses a dataset built for a different network.
inline std::vector<TraceRow> train(MlpModel& m, const TrainingDataset& ds, const PenaltyOperator& pen, const TrainConfig& cfg) {
  if (!m.network_hash.empty() && m.network_hash != ds.network_hash)
    throw ValidationError("dataset network " + ds.network_hash + " does not match model network " + m.network_hash);
  if (static_cast<std::size_t>(m.input_dim()) != ds.load_buses.size() || static_cast<std::size_t>(m.output_dim()) != ds.predicted.size())
    throw ValidationError("model dimensions " + std::to_string(m.input_dim()) + "->" + std::to_string(m.output_dim()) +
                          " do not match dataset " + std::to_string(ds.load_buses.size()) + "->" +
                          std::to_string(ds.predicted.size()));
  return train(m, make_batch(m, ds), pen, cfg);
}

/// Model sized for `net` with normalization fitted on the training loads.
inline MlpModel make_model_for(const PowerNetwork& net, const TrainingDataset& train_set, std::vector<int> hidden,
                               std::uint64_t seed) {
  if (hidden.empty()) hidden = default_hidden_sizes(net.n_buses());
  std::vector<int> dims{static_cast<int>(net.load_buses().size())};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(static_cast<int>(predicted_generators(net).size()));
  auto m = make_model(dims, seed);
  m.network_hash = network_hash(net);
  m.architecture_tag = net.name;
  for (const int h : hidden) m.architecture_tag += (m.architecture_tag.size() == net.name.size() ? ":" : "/") + std::to_string(h);
  if (!train_set.records.empty()) fit_normalization(m, make_batch(m, train_set).loads);
  return m;
}

inline constexpr char kModelMagic[9] = "CALOPFM1";
inline constexpr std::uint64_t kModelVersion = 1;

inline std::string model_to_bytes(const MlpModel& m) {
  nlohmann::json h;
  h["dims"] = m.dims;
  h["architecture"] = m.architecture_tag;
  h["network_hash"] = m.network_hash;
  h["train_config"] = to_json(m.config);
  h["provenance"] = m.provenance;
  const std::string header = h.dump();
  std::string out(kModelMagic, 8);
  put_u64(out, kModelVersion);
  put_u64(out, header.size());
  out += header;
  for (const auto& layer : m.layers) {
    for (Eigen::Index i = 0; i < layer.w.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.w.cols(); ++j) put_f64(out, layer.w(i, j));
    for (Eigen::Index i = 0; i < layer.b.size(); ++i) put_f64(out, layer.b[i]);
  }
  for (Eigen::Index i = 0; i < m.input_mean.size(); ++i) put_f64(out, m.input_mean[i]);
  for (Eigen::Index i = 0; i < m.input_scale.size(); ++i) put_f64(out, m.input_scale[i]);
  put_u64(out, fnv1a64(out));
  return out;
}

inline MlpModel model_from_bytes(std::string_view bytes) {
  if (bytes.size() < 8 || bytes.substr(0, 8) != std::string_view(kModelMagic, 8)) throw FormatError("not a model file");
  if (bytes.size() < 32) throw FormatError("model file truncated");
  {
    ByteReader tail(bytes.substr(bytes.size() - 8));
    if (tail.u64() != fnv1a64(bytes.substr(0, bytes.size() - 8))) throw FormatError("model checksum mismatch (corrupted file)");
  }
  ByteReader in(bytes.substr(0, bytes.size() - 8));
  in.bytes(8);
  const auto version = in.u64();
  if (version != kModelVersion) throw FormatError("unsupported model version " + std::to_string(version));
  const auto header_len = in.u64();
  if (header_len > in.remaining()) throw FormatError("model header length exceeds file size");
  MlpModel m;
  try {
    const auto h = nlohmann::json::parse(in.bytes(header_len));
    m.dims = h.at("dims").get<std::vector<int>>();
    m.architecture_tag = h.at("architecture").get<std::string>();
    m.network_hash = h.at("network_hash").get<std::string>();
    m.config = train_config_from_json(h.at("train_config"));
    m.provenance = h.value("provenance", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model header: ") + e.what());
  }
  if (m.dims.size() < 2) throw FormatError("model has fewer than two layers");
  std::size_t expected = 0;
  for (const int d : m.dims)
    if (d <= 0 || d > (1 << 20)) throw FormatError("implausible layer dimension in model header");
  for (std::size_t l = 0; l + 1 < m.dims.size(); ++l)
    expected += static_cast<std::size_t>(m.dims[l + 1]) * static_cast<std::size_t>(m.dims[l] + 1);
  expected += 2 * static_cast<std::size_t>(m.dims.front());
  if (in.remaining() != expected * 8) throw FormatError("model weight block has the wrong size");
  for (std::size_t l = 0; l + 1 < m.dims.size(); ++l) {
    DenseLayer layer;
    layer.w.resize(m.dims[l + 1], m.dims[l]);
    layer.b.resize(m.dims[l + 1]);
    for (Eigen::Index i = 0; i < layer.w.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.w.cols(); ++j) layer.w(i, j) = in.f64();
    for (Eigen::Index i = 0; i < layer.b.size(); ++i) layer.b[i] = in.f64();
    m.layers.push_back(std::move(layer));
  }
  m.input_mean.resize(m.dims.front());
  m.input_scale.resize(m.dims.front());
  for (Eigen::Index i = 0; i < m.input_mean.size(); ++i) m.input_mean[i] = in.f64();
  for (Eigen::Index i = 0; i < m.input_scale.size(); ++i) m.input_scale[i] = in.f64();
  return m;
}

inline void save_model(const MlpModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  const auto bytes = model_to_bytes(m);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

/// A non-empty `expected_hash` must match the network the model was trained for.
inline MlpModel load_model(const std::string& path, const std::string& expected_hash = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model '" + path + "'");
  auto m = model_from_bytes(slurp(in));
  if (!expected_hash.empty() && m.network_hash != expected_hash)
    throw FormatError("model '" + path + "' was trained for network " + m.network_hash + ", not " + expected_hash);
  return m;
}

}  // namespace calopf
