#pragma once

// Load sampling, ground-truth labelling and the on-disk dataset format.
//
// File layout (all integers and floats little-endian):
//
//   "CALOPFD1"            8 bytes
//   version               u64
//   header length         u64
//   header                JSON text (network hash, plan, seed, range, column layout)
//   records               n_records x n_columns f64
//   checksum              u64, FNV-1a of everything above
//
// Columns: sample index, load (MW) at each load bus, alpha per predicted generator,
// optimal cost ($/h), slack generation (MW).

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "calopf/binary_io.hpp"
#include "calopf/calibration.hpp"
#include "calopf/dcopf.hpp"
#include "calopf/network_json.hpp"
#include "calopf/scaling.hpp"
#include "json.hpp"

namespace calopf {

enum class Regime { full, light, heavy };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::full: return "full";
    case Regime::light: return "light";
    case Regime::heavy: return "heavy";
  }
  return "?";
}

inline Regime regime_from_string(const std::string& s) {
  if (s == "full") return Regime::full;
  if (s == "light") return Regime::light;
  if (s == "heavy") return Regime::heavy;
  throw std::invalid_argument("unknown load regime '" + s + "' (expected full, light or heavy)");
}

/// Fractions of the default load.
struct LoadRange {
  double lo = 1.0;
  double hi = 1.3;
};

inline LoadRange regime_range(Regime r) {
  switch (r) {
    case Regime::light: return {0.9, 1.1};
    case Regime::heavy: return {1.1, 1.3};
    case Regime::full: break;
  }
  return {1.0, 1.3};
}

struct LoadSample {
  Eigen::VectorXd load;  // per bus, per-unit
  Regime regime = Regime::full;
  std::uint64_t index = 0;
};

enum class Stream : std::uint64_t { train = 0, test = 1 };

namespace detail {

// Per-sample generator so that sample i does not depend on how many were drawn before.
// seed_seq, mt19937_64 and the 53-bit conversion below are fully specified, hence portable.
inline std::mt19937_64 sample_rng(std::uint64_t seed, Stream stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

inline void check_range(const LoadRange& r) {
  if (!(r.lo > 0.0) || !(r.lo <= r.hi) || !std::isfinite(r.hi))
    throw std::invalid_argument("load range must satisfy 0 < lo <= hi");
}

/// Sample `index` of a stream: every load bus drawn uniformly in [lo, hi] x default.
inline LoadSample sample_load(const PowerNetwork& net, const LoadRange& range, std::uint64_t seed, std::uint64_t index,
                              Stream stream = Stream::train, Regime regime = Regime::full) {
  check_range(range);
  auto rng = detail::sample_rng(seed, stream, index);
  LoadSample s;
  s.regime = regime;
  s.index = index;
  s.load = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.n_buses()));
  for (const int b : net.load_buses()) {
    const double u = detail::unit_uniform(rng);
    s.load[b] = net.buses[static_cast<std::size_t>(b)].load * (range.lo + (range.hi - range.lo) * u);
  }
  return s;
}

inline std::vector<LoadSample> sample_loads(const PowerNetwork& net, const LoadRange& range, std::size_t n,
                                            std::uint64_t seed, Stream stream = Stream::train,
                                            Regime regime = Regime::full) {
  check_range(range);
  if (n == 0) throw std::invalid_argument("sample count must be positive");
  std::vector<LoadSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_load(net, range, seed, i, stream, regime));
  return out;
}

enum class Split { train, test };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct DatasetRecord {
  LoadSample sample;
  Eigen::VectorXd alpha;
  double cost = 0.0;              // $/h
  double slack_generation = 0.0;  // per-unit
};

struct TrainingDataset {
  Split split = Split::train;
  std::string network_name;
  std::string network_hash;
  std::size_t n_buses = 0;
  double base_mva = 100.0;
  std::vector<int> load_buses;
  std::vector<int> predicted;
  CalibrationPlan plan = zero_plan();
  std::uint64_t seed = 0;
  LoadRange range;
  Regime regime = Regime::full;
  std::size_t discarded = 0;
  std::vector<DatasetRecord> records;

  std::size_t size() const { return records.size(); }
};

struct GenerateOptions {
  SolverOptions solver;
  Regime regime = Regime::full;
  unsigned workers = 1;  // 0 = hardware concurrency
};

class DiscardRateError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

namespace detail {

struct Labelled {
  bool ok = false;
  DatasetRecord record;
};

inline Labelled label_sample(const PowerNetwork& net, const AdmittanceSystem& adm, const EffectiveLimits& limits,
                             LoadSample sample, const SolverOptions& opts, QpSolver& solver) {
  Labelled out;
  const DcOpfProblem prob{net, adm, sample.load, limits};
  const auto sol = solve_dcopf(prob, opts, &solver);
  if (sol.status != SolveStatus::optimal) return out;
  out.ok = true;
  out.record.alpha = encode_alpha(net, sol.p_g);
  out.record.cost = sol.cost;
  out.record.slack_generation = sol.p_g[net.slack_generator()];
  out.record.sample = std::move(sample);
  return out;
}

/// Labels samples [first, first + count) of a stream on `workers` threads; results are in index order.
inline std::vector<Labelled> label_range(const PowerNetwork& net, const AdmittanceSystem& adm,
                                         const EffectiveLimits& limits, const LoadRange& range, std::uint64_t seed,
                                         Stream stream, std::uint64_t first, std::size_t count,
                                         const GenerateOptions& opts) {
  std::vector<Labelled> out(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    QpSolver solver;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        out[i] = label_sample(net, adm, limits, sample_load(net, range, seed, first + i, stream, opts.regime),
                              opts.solver, solver);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  unsigned workers = opts.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opts.workers;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

inline TrainingDataset label_split(const PowerNetwork& net, const AdmittanceSystem& adm, const EffectiveLimits& limits,
                                   const CalibrationPlan& plan, Split split, std::size_t n, const LoadRange& range,
                                   std::uint64_t seed, const GenerateOptions& opts) {
  TrainingDataset ds;
  ds.split = split;
  ds.network_name = net.name;
  ds.network_hash = network_hash(net);
  ds.n_buses = net.n_buses();
  ds.base_mva = net.base_mva;
  ds.load_buses = net.load_buses();
  ds.predicted = predicted_generators(net);
  ds.plan = plan;
  ds.seed = seed;
  ds.range = range;
  ds.regime = opts.regime;
  const Stream stream = split == Split::train ? Stream::train : Stream::test;

  std::uint64_t next = 0;
  while (ds.records.size() < n) {
    const std::size_t want = n - ds.records.size();
    for (auto& l : label_range(net, adm, limits, range, seed, stream, next, want, opts)) {
      if (l.ok)
        ds.records.push_back(std::move(l.record));
      else
        ++ds.discarded;
    }
    next += want;
    if (ds.discarded > n)
      throw DiscardRateError(std::string(to_string(split)) + " split: " + std::to_string(ds.discarded) +
                             " infeasible samples discarded while collecting " + std::to_string(n) +
                             " (discard rate above 50%); the calibration is too aggressive for load range [" +
                             nlohmann::json(range.lo).dump() + ", " + nlohmann::json(range.hi).dump() + "]");
  }
  return ds;
}

}  // namespace detail

/// Train split labelled under the calibrated limits, test split under the original limits.
/// Samples whose solve does not reach optimality are discarded and replaced by the next
/// indices of the same stream.
inline std::pair<TrainingDataset, TrainingDataset> generate_dataset(const PowerNetwork& net, const CalibrationPlan& plan,
                                                                    std::size_t n_train, std::size_t n_test,
                                                                    const LoadRange& range, std::uint64_t seed,
                                                                    const GenerateOptions& opts = {}) {
  check_range(range);
  const auto adm = build_admittance(net);
  const auto calibrated = apply_plan(net, plan);
  auto train = detail::label_split(net, adm, calibrated, plan, Split::train, n_train, range, seed, opts);
  auto test = detail::label_split(net, adm, default_limits(net), plan, Split::test, n_test, range, seed, opts);
  return {std::move(train), std::move(test)};
}

inline constexpr char kDatasetMagic[9] = "CALOPFD1";
inline constexpr std::uint64_t kDatasetVersion = 1;

inline std::size_t dataset_columns(const TrainingDataset& ds) { return 1 + ds.load_buses.size() + ds.predicted.size() + 2; }

inline std::string dataset_to_bytes(const TrainingDataset& ds) {
  nlohmann::json h;
  h["split"] = to_string(ds.split);
  h["network"] = {{"name", ds.network_name}, {"hash", ds.network_hash}, {"n_buses", ds.n_buses}, {"base_mva", ds.base_mva}};
  h["plan"] = plan_to_json(ds.plan);
  h["calibrated"] = !ds.plan.is_zero();
  h["seed"] = ds.seed;
  h["range"] = {ds.range.lo, ds.range.hi};
  h["regime"] = to_string(ds.regime);
  h["discarded"] = ds.discarded;
  h["n_records"] = ds.records.size();
  h["load_buses"] = ds.load_buses;
  h["predicted_generators"] = ds.predicted;
  h["columns"] = {{"index", 1}, {"load_mw", ds.load_buses.size()}, {"alpha", ds.predicted.size()}, {"cost", 1}, {"slack_mw", 1}};
  const std::string header = h.dump();

  std::string out(kDatasetMagic, 8);
  put_u64(out, kDatasetVersion);
  put_u64(out, header.size());
  out += header;
  for (const auto& r : ds.records) {
    if (static_cast<std::size_t>(r.alpha.size()) != ds.predicted.size())
      throw std::invalid_argument("record alpha dimension does not match the dataset layout");
    put_f64(out, static_cast<double>(r.sample.index));
    for (const int b : ds.load_buses) put_f64(out, r.sample.load[b] * ds.base_mva);
    for (Eigen::Index j = 0; j < r.alpha.size(); ++j) put_f64(out, r.alpha[j]);
    put_f64(out, r.cost);
    put_f64(out, r.slack_generation * ds.base_mva);
  }
  put_u64(out, fnv1a64(out));
  return out;
}

inline TrainingDataset dataset_from_bytes(std::string_view bytes) {
  if (bytes.size() < 8 || bytes.substr(0, 8) != std::string_view(kDatasetMagic, 8)) throw FormatError("not a dataset file");
  if (bytes.size() < 32) throw FormatError("dataset file truncated");
  {
    ByteReader tail(bytes.substr(bytes.size() - 8));
    if (tail.u64() != fnv1a64(bytes.substr(0, bytes.size() - 8))) throw FormatError("dataset checksum mismatch");
  }
  ByteReader in(bytes.substr(0, bytes.size() - 8));
  in.bytes(8);
  const auto version = in.u64();
  if (version != kDatasetVersion) throw FormatError("unsupported dataset version " + std::to_string(version));
  const auto header_len = in.u64();
  if (header_len > in.remaining()) throw FormatError("dataset header length exceeds file size");
  TrainingDataset ds;
  std::size_t n_records = 0;
  try {
    const auto h = nlohmann::json::parse(in.bytes(header_len));
    const auto split = h.at("split").get<std::string>();
    if (split != "train" && split != "test") throw FormatError("unknown split '" + split + "'");
    ds.split = split == "train" ? Split::train : Split::test;
    ds.network_name = h.at("network").at("name").get<std::string>();
    ds.network_hash = h.at("network").at("hash").get<std::string>();
    ds.n_buses = h.at("network").at("n_buses").get<std::size_t>();
    ds.base_mva = h.at("network").at("base_mva").get<double>();
    ds.plan = plan_from_json(h.at("plan"));
    ds.seed = h.at("seed").get<std::uint64_t>();
    ds.range = {h.at("range").at(0).get<double>(), h.at("range").at(1).get<double>()};
    ds.regime = regime_from_string(h.at("regime").get<std::string>());
    ds.discarded = h.at("discarded").get<std::size_t>();
    ds.load_buses = h.at("load_buses").get<std::vector<int>>();
    ds.predicted = h.at("predicted_generators").get<std::vector<int>>();
    n_records = h.at("n_records").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed dataset header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("malformed dataset header: ") + e.what());
  }
  for (const int b : ds.load_buses)
    if (b < 0 || static_cast<std::size_t>(b) >= ds.n_buses) throw FormatError("load bus index out of range");
  const std::size_t cols = dataset_columns(ds);
  if (in.remaining() != n_records * cols * 8) throw FormatError("dataset record block has the wrong size");
  ds.records.resize(n_records);
  for (auto& r : ds.records) {
    r.sample.index = static_cast<std::uint64_t>(in.f64());
    r.sample.regime = ds.regime;
    r.sample.load = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ds.n_buses));
    for (const int b : ds.load_buses) r.sample.load[b] = in.f64() / ds.base_mva;
    r.alpha.resize(static_cast<Eigen::Index>(ds.predicted.size()));
    for (Eigen::Index j = 0; j < r.alpha.size(); ++j) r.alpha[j] = in.f64();
    r.cost = in.f64();
    r.slack_generation = in.f64() / ds.base_mva;
  }
  return ds;
}

inline void save_dataset(const TrainingDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  const auto bytes = dataset_to_bytes(ds);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

/// Reads a dataset; a non-empty `expected_hash` must match the stored network hash.
inline TrainingDataset load_dataset(const std::string& path, const std::string& expected_hash = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset '" + path + "'");
  auto ds = dataset_from_bytes(slurp(in));
  if (!expected_hash.empty() && ds.network_hash != expected_hash)
    throw FormatError("dataset '" + path + "' belongs to network " + ds.network_hash + ", expected " + expected_hash);
  return ds;
}

}  // namespace calopf
