#include "occlass/tune.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "occlass/util.hpp"

namespace occlass {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

[[noreturn]] void bad_space(const std::string& what) {
  throw TuneError(TuneError::Kind::BadSpace, what);
}

// Number of grid points above lo, i.e. valid k range is [0, grid_steps].
long grid_steps(const Dimension& d) {
  return std::lround((d.hi - d.lo) / d.step);
}

double snap_to_grid(const Dimension& d, double v) {
  long k = std::lround((v - d.lo) / d.step);
  k = std::clamp(k, 0L, grid_steps(d));
  return d.lo + static_cast<double>(k) * d.step;
}

// Coordinate the estimator works in: log space for log-uniform dimensions.
double to_internal(const Dimension& d, double v) {
  return d.kind == Dimension::Kind::LogUniform ? std::log(v) : v;
}

double from_internal(const Dimension& d, double t) {
  return d.kind == Dimension::Kind::LogUniform ? std::exp(t) : t;
}

double clip_snap(const Dimension& d, double v) {
  v = std::clamp(v, d.lo, d.hi);
  if (d.kind == Dimension::Kind::Quantized) v = snap_to_grid(d, v);
  return v;
}

// Parzen density over one dimension: a uniform floor over the range plus a
// Gaussian kernel per observation, all equally weighted. The floor keeps
// densities positive everywhere so the good/rest ratio is always defined.
// Kernel widths adapt to the gap to the nearest neighbors, so dense clusters
// sharpen while isolated points stay wide enough to keep exploring.
struct Parzen {
  double t_lo = 0.0;
  double t_hi = 1.0;
  std::vector<double> points;      // internal coordinates
  std::vector<double> bandwidths;  // one per point

  Parzen(const Dimension& d, const std::vector<double>& values) {
    t_lo = to_internal(d, d.lo);
    t_hi = to_internal(d, d.hi);
    double range = t_hi - t_lo;
    for (double v : values) points.push_back(to_internal(d, v));

    std::vector<double> sorted = points;
    std::sort(sorted.begin(), sorted.end());
    bandwidths.resize(points.size());
    for (size_t i = 0; i < points.size(); ++i) {
      size_t r = static_cast<size_t>(
          std::lower_bound(sorted.begin(), sorted.end(), points[i]) - sorted.begin());
      double left = r > 0 ? points[i] - sorted[r - 1] : range;
      double right = r + 1 < sorted.size() ? sorted[r + 1] - points[i] : range;
      bandwidths[i] = std::clamp(std::max(left, right), range * 0.03, range);
    }
  }

  double density(double t) const {
    double range = t_hi - t_lo;
    double acc = 1.0 / range;  // uniform floor component
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    for (size_t i = 0; i < points.size(); ++i) {
      double z = (t - points[i]) / bandwidths[i];
      acc += kInvSqrt2Pi / bandwidths[i] * std::exp(-0.5 * z * z);
    }
    return acc / static_cast<double>(points.size() + 1);
  }

  // Draw from the mixture: one share for the uniform floor, one per kernel.
  double sample(Rng& rng) const {
    size_t pick = rng.below(points.size() + 1);
    if (pick == points.size()) return t_lo + rng.next_double() * (t_hi - t_lo);
    return points[pick] + rng.normal() * bandwidths[pick];
  }
};

}  // namespace

SearchSpace& SearchSpace::add_uniform(const std::string& name, double lo, double hi) {
  dims.push_back({name, Dimension::Kind::Uniform, lo, hi, 0.0});
  return *this;
}

SearchSpace& SearchSpace::add_log_uniform(const std::string& name, double lo, double hi) {
  dims.push_back({name, Dimension::Kind::LogUniform, lo, hi, 0.0});
  return *this;
}

SearchSpace& SearchSpace::add_quantized(const std::string& name, double lo, double hi,
                                        double step) {
  dims.push_back({name, Dimension::Kind::Quantized, lo, hi, step});
  return *this;
}

void SearchSpace::validate() const {
  if (dims.empty()) bad_space("search space has no dimensions");
  for (const Dimension& d : dims) {
    if (d.name.empty()) bad_space("dimension without a name");
    for (const Dimension& other : dims) {
      if (&other != &d && other.name == d.name) bad_space("duplicate dimension " + d.name);
    }
    if (!std::isfinite(d.lo) || !std::isfinite(d.hi) || !(d.lo < d.hi)) {
      bad_space("dimension " + d.name + " needs lo < hi");
    }
    if (d.kind == Dimension::Kind::LogUniform && !(d.lo > 0.0)) {
      bad_space("log-uniform dimension " + d.name + " needs lo > 0");
    }
    if (d.kind == Dimension::Kind::Quantized) {
      if (!(d.step > 0.0)) bad_space("quantized dimension " + d.name + " needs step > 0");
      long k = grid_steps(d);
      if (k < 1) bad_space("quantized dimension " + d.name + " has no room for a step");
      if (std::fabs(d.lo + static_cast<double>(k) * d.step - d.hi) > 1e-9 * std::fabs(d.hi)) {
        bad_space("quantized dimension " + d.name + ": hi is off the lo + k*step grid");
      }
    }
  }
}

SearchSpace default_search_space() {
  SearchSpace space;
  space.add_quantized("epochs", 5.0, 100.0, 5.0);
  space.add_quantized("hidden_dropout", 0.10, 0.60, 0.05);
  space.add_log_uniform("weight_decay", 1e-9, 1e-2);
  space.add_log_uniform("learning_rate", 1e-6, 1e-1);
  return space;
}

TrialConfig uniform_sample(const SearchSpace& space, Rng& rng) {
  space.validate();
  TrialConfig config;
  for (const Dimension& d : space.dims) {
    double v;
    switch (d.kind) {
      case Dimension::Kind::Uniform: v = rng.uniform(d.lo, d.hi); break;
      case Dimension::Kind::LogUniform:
        v = std::exp(rng.uniform(std::log(d.lo), std::log(d.hi)));
        break;
      case Dimension::Kind::Quantized: {
        long k = rng.below(static_cast<uint64_t>(grid_steps(d)) + 1);
        v = d.lo + static_cast<double>(k) * d.step;
        break;
      }
    }
    config[d.name] = clip_snap(d, v);
  }
  return config;
}

TrialConfig suggest(const SearchSpace& space, const std::vector<TrialRecord>& history, Rng& rng,
                    const TpeOptions& options) {
  space.validate();
  if (history.size() < options.startup_trials) return uniform_sample(space, rng);

  // Split at the gamma quantile of objectives (failed trials sink to the
  // bottom with -infinity).
  std::vector<size_t> order(history.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return history[a].objective > history[b].objective;
  });
  size_t n_good = static_cast<size_t>(
      std::ceil(options.gamma * static_cast<double>(history.size())));
  n_good = std::min({n_good, options.good_cap, history.size() - 1});
  n_good = std::max<size_t>(n_good, 1);

  TrialConfig config;
  for (const Dimension& d : space.dims) {
    std::vector<double> good, rest;
    for (size_t i = 0; i < order.size(); ++i) {
      const TrialRecord& r = history[order[i]];
      auto it = r.config.find(d.name);
      if (it == r.config.end()) continue;  // dimension absent from older records
      (i < n_good ? good : rest).push_back(it->second);
    }
    Parzen a(d, good), b(d, rest);

    double best_v = 0.0;
    double best_ratio = kNegInf;
    for (size_t c = 0; c < options.candidates; ++c) {
      double t = std::clamp(a.sample(rng), a.t_lo, a.t_hi);
      double v = clip_snap(d, from_internal(d, t));
      double at = to_internal(d, v);
      double ratio = a.density(at) / b.density(at);
      if (ratio > best_ratio) {
        best_ratio = ratio;
        best_v = v;
      }
    }
    config[d.name] = best_v;
  }
  return config;
}

TrialRecord cross_validate(const TrialConfig& config, std::span<const std::vector<double>> xs,
                           std::span<const size_t> ys, size_t k, const FoldTrainer& trainer,
                           uint64_t seed) {
  if (xs.size() != ys.size()) {
    throw TuneError(TuneError::Kind::InsufficientData,
                    "feature and label counts differ: " + std::to_string(xs.size()) + " vs " +
                        std::to_string(ys.size()));
  }
  if (k < 2) {
    throw TuneError(TuneError::Kind::InsufficientData, "cross-validation needs k >= 2");
  }
  if (xs.size() < k) {
    throw TuneError(TuneError::Kind::InsufficientData,
                    std::to_string(xs.size()) + " samples cannot fill " + std::to_string(k) +
                        " folds");
  }

  // Fold membership depends only on the seed: shuffled order dealt
  // round-robin gives fold sizes within one of each other.
  std::vector<size_t> order(xs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  auto started = std::chrono::steady_clock::now();
  TrialRecord record;
  record.config = config;
  for (size_t fold = 0; fold < k; ++fold) {
    std::vector<std::vector<double>> train_x, val_x;
    std::vector<size_t> train_y, val_y;
    for (size_t j = 0; j < order.size(); ++j) {
      size_t i = order[j];
      if (j % k == fold) {
        val_x.push_back(xs[i]);
        val_y.push_back(ys[i]);
      } else {
        train_x.push_back(xs[i]);
        train_y.push_back(ys[i]);
      }
    }
    record.fold_scores.push_back(trainer(config, train_x, train_y, val_x, val_y));
  }
  double sum = 0.0;
  for (double s : record.fold_scores) sum += s;
  record.objective = sum / static_cast<double>(k);
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return record;
}

std::string trial_to_json(const TrialRecord& record) {
  nlohmann::json j;
  j["number"] = record.number;
  j["config"] = record.config;
  j["folds"] = record.fold_scores;
  j["status"] = record.failed ? "failed" : "ok";
  if (!record.failed) j["objective"] = record.objective;
  j["wall_seconds"] = record.wall_seconds;
  return j.dump();
}

TrialRecord trial_from_json(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("number") || !j.contains("config") ||
      !j.contains("status")) {
    throw TuneError(TuneError::Kind::Io, "malformed study log line: " + line);
  }
  TrialRecord record;
  try {
    record.number = j["number"].get<size_t>();
    record.config = j["config"].get<TrialConfig>();
    if (j.contains("folds")) record.fold_scores = j["folds"].get<std::vector<double>>();
    record.failed = j["status"].get<std::string>() == "failed";
    record.objective = record.failed ? kNegInf : j.at("objective").get<double>();
    if (j.contains("wall_seconds")) record.wall_seconds = j["wall_seconds"].get<double>();
  } catch (const nlohmann::json::exception&) {
    throw TuneError(TuneError::Kind::Io, "malformed study log line: " + line);
  }
  return record;
}

std::vector<TrialRecord> load_study_log(const std::string& path) {
  std::string text;
  if (!read_file(path, text)) {
    throw TuneError(TuneError::Kind::Io, "cannot read study log: " + path);
  }
  std::vector<TrialRecord> history;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    history.push_back(trial_from_json(line));
  }
  return history;
}

StudyResult run_study(const SearchSpace& space, size_t budget,
                      std::span<const std::vector<double>> xs, std::span<const size_t> ys,
                      const FoldTrainer& trainer, size_t k, uint64_t seed,
                      const std::string& log_path, std::ostream* log,
                      const TpeOptions& options) {
  space.validate();
  if (budget < 1) throw TuneError(TuneError::Kind::BadSpace, "study budget must be >= 1");

  std::vector<TrialRecord> history;
  if (!log_path.empty()) {
    std::ifstream probe(log_path);
    if (probe.good()) history = load_study_log(log_path);
  }

  std::ofstream sink;
  if (!log_path.empty()) {
    sink.open(log_path, std::ios::app);
    if (!sink) throw TuneError(TuneError::Kind::Io, "cannot append to study log: " + log_path);
  }

  Rng study_rng(seed);
  while (history.size() < budget) {
    size_t number = history.size() + 1;
    Rng trial_rng = study_rng.fork(number);
    TrialConfig config = suggest(space, history, trial_rng, options);

    TrialRecord record;
    auto started = std::chrono::steady_clock::now();
    try {
      record = cross_validate(config, xs, ys, k, trainer, trial_rng.next_u64());
    } catch (const std::exception& e) {
      record = TrialRecord{};
      record.config = config;
      record.failed = true;
      record.objective = kNegInf;
      record.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      if (log) *log << "trial " << number << " failed: " << e.what() << "\n";
    }
    record.number = number;
    if (log && !record.failed) {
      *log << "trial " << number << " objective=" << format_double(record.objective) << "\n";
    }
    if (sink.is_open()) {
      sink << trial_to_json(record) << "\n";
      sink.flush();
    }
    history.push_back(std::move(record));
  }

  StudyResult result;
  result.history = history;
  size_t best = 0;
  for (size_t i = 1; i < history.size(); ++i) {
    if (history[i].objective > history[best].objective) best = i;
  }
  result.best = history[best];
  return result;
}

}  // namespace occlass
