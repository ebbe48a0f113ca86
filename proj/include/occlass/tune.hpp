#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "occlass/rng.hpp"

namespace occlass {

class TuneError : public std::runtime_error {
 public:
  enum class Kind { BadSpace, InsufficientData, Io };
  TuneError(Kind kind, const std::string& what) : std::runtime_error(what), kind(kind) {}
  Kind kind;
};

// One search dimension. Quantized dimensions admit exactly the values
// lo + k*step for integer k (hi must land on the grid); log-uniform
// dimensions are sampled uniformly in log space.
struct Dimension {
  enum class Kind { Uniform, LogUniform, Quantized };
  std::string name;
  Kind kind = Kind::Uniform;
  double lo = 0.0;
  double hi = 1.0;
  double step = 0.0;  // quantized only
};

struct SearchSpace {
  std::vector<Dimension> dims;

  SearchSpace& add_uniform(const std::string& name, double lo, double hi);
  SearchSpace& add_log_uniform(const std::string& name, double lo, double hi);
  SearchSpace& add_quantized(const std::string& name, double lo, double hi, double step);
  void validate() const;  // throws BadSpace
};

// The ranges used for head training: epochs in {5,...,100} step 5,
// hidden_dropout in {0.10,...,0.60} step 0.05, weight_decay log-uniform
// [1e-9, 1e-2], learning_rate log-uniform [1e-6, 1e-1].
SearchSpace default_search_space();

using TrialConfig = std::map<std::string, double>;

struct TrialRecord {
  size_t number = 0;
  TrialConfig config;
  std::vector<double> fold_scores;
  double objective = 0.0;  // mean fold accuracy; -infinity for failed trials
  bool failed = false;
  double wall_seconds = 0.0;
};

// Tree-structured Parzen estimator knobs. The first startup_trials are
// uniform; afterwards history splits at the gamma quantile (good-set size
// capped) and candidates drawn from the good-set density are ranked by the
// good/rest density ratio.
struct TpeOptions {
  size_t startup_trials = 10;
  double gamma = 0.25;
  size_t good_cap = 25;
  size_t candidates = 24;
};

// Uniform draw honoring each dimension's scale and grid.
TrialConfig uniform_sample(const SearchSpace& space, Rng& rng);

// Next configuration to try. Every value lies within bounds and exactly on
// the declared grid.
TrialConfig suggest(const SearchSpace& space, const std::vector<TrialRecord>& history, Rng& rng,
                    const TpeOptions& options = {});

// Trains on k-1 folds, validates on the held-out one, and returns the
// validation accuracy in [0, 1].
using FoldTrainer = std::function<double(
    const TrialConfig& config, std::span<const std::vector<double>> train_x,
    std::span<const size_t> train_y, std::span<const std::vector<double>> val_x,
    std::span<const size_t> val_y)>;

// Deterministic k disjoint folds (shuffle driven by seed alone); each fold
// validates once and the objective is the mean fold accuracy. Throws
// InsufficientData when the dataset has fewer than k samples.
TrialRecord cross_validate(const TrialConfig& config, std::span<const std::vector<double>> xs,
                           std::span<const size_t> ys, size_t k, const FoldTrainer& trainer,
                           uint64_t seed);

struct StudyResult {
  TrialRecord best;  // highest objective, earliest trial on ties
  std::vector<TrialRecord> history;
};

// Runs trials until `budget` records exist. A non-empty log_path makes the
// study durable: records append as JSON lines and an existing log resumes
// the study (numbering continues, prior history feeds the estimator). A
// throwing trainer marks the trial failed with objective -infinity and the
// study moves on.
StudyResult run_study(const SearchSpace& space, size_t budget,
                      std::span<const std::vector<double>> xs, std::span<const size_t> ys,
                      const FoldTrainer& trainer, size_t k, uint64_t seed,
                      const std::string& log_path = "", std::ostream* log = nullptr,
                      const TpeOptions& options = {});

// Study log round-trip, one JSON object per line.
std::string trial_to_json(const TrialRecord& record);
TrialRecord trial_from_json(const std::string& line);  // throws Io on malformed lines
std::vector<TrialRecord> load_study_log(const std::string& path);

}  // namespace occlass
