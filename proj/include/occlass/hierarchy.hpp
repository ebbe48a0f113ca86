#pragma once

#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "occlass/taxonomy.hpp"

namespace occlass {

class HierarchyError : public std::runtime_error {
 public:
  enum class Kind { DimensionMismatch, InconsistentScheme, MissingModel };
  HierarchyError(Kind kind, const std::string& what) : std::runtime_error(what), kind(kind) {}
  Kind kind;
};

// Probability distribution over one taxonomy level, index-aligned with
// Taxonomy::level_nodes(level).
struct LevelDistribution {
  int level = 1;
  std::vector<double> probs;
};

// A scoring backend: encoded document in, class scores out. The hierarchy
// layer neither knows nor cares whether a neural head or a test stub sits
// behind it; scores are aligned with the class codes the model was
// registered with.
using ScoreFn = std::function<std::vector<double>(std::span<const double>)>;

// One model per taxonomy level, all consuming the same encoded input.
// Class lists must exactly match the taxonomy's level indexes; outputs are
// re-aligned to taxonomy order and defensively renormalized.
class LevelBank {
 public:
  explicit LevelBank(const Taxonomy* taxonomy) : taxonomy_(taxonomy) {}

  void set_level(int level, const std::vector<std::string>& class_codes, ScoreFn model);
  bool complete() const;  // every level 1..depth registered

  // One distribution per level, ascending. Throws MissingModel when
  // incomplete, DimensionMismatch when a model emits the wrong width.
  std::vector<LevelDistribution> predict_levels(std::span<const double> x) const;

  const Taxonomy& taxonomy() const { return *taxonomy_; }

 private:
  struct Entry {
    ScoreFn model;
    std::vector<size_t> to_taxonomy;  // model output index -> level position
  };
  const Taxonomy* taxonomy_;
  std::map<int, Entry> levels_;
};

// Top-down router: the root model picks a level-1 node; descent continues
// while the picked node's confidence clears the threshold and a child model
// exists, otherwise the flat fallback classifies to a leaf directly.
// tau = 1.0 always falls back (no softmax confidence reaches 1 exactly), so
// the router then reproduces the flat model verbatim.
class LcpnRouter {
 public:
  LcpnRouter(const Taxonomy* taxonomy, double tau);

  void set_root(const std::vector<std::string>& class_codes, ScoreFn model);
  void set_children(const std::string& parent_code, const std::vector<std::string>& class_codes,
                    ScoreFn model);
  void set_flat(const std::vector<std::string>& class_codes, ScoreFn model);

  struct Decision {
    std::string at;          // "root", parent code, or "flat"
    std::string picked;      // code chosen at this step
    double confidence = 0.0;
  };
  struct Route {
    std::string leaf_code;
    std::vector<Decision> trace;
    bool used_fallback = false;
  };

  Route predict(std::span<const double> x) const;
  double tau() const { return tau_; }

 private:
  struct Entry {
    ScoreFn model;
    std::vector<int> nodes;  // taxonomy node indices aligned with model output
  };

  const Taxonomy* taxonomy_;
  double tau_;
  Entry root_;
  Entry flat_;
  std::map<std::string, Entry> children_;  // parent code -> child model
};

// Re-orders model scores (aligned with class_codes) into taxonomy level
// order and renormalizes. The class list must cover the level exactly;
// negative or non-finite scores are rejected and an all-zero vector becomes
// uniform.
LevelDistribution align_level_distribution(const Taxonomy& taxonomy, int level,
                                           const std::vector<std::string>& class_codes,
                                           const std::vector<double>& scores);

enum class CombineMode { TotalAvg, WeightedAvg, JointProb };
const char* combine_mode_name(CombineMode m);
CombineMode combine_mode_from_name(const std::string& name);

// Scores every leaf from its ancestor path (a1..aD):
//   total_avg    -> mean of probs[ak]
//   weighted_avg -> sum wk * probs[ak] / sum wk   (default weights 1..D)
//   joint_prob   -> product of probs[ak]
// then renormalizes over leaves. dists must cover levels 1..depth ascending.
// A zero-mass result (possible only with hand-built inputs) falls back to
// the uniform leaf distribution.
std::vector<double> combine_levels(const Taxonomy& taxonomy,
                                   const std::vector<LevelDistribution>& dists, CombineMode mode,
                                   std::span<const double> weights = {});

struct PruneResult {
  std::vector<double> scores;  // leaf-aligned, renormalized
  bool fell_back = false;      // pruning emptied the support; scores are the input
};

// Zeroes every leaf whose level-k ancestor is not the level-k argmax, for
// each k in keep_levels, then renormalizes. Empty support falls back to the
// unpruned scores with the flag set.
PruneResult logical_prune(const Taxonomy& taxonomy, const std::vector<LevelDistribution>& dists,
                          std::span<const double> leaf_scores,
                          const std::vector<int>& keep_levels);

// First-maximum argmax: with level indexes sorted by code text this is the
// lexicographically smallest tied code.
size_t argmax_position(std::span<const double> scores);

}  // namespace occlass
