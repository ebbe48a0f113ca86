#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "occlass/corpus.hpp"
#include "occlass/taxonomy.hpp"

namespace occlass {

class EnsembleError : public std::runtime_error {
 public:
  enum class Kind { Config, SchemeMismatch, DimensionMismatch };
  EnsembleError(Kind kind, const std::string& what) : std::runtime_error(what), kind(kind) {}
  Kind kind;
};

// Normalized weighted fusion: each member vector is renormalized to a
// distribution (all-zero becomes uniform), then fused[l] = sum_i w_i * s_i[l]
// / sum_i w_i. Empty weights mean uniform weights. Scaling all weights by a
// positive constant leaves the result unchanged.
std::vector<double> fuse_scores(const std::vector<std::vector<double>>& member_scores,
                                std::span<const double> weights = {});

// A member scores one document with leaf-aligned values, or reports the
// document lacks its feature (nullopt), in which case the ensemble
// substitutes a uniform distribution so weight semantics stay stable.
using MemberScorer = std::function<std::optional<std::vector<double>>(const JobAd&)>;

struct EnsembleMember {
  std::string feature;  // label carried into the trace
  double weight = 1.0;
  MemberScorer scorer;
};

struct MemberVote {
  std::string feature;
  bool absent = false;     // feature missing; a uniform distribution stood in
  size_t leaf_position = 0;
  double confidence = 0.0; // the member's own top probability
};

struct FusedPrediction {
  std::vector<double> fused;  // leaf-aligned distribution
  size_t leaf_position = 0;   // argmax; ties break toward the smaller code
  std::string leaf_code;
  std::vector<MemberVote> votes;  // one per member, in registration order
};

class Ensemble {
 public:
  explicit Ensemble(const Taxonomy* taxonomy) : taxonomy_(taxonomy) {}

  // Weight must be finite and positive, the feature label nonempty.
  void add_member(EnsembleMember member);
  size_t size() const { return members_.size(); }

  FusedPrediction predict(const JobAd& ad) const;

  const Taxonomy& taxonomy() const { return *taxonomy_; }

 private:
  const Taxonomy* taxonomy_;
  std::vector<EnsembleMember> members_;
};

inline constexpr const char* kEnsembleFormat = "occlass.ensemble v1";

// On-disk ensemble description: which model files make up each member, how a
// multi-level member collapses its levels to leaf scores, and the fusion
// weights. Model loading happens elsewhere; this is pure configuration.
struct MemberSpec {
  std::string feature;
  std::vector<std::string> model_paths;  // one per level for a level bank
  double weight = 1.0;
  std::string postprocess = "none";      // combine mode name, or "none" (single model only)
};

struct EnsembleFileSpec {
  std::string scheme;  // optional annotation; validated against the models at load time
  std::vector<MemberSpec> members;

  // Strict JSON: unknown keys are rejected so typos fail loudly.
  static EnsembleFileSpec parse(const std::string& json_text);
  std::string to_json() const;
};

EnsembleFileSpec load_ensemble_spec(const std::string& path);
void save_ensemble_spec(const EnsembleFileSpec& spec, const std::string& path);

}  // namespace occlass
