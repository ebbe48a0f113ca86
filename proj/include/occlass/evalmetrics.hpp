#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "occlass/taxonomy.hpp"

namespace occlass {

class EvalError : public std::runtime_error {
 public:
  enum class Kind { EmptyEvaluation, Misaligned };
  EvalError(Kind kind, const std::string& what) : std::runtime_error(what), kind(kind) {}
  Kind kind;
};

// Macro-F1 averages either over the whole class list (absent classes
// contribute F1 = 0, which depresses scores on imbalanced data) or only over
// classes with gold support.
enum class MacroAveraging { FullClassList, PresentOnly };

// preds/golds are class positions in [0, n_classes). Per class,
// F1 = 2PR/(P+R) with P or R taken as 0 when undefined.
double macro_f1(std::span<const size_t> preds, std::span<const size_t> golds, size_t n_classes,
                MacroAveraging averaging = MacroAveraging::FullClassList);

// Percentage of samples whose gold class ranks among the k best scores; ties
// resolve in class-position order (class positions follow code order, so the
// smaller code wins). k larger than the class count is capped, with a note
// to `warn` when provided.
double topk_accuracy(std::span<const std::vector<double>> scores, std::span<const size_t> golds,
                     size_t k, std::ostream* warn = nullptr);

// Hierarchical precision/recall/F over ancestor sets (each side includes the
// node itself): hP = |P n T|/|P|, hR = |P n T|/|T|. Equal-depth codes give
// hP = hR. Unknown codes raise TaxonomyError::UnknownCode.
struct HierPrf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};
HierPrf hierarchical_prf(const std::string& pred_code, const std::string& gold_code,
                         const Taxonomy& taxonomy);

// Corpus roll-up: micro sums intersections and set sizes before dividing;
// mean averages the per-sample values.
struct HierAggregate {
  HierPrf micro;
  HierPrf mean;
  size_t samples = 0;
};
HierAggregate hierarchical_prf_corpus(std::span<const std::string> preds,
                                      std::span<const std::string> golds,
                                      const Taxonomy& taxonomy);

// Per gold class with support >= 1: support and error rate (1 - recall),
// sorted by ascending support, class position breaking ties.
struct SupportError {
  size_t class_index = 0;
  size_t support = 0;
  double error_rate = 0.0;
};
std::vector<SupportError> error_vs_support(std::span<const size_t> preds,
                                           std::span<const size_t> golds, size_t n_classes);

// counts[true][pred] over level-l codes; leaf labels are truncated to their
// level-l ancestors. Row sums equal per-class support and trace() counts the
// correct samples.
struct ConfusionMatrix {
  int level = 1;
  std::vector<std::string> labels;          // level codes in taxonomy order
  std::vector<std::vector<size_t>> counts;  // [true][pred]
  size_t total = 0;

  size_t trace() const;
  std::string to_csv() const;
};
ConfusionMatrix confusion(const Taxonomy& taxonomy, std::span<const size_t> pred_leaves,
                          std::span<const size_t> gold_leaves, int level);

// Same matrix built from positions already expressed at the target level,
// for callers whose per-level predictions do not come from a single leaf
// distribution.
ConfusionMatrix confusion_at_level(const Taxonomy& taxonomy, int level,
                                   std::span<const size_t> pred_positions,
                                   std::span<const size_t> gold_positions);

// Level scores where each level node takes its best leaf, so the level
// argmax is the ancestor of the leaf argmax and level accuracy can never
// fall below leaf accuracy.
std::vector<double> level_scores_from_leaves(const Taxonomy& taxonomy,
                                             std::span<const double> leaf_scores, int level);

struct LevelMetrics {
  int level = 1;
  double macro_f1 = 0.0;
  double top1 = 0.0;   // percentages
  double top5 = 0.0;
  double top10 = 0.0;
  ConfusionMatrix matrix;
};

struct EvalReport {
  std::vector<LevelMetrics> levels;         // ascending 1..depth
  HierAggregate hierarchy;                  // over leaf predictions
  std::vector<SupportError> support_table;  // leaf classes
  size_t samples = 0;

  std::string summary_json() const;  // machine-readable one-object summary
  std::string render_text() const;   // human-readable tables
};

// Full multi-level report from per-sample leaf score vectors and gold leaf
// positions. Level 1..depth metrics come from best-leaf level scores.
EvalReport evaluate(const Taxonomy& taxonomy, std::span<const std::vector<double>> leaf_scores,
                    std::span<const size_t> gold_leaves, std::ostream* warn = nullptr);

}  // namespace occlass
