#pragma once

#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "occlass/bundle.hpp"
#include "occlass/corpus.hpp"
#include "occlass/embed.hpp"
#include "occlass/ensemble.hpp"
#include "occlass/evalmetrics.hpp"
#include "occlass/hierarchy.hpp"
#include "occlass/taxonomy.hpp"
#include "occlass/train.hpp"
#include "occlass/tune.hpp"

namespace occlass {

inline constexpr const char* kToolName = "occlass";
inline constexpr const char* kToolVersion = "0.1.0";

class PipelineError : public std::runtime_error {
 public:
  enum class Kind { Config, Data };
  PipelineError(Kind kind, const std::string& what) : std::runtime_error(what), kind(kind) {}
  Kind kind;
};

// External vector providers an encoder may need; both optional, checked at
// encoder construction so misconfiguration fails before any work.
struct EncodeContext {
  const EmbeddingStore* store = nullptr;
  RemoteEmbedder* remote = nullptr;
};

// Executes one EncoderSpec: presence test and document -> input vector.
// Tokenizer and skill vocabularies are built once at construction.
class DocumentEncoder {
 public:
  explicit DocumentEncoder(EncoderSpec spec, EncodeContext ctx = {});

  const EncoderSpec& spec() const { return spec_; }

  // The feature this encoder consumes: "title", "description" or "skills".
  std::string feature() const;

  // A document has the feature when the consumed field is non-blank.
  bool present(const JobAd& ad) const;

  // Encodes one document to a spec().dim-wide vector. Store-backed encoders
  // throw EmbedError{MissingEmbedding} for unknown documents.
  std::vector<double> encode(const JobAd& ad) const;

 private:
  std::string prepared_text(const JobAd& ad) const;

  EncoderSpec spec_;
  EncodeContext ctx_;
  std::shared_ptr<const Tokenizer> tokenizer_;  // hashed_ngram only
  std::shared_ptr<const SkillVocab> skills_;    // skills only
};

// One-off conveniences wrapping a temporary DocumentEncoder.
bool feature_present(const EncoderSpec& spec, const JobAd& ad);
std::vector<double> encode_document(const EncoderSpec& spec, const JobAd& ad,
                                    const EncodeContext& ctx = {});

// Supervised rows for one taxonomy level: inputs, level-position targets and
// back-pointers to the source ads. Ads without a usable label or without the
// encoder's feature are skipped and tallied; a labelled ad whose code is not
// a leaf throws PipelineError{Data}.
struct EncodedDataset {
  int level = 0;
  std::vector<std::string> class_codes;  // taxonomy level order
  std::vector<std::vector<double>> xs;
  std::vector<size_t> ys;          // positions into class_codes
  std::vector<size_t> ad_indices;  // rows into the source span
  size_t skipped_unlabeled = 0;
  size_t skipped_absent = 0;
};

EncodedDataset build_dataset(std::span<const JobAd> ads, const Taxonomy& taxonomy, int level,
                             const DocumentEncoder& encoder);

struct TrainBundleOptions {
  std::string arch = "simple";  // "baseline" | "simple" | "skillnet" | "ovr"
  size_t hidden = 512;          // simple only
  std::optional<double> dropout;
  TrainConfig train;
  double val_fraction = 0.15;  // carved off the labelled rows
  uint64_t split_seed = 7;
};

struct TrainedBundle {
  ModelBundle bundle;
  TrainReport report;
  size_t train_count = 0;
  size_t val_count = 0;
};

// Encode, split off a validation slice, train one head and wrap it with its
// encoder as a self-contained bundle.
TrainedBundle train_bundle(std::span<const JobAd> ads, const Taxonomy& taxonomy, int level,
                           const EncoderSpec& encoder, const TrainBundleOptions& options,
                           const EncodeContext& ctx = {}, std::ostream* log = nullptr);

// Runs one bundle on one document and returns per-class probabilities in the
// bundle's class order (softmax over logits; one-vs-rest heads already emit
// per-class probabilities).
std::vector<double> score_document(const ModelBundle& bundle, const JobAd& ad,
                                   const EncodeContext& ctx = {});

struct PredictOptions {
  std::optional<CombineMode> postprocess;  // overrides a level bank's configured mode
  std::vector<int> prune_levels;           // ancestry constraint from these levels
  size_t top_k = 10;                       // entries kept per level when serialized
};

struct DocumentPrediction {
  std::string id;
  std::vector<LevelDistribution> levels;  // model distributions, levels 1..depth
  std::vector<double> leaf_scores;        // operative leaf distribution (post combine/prune)
  size_t leaf_position = 0;
  std::string leaf_code;
  bool pruned = false;
  bool prune_fell_back = false;
  std::vector<MemberVote> votes;  // fused classifiers only
};

// A loaded, ready-to-run classifier: a single leaf model, a bank of
// per-level models, or a weighted fusion of other classifiers.
class Classifier {
 public:
  static Classifier flat(const Taxonomy* taxonomy, ModelBundle leaf_model,
                         EncodeContext ctx = {});
  static Classifier level_bank(const Taxonomy* taxonomy, std::vector<ModelBundle> per_level,
                               std::optional<CombineMode> combine = std::nullopt,
                               EncodeContext ctx = {});
  static Classifier fused(const Taxonomy* taxonomy, std::vector<Classifier> members,
                          std::vector<double> weights = {});

  // Builds from an on-disk spec: single-model members become flat
  // classifiers, multi-model members become level banks with the member's
  // postprocess mode. Relative model paths resolve against base_dir.
  static Classifier from_spec(const Taxonomy* taxonomy, const EnsembleFileSpec& spec,
                              const std::string& base_dir, EncodeContext ctx = {});

  DocumentPrediction predict(const JobAd& ad, const PredictOptions& options = {}) const;

  bool present(const JobAd& ad) const;  // fused: any member present
  const std::string& feature() const { return feature_; }
  size_t member_count() const { return members_.size(); }
  const Taxonomy& taxonomy() const { return *taxonomy_; }

 private:
  enum class Kind { Flat, Bank, Fused };

  Classifier() = default;

  const Taxonomy* taxonomy_ = nullptr;
  Kind kind_ = Kind::Flat;
  std::string feature_;
  std::vector<ModelBundle> bundles_;  // flat: one; bank: one per level, ascending
  std::vector<DocumentEncoder> encoders_;  // parallel to bundles_
  std::optional<CombineMode> combine_;
  std::vector<std::shared_ptr<Classifier>> members_;  // fused only
  std::vector<double> weights_;
};

// Everything that determines a run's outputs: command, resolved
// configuration and content digests of every input. Timestamps are kept out
// so identical runs produce identical manifests.
struct RunManifest {
  std::string command;
  uint64_t seed = 0;
  int threads = 1;
  std::string scheme;
  std::map<std::string, std::string> config;  // resolved flag values
  std::map<std::string, std::string> inputs;  // path -> content digest

  void add_input(const std::string& path);  // throws PipelineError{Data} when unreadable
  std::string to_json() const;              // canonical single-line form
  std::string digest() const;               // stable hex digest of to_json()
};

// One serialized prediction: ranked (code, probability) lists per level.
// The leaf level reflects the operative leaf distribution, upper levels the
// model's own distributions.
struct LevelTopEntry {
  std::string code;
  double prob = 0.0;
};

struct PredictionRow {
  std::string id;
  std::string leaf_code;
  bool prune_fell_back = false;
  std::vector<std::pair<int, std::vector<LevelTopEntry>>> levels;  // ascending by level
};

std::string prediction_to_json(const DocumentPrediction& pred, const Taxonomy& taxonomy,
                               size_t top_k = 10);
PredictionRow prediction_row_from_json(const std::string& line);

// Scores serialized predictions against gold ads (matched by id; unlabelled
// golds are skipped). Top-k columns are capped at the shortest stored list.
EvalReport evaluate_rows(const Taxonomy& taxonomy, std::span<const PredictionRow> rows,
                         std::span<const JobAd> gold_ads, std::ostream* warn = nullptr);

// Maps named tuning values onto a training configuration. Recognized names:
// learning_rate, weight_decay, epochs, hidden_dropout; attention_dropout is
// accepted but has nothing to bind to in native heads, so it only warns;
// anything else throws PipelineError{Config}.
struct AppliedTrial {
  TrainConfig config;
  std::optional<double> hidden_dropout;
};

AppliedTrial apply_trial(const TrialConfig& trial, const TrainConfig& base,
                         std::ostream* warn = nullptr);

// Adapter from the tuner's fold callback to train_model: each call builds
// the head from the trial's values and reports best validation accuracy.
FoldTrainer make_fold_trainer(const std::string& arch, size_t n_classes, const TrainConfig& base,
                              size_t hidden = 512);

// Corpus load plus taxonomy-membership validation: ads whose label under the
// taxonomy's scheme is not a leaf are rejected (line 0 marks post-parse
// rejects); unlabelled ads are kept for prediction use.
struct IngestResult {
  std::vector<JobAd> ads;
  std::vector<RejectedRecord> rejects;
  size_t labeled = 0;        // kept ads with a usable label
  size_t parse_rejects = 0;  // rejects that came from the container format
};

IngestResult ingest_corpus(const std::string& path, const Taxonomy& taxonomy);

}  // namespace occlass
