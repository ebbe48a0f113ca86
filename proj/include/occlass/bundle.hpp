#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "occlass/codes.hpp"
#include "occlass/field.hpp"
#include "occlass/nnet.hpp"
#include "occlass/textprep.hpp"

namespace occlass {

class BundleError : public std::runtime_error {
 public:
  enum class Kind { Io, Format, Version, Inconsistent };
  BundleError(Kind kind, const std::string& what) : std::runtime_error(what), kind(kind) {}
  Kind kind;
};

// Full description of how an ad becomes the model's input vector. Stored in
// the model file so a saved model predicts with no side files; store/remote
// vector providers are the exception, pinned by provider id and resolved at
// prediction time.
struct EncoderSpec {
  Field field = Field::Description;
  CleanRuleSet clean = CleanRuleSet::none();
  TruncationPolicy truncation;
  std::string tokenizer = "hashed_words";    // "wordpiece" | "hashed_words" | "none"
  uint32_t hash_buckets = 32768;             // hashed_words only
  std::vector<std::string> vocab;            // wordpiece pieces, inline
  std::string vector_kind = "hashed_ngram";  // "hashed_ngram" | "store" | "remote" | "skills"
  size_t dim = 512;                          // input vector width
  int max_ngram = 2;                         // hashed_ngram only
  std::string provider_id = "hashed";
  std::vector<std::string> skill_vocab;      // skills only (sorted unique entries)

  void validate() const;  // throws std::invalid_argument
};

// One trained head plus everything needed to run it: architecture, flat
// parameters, the class list its logits index into, and the input encoder.
struct ModelBundle {
  Scheme scheme = Scheme::Ons2020;
  int level = 4;
  HeadArchitecture arch;
  ModelParams params;
  std::vector<std::string> class_codes;  // logit index -> taxonomy code text
  EncoderSpec encoder;
  uint64_t init_seed = 0;
  std::string manifest_digest;  // digest of the run manifest that produced it

  void validate() const;  // throws BundleError{Inconsistent}
};

// Text model file, versioned:
//   occlass.model v1
//   <single-line JSON header: scheme, level, architecture, classes, encoder>
//   block layer<i>.<weight|bias|gain|ln_bias> <count>
//   <count decimal values on one line, round-trip exact>
//   ...
//   end
void save_model(const ModelBundle& bundle, const std::string& path);
ModelBundle load_model(const std::string& path);

}  // namespace occlass
