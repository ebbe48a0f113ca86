#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "occlass/codes.hpp"
#include "occlass/field.hpp"
#include "occlass/textprep.hpp"

namespace occlass {

class CorpusError : public std::runtime_error {
 public:
  enum class Kind { Unreadable, DuplicateId, EmptyAfterFilter };
  CorpusError(Kind kind, const std::string& what) : std::runtime_error(what), kind(kind) {}
  Kind kind;
};

struct JobAd {
  std::string id;
  std::string title;
  std::string description;
  std::vector<std::string> skills;
  std::map<Scheme, std::string> labels;  // leaf code text or the sentinel "0"

  // Label usable for supervised work under the scheme (present and not "0").
  std::optional<std::string> known_label(Scheme scheme) const {
    auto it = labels.find(scheme);
    if (it == labels.end() || it->second == "0") return std::nullopt;
    return it->second;
  }

  const std::string& text(Field f) const {
    return f == Field::Title ? title : description;
  }
};

struct RejectedRecord {
  size_t line;         // 1-based line in the source file
  std::string reason;
  std::string snippet; // first bytes of the offending line
};

struct Corpus {
  std::vector<JobAd> ads;
  std::vector<RejectedRecord> rejects;
};

// JSONL, one object per line with fields id, title, description, skills
// (string array), labels (object mapping scheme name to code string).
// Malformed records land in `rejects` with line numbers instead of aborting;
// only an unreadable file or a duplicate id is fatal. Label values must be
// grammatical codes of their scheme or the sentinel "0" (taxonomy membership
// is checked later, at ingest, where the taxonomy is known).
Corpus load_corpus(const std::string& path);

// Serialize ads back to the same container format.
void save_corpus(const std::vector<JobAd>& ads, const std::string& path);
std::string to_jsonl_line(const JobAd& ad);

struct SplitSpec {
  double test_fraction = 0.1;
  uint64_t seed = 0;
  Scheme scheme = Scheme::Ons2010;  // ads without a known label here are excluded
};

struct SplitResult {
  std::vector<size_t> train;  // indices into the input ads
  std::vector<size_t> test;
  size_t excluded = 0;        // unlabeled / sentinel-labeled ads
};

// Deterministic, id-driven assignment: eligible ids are ranked by
// hash(id, seed) and the first round(test_fraction * n_eligible) become the
// test set. Membership depends only on (id, seed, fraction, eligible set),
// never on file order. Throws EmptyAfterFilter when nothing is eligible.
SplitResult split(const std::vector<JobAd>& ads, const SplitSpec& spec);

struct TokenLengthStats {
  std::map<size_t, size_t> counts;  // token length -> number of documents
  size_t total = 0;

  double fraction_over(size_t n) const;
  double mean() const;
  size_t max() const;
  size_t percentile(double p) const;  // nearest-rank, p in [0,100]

  struct Bucket {
    size_t lo, hi;  // inclusive
    size_t count;
  };
  std::vector<Bucket> histogram(size_t bucket_width) const;
};

// Token-length distribution of one field across the corpus.
TokenLengthStats token_length_stats(const std::vector<JobAd>& ads, const Tokenizer& tokenizer,
                                    Field field);

}  // namespace occlass
