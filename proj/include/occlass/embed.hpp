#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "occlass/textprep.hpp"

namespace occlass {

class EmbedError : public std::runtime_error {
 public:
  enum class Kind { MissingEmbedding, DimensionMismatch, Transport, Protocol, Store };
  EmbedError(Kind kind, const std::string& what) : std::runtime_error(what), kind(kind) {}
  Kind kind;
};

// Fixed seeds for the two independent hash roles (bucket choice and sign).
// Changing either invalidates every stored hashed embedding, so they are
// constants of the format rather than configuration.
inline constexpr uint64_t kHashedBucketSeed = 0x5eedb00c5ULL;
inline constexpr uint64_t kHashedSignSeed = 0x51611a7u;

// Signed hashed n-gram bag: every token n-gram of order 1..max_ngram is
// hashed to a bucket and adds +-1 (second hash picks the sign); the result is
// L2-normalized. The all-zero vector (blank input) stays zero. Same token
// multiset at order 1 => same vector regardless of order.
std::vector<double> embed_hashed(const TokenSeq& seq, size_t dim, int max_ngram);

// Line-oriented vector store:
//   dim=<d> provider=<id>
//   <record id>\t<v1>,<v2>,...,<vd>
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(size_t dim, std::string provider) : dim_(dim), provider_(std::move(provider)) {}

  static EmbeddingStore load(const std::string& path);
  void save(const std::string& path) const;

  size_t dim() const { return dim_; }
  const std::string& provider() const { return provider_; }
  size_t size() const { return records_.size(); }

  bool contains(const std::string& id) const { return records_.count(id) > 0; }
  const std::vector<double>& lookup(const std::string& id) const;  // MissingEmbedding if absent
  void put(const std::string& id, std::vector<double> vec);        // DimensionMismatch enforced

 private:
  size_t dim_ = 0;
  std::string provider_;
  std::map<std::string, std::vector<double>> records_;  // ordered => deterministic save
};

struct RemoteConfig {
  std::string base_url;        // e.g. "http://127.0.0.1:8080"
  std::string path = "/embed";
  std::string provider_id;     // names the encoder; cache keys depend on it
  int max_attempts = 3;        // transport retries; protocol errors never retry
  int backoff_ms = 100;        // doubled per retry
  int timeout_s = 30;
  size_t batch_size = 32;
};

// Batch client for a remote text encoder. Request {"texts":[...]} maps to
// response {"vectors":[[...],...]} in order. Vectors are cached in an
// EmbeddingStore keyed by content hash, so repeated texts never re-query and
// switching provider ids never serves stale vectors.
class RemoteEmbedder {
 public:
  RemoteEmbedder(RemoteConfig config, EmbeddingStore* cache);

  std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts);
  const std::string& provider_id() const { return config_.provider_id; }

  static std::string content_key(const std::string& text);

 private:
  std::vector<std::vector<double>> fetch(const std::vector<std::string>& texts);

  RemoteConfig config_;
  EmbeddingStore* cache_;  // optional; may be null
};

// Skill vocabulary: sorted unique normalized skill strings from the training
// split. Normalization is trim + ASCII lowercase.
class SkillVocab {
 public:
  static SkillVocab build(const std::vector<std::vector<std::string>>& skill_lists);
  static SkillVocab from_entries(std::vector<std::string> sorted_entries);

  int index(const std::string& skill) const;  // -1 for out-of-vocabulary
  size_t size() const { return entries_.size(); }
  const std::vector<std::string>& entries() const { return entries_; }
  static std::string normalize(const std::string& skill);

 private:
  std::vector<std::string> entries_;
  std::map<std::string, int> index_;
};

// Multi-hot skill vector; out-of-vocabulary skills are skipped and tallied.
std::vector<double> vectorize_skills(const std::vector<std::string>& skills,
                                     const SkillVocab& vocab,
                                     std::atomic<uint64_t>* oov_tally = nullptr);

}  // namespace occlass
