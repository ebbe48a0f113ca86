#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "occlass/field.hpp"

namespace occlass {

// Ordered, individually toggleable cleaning rules. Each rule is idempotent
// and the full pass is idempotent. Rules fire in declaration order; salary
// spans are removed before hyphen truncation so ranges like "£9.20- £10.50"
// never trigger the cut.
struct CleanRuleSet {
  bool split_or_phrases = true;      // "Cleaner/maid" -> "cleaner maid" (lowercases on fire)
  bool strip_bracketed = true;       // "x (Kirby House)" -> "x"
  bool strip_hour_ranges = true;     // "x 10hrs" -> "x"
  bool strip_salary_ranges = true;   // "x £9.20- £10.50 per hour" -> "x"
  bool truncate_after_hyphen = true; // titles only: "x-CSCS card holder" -> "x"

  static CleanRuleSet all() { return {}; }
  static CleanRuleSet none() { return {false, false, false, false, false}; }
};

std::string clean(std::string_view text, const CleanRuleSet& rules, Field field = Field::Title);

// Subword vocabulary: one token per line, continuation pieces carry a "##"
// prefix. The unknown symbol is always present (appended when the file lacks
// it). Ids are line order.
class SubwordVocab {
 public:
  static constexpr const char* kUnk = "[UNK]";
  static constexpr const char* kContinuation = "##";

  static SubwordVocab load(const std::string& path);
  static SubwordVocab from_tokens(const std::vector<std::string>& tokens);

  int32_t id(std::string_view piece) const;  // -1 when absent
  const std::string& piece(int32_t id) const { return pieces_[static_cast<size_t>(id)]; }
  int32_t unk_id() const { return unk_id_; }
  size_t size() const { return pieces_.size(); }
  size_t max_piece_chars() const { return max_piece_chars_; }

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int32_t> ids_;
  int32_t unk_id_ = -1;
  size_t max_piece_chars_ = 0;
};

struct TokenSeq {
  std::vector<int32_t> ids;
  Field source = Field::Title;

  size_t size() const { return ids.size(); }
};

// Greedy longest-match wordpiece segmentation per whitespace-separated word.
// Within a word, non-initial matches use the "##"-prefixed entries; a word
// with no match at some position emits a single unknown token for the whole
// word. len(tokenize(s)) == 0 iff s is blank.
TokenSeq tokenize(std::string_view text, const SubwordVocab& vocab, Field source = Field::Title);

// Inverse helper: join pieces, stripping continuation sigils.
std::string detokenize(const TokenSeq& seq, const SubwordVocab& vocab);

// Fallback tokenizer when no subword vocab is supplied: whitespace words
// hashed into a fixed bucket space. Ids are not invertible.
TokenSeq tokenize_hashed(std::string_view text, uint32_t buckets, Field source = Field::Title);

// Uniform tokenizer handle used by corpus statistics and the pipeline.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual TokenSeq operator()(std::string_view text, Field source) const = 0;
  virtual uint32_t id_space() const = 0;  // exclusive upper bound on token ids
};

class WordPieceTokenizer final : public Tokenizer {
 public:
  explicit WordPieceTokenizer(SubwordVocab vocab) : vocab_(std::move(vocab)) {}
  TokenSeq operator()(std::string_view text, Field source) const override {
    return tokenize(text, vocab_, source);
  }
  uint32_t id_space() const override { return static_cast<uint32_t>(vocab_.size()); }
  const SubwordVocab& vocab() const { return vocab_; }

 private:
  SubwordVocab vocab_;
};

class HashBucketTokenizer final : public Tokenizer {
 public:
  explicit HashBucketTokenizer(uint32_t buckets) : buckets_(buckets) {}
  TokenSeq operator()(std::string_view text, Field source) const override {
    return tokenize_hashed(text, buckets_, source);
  }
  uint32_t id_space() const override { return buckets_; }

 private:
  uint32_t buckets_;
};

struct TruncationPolicy {
  enum class Strategy { Head, Tail, Mixed };
  Strategy strategy = Strategy::Head;
  size_t max_len = 512;
  size_t mixed_head_len = 384;  // mixed keeps this many leading tokens, rest from the tail

  static TruncationPolicy head(size_t max_len = 512) { return {Strategy::Head, max_len, 384}; }
  static TruncationPolicy tail(size_t max_len = 512) { return {Strategy::Tail, max_len, 384}; }
  static TruncationPolicy mixed(size_t max_len = 512, size_t head_len = 384) {
    return {Strategy::Mixed, max_len, head_len};
  }
};

// |truncate(s)| == min(|s|, max_len); head keeps the first max_len tokens,
// tail the last, mixed the first mixed_head_len plus the last
// (max_len - mixed_head_len). Relative order always preserved.
TokenSeq truncate(const TokenSeq& seq, const TruncationPolicy& policy);

const char* truncation_name(TruncationPolicy::Strategy s);
TruncationPolicy::Strategy truncation_from_name(std::string_view name);

}  // namespace occlass
