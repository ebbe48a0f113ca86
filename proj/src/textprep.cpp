#include "occlass/textprep.hpp"

#include <cctype>
#include <fstream>
#include <regex>
#include <stdexcept>

#include "occlass/util.hpp"

namespace occlass {

namespace {

// '/' joining word characters reads as "or". Lookahead keeps "a/b/c" intact
// under a single replace pass (no lookbehind in ECMAScript).
const std::regex& or_slash_re() {
  static const std::regex re("([A-Za-z0-9])/(?=[A-Za-z0-9])");
  return re;
}

const std::regex& bracket_re() {
  static const std::regex re("\\([^()]*\\)");
  return re;
}

// "10hrs", "10 hr", "10-20 hrs"
const std::regex& hours_re() {
  static const std::regex re("(\\d+\\s*-\\s*)?\\d+\\s*hrs?\\b", std::regex::icase);
  return re;
}

// currency-anchored amount, optional range continuation and rate suffix:
// "£9.20- £10.50 per hour", "$30k", "€2,400 p.a."
const std::regex& salary_re() {
  static const std::regex re(
      "(£|\\$|€)\\s*\\d+([.,]\\d+)?(\\s*k\\b)?"
      "(\\s*(-|–|to)\\s*(£|\\$|€)?\\s*\\d+([.,]\\d+)?(\\s*k\\b)?)?"
      "(\\s*(per\\s+\\w+|p\\.?a\\b\\.?|p/h\\b|ph\\b))?",
      std::regex::icase);
  return re;
}

}  // namespace

std::string clean(std::string_view text, const CleanRuleSet& rules, Field field) {
  std::string s(text);
  if (rules.split_or_phrases && std::regex_search(s, or_slash_re())) {
    s = std::regex_replace(s, or_slash_re(), "$1 ");
    s = lower_ascii(s);  // Table-1 behavior: the or-split row is lowercased
  }
  if (rules.strip_bracketed) {
    // innermost-out so nested pairs disappear; unbalanced brackets stay
    for (;;) {
      std::string next = std::regex_replace(s, bracket_re(), " ");
      if (next == s) break;
      s = std::move(next);
    }
  }
  if (rules.strip_hour_ranges) s = std::regex_replace(s, hours_re(), " ");
  if (rules.strip_salary_ranges) s = std::regex_replace(s, salary_re(), " ");
  if (rules.truncate_after_hyphen && field == Field::Title) {
    if (size_t cut = s.find('-'); cut != std::string::npos) s.resize(cut);
  }
  return collapse_spaces(s);
}

SubwordVocab SubwordVocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocab file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = trim(line);
    if (!t.empty()) tokens.push_back(std::move(t));
  }
  return from_tokens(tokens);
}

SubwordVocab SubwordVocab::from_tokens(const std::vector<std::string>& tokens) {
  SubwordVocab v;
  v.pieces_.reserve(tokens.size() + 1);
  for (const auto& t : tokens) {
    if (v.ids_.count(t)) throw std::runtime_error("duplicate vocab entry: " + t);
    v.ids_[t] = static_cast<int32_t>(v.pieces_.size());
    v.pieces_.push_back(t);
    v.max_piece_chars_ = std::max(v.max_piece_chars_, t.size());
  }
  auto unk = v.ids_.find(kUnk);
  if (unk == v.ids_.end()) {
    v.unk_id_ = static_cast<int32_t>(v.pieces_.size());
    v.ids_[kUnk] = v.unk_id_;
    v.pieces_.push_back(kUnk);
    v.max_piece_chars_ = std::max(v.max_piece_chars_, std::string(kUnk).size());
  } else {
    v.unk_id_ = unk->second;
  }
  return v;
}

int32_t SubwordVocab::id(std::string_view piece) const {
  auto it = ids_.find(std::string(piece));
  return it == ids_.end() ? -1 : it->second;
}

namespace {

template <class Fn>
void for_each_word(std::string_view text, Fn&& fn) {
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) fn(text.substr(start, i - start));
  }
}

}  // namespace

TokenSeq tokenize(std::string_view text, const SubwordVocab& vocab, Field source) {
  TokenSeq out;
  out.source = source;
  std::string probe;
  for_each_word(text, [&](std::string_view word) {
    std::vector<int32_t> word_ids;
    size_t pos = 0;
    bool bad = false;
    while (pos < word.size()) {
      size_t budget = vocab.max_piece_chars();
      if (pos > 0 && budget >= 2) budget -= 2;  // continuation probes carry the sigil
      size_t longest = std::min(word.size() - pos, budget);
      int32_t match = -1;
      size_t match_len = 0;
      for (size_t len = longest; len >= 1; --len) {
        probe.clear();
        if (pos > 0) probe = SubwordVocab::kContinuation;
        probe.append(word.substr(pos, len));
        if (int32_t id = vocab.id(probe); id >= 0) {
          match = id;
          match_len = len;
          break;
        }
      }
      if (match < 0) {
        bad = true;
        break;
      }
      word_ids.push_back(match);
      pos += match_len;
    }
    if (bad) {
      out.ids.push_back(vocab.unk_id());
    } else {
      out.ids.insert(out.ids.end(), word_ids.begin(), word_ids.end());
    }
  });
  return out;
}

std::string detokenize(const TokenSeq& seq, const SubwordVocab& vocab) {
  std::string out;
  for (int32_t id : seq.ids) {
    const std::string& p = vocab.piece(id);
    if (p.rfind(SubwordVocab::kContinuation, 0) == 0 && p.size() > 2) {
      out += p.substr(2);
    } else {
      if (!out.empty()) out += ' ';
      out += p;
    }
  }
  return out;
}

TokenSeq tokenize_hashed(std::string_view text, uint32_t buckets, Field source) {
  if (buckets == 0) throw std::invalid_argument("bucket count must be positive");
  TokenSeq out;
  out.source = source;
  for_each_word(text, [&](std::string_view word) {
    out.ids.push_back(static_cast<int32_t>(fnv1a64(word) % buckets));
  });
  return out;
}

TokenSeq truncate(const TokenSeq& seq, const TruncationPolicy& policy) {
  if (policy.strategy == TruncationPolicy::Strategy::Mixed &&
      policy.mixed_head_len > policy.max_len) {
    throw std::invalid_argument("mixed head length exceeds max length");
  }
  if (seq.ids.size() <= policy.max_len) return seq;
  TokenSeq out;
  out.source = seq.source;
  out.ids.reserve(policy.max_len);
  switch (policy.strategy) {
    case TruncationPolicy::Strategy::Head:
      out.ids.assign(seq.ids.begin(), seq.ids.begin() + static_cast<long>(policy.max_len));
      break;
    case TruncationPolicy::Strategy::Tail:
      out.ids.assign(seq.ids.end() - static_cast<long>(policy.max_len), seq.ids.end());
      break;
    case TruncationPolicy::Strategy::Mixed: {
      size_t tail_len = policy.max_len - policy.mixed_head_len;
      out.ids.assign(seq.ids.begin(), seq.ids.begin() + static_cast<long>(policy.mixed_head_len));
      out.ids.insert(out.ids.end(), seq.ids.end() - static_cast<long>(tail_len), seq.ids.end());
      break;
    }
  }
  return out;
}

const char* truncation_name(TruncationPolicy::Strategy s) {
  switch (s) {
    case TruncationPolicy::Strategy::Head: return "head";
    case TruncationPolicy::Strategy::Tail: return "tail";
    case TruncationPolicy::Strategy::Mixed: return "mixed";
  }
  return "?";
}

TruncationPolicy::Strategy truncation_from_name(std::string_view name) {
  if (name == "head") return TruncationPolicy::Strategy::Head;
  if (name == "tail") return TruncationPolicy::Strategy::Tail;
  if (name == "mixed") return TruncationPolicy::Strategy::Mixed;
  throw std::invalid_argument("unknown truncation strategy: " + std::string(name));
}

}  // namespace occlass
