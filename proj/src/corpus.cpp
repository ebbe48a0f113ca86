#include "occlass/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "json.hpp"
#include "occlass/util.hpp"

namespace occlass {

using nlohmann::json;

namespace {

std::string snippet_of(const std::string& line) {
  return line.size() <= 80 ? line : line.substr(0, 77) + "...";
}

// returns reason on failure, empty string on success
std::string parse_record(const json& j, JobAd& ad) {
  if (!j.is_object()) return "not a JSON object";
  for (const char* key : {"id", "title", "description", "skills", "labels"}) {
    if (!j.contains(key)) return std::string("missing field: ") + key;
  }
  if (!j["id"].is_string() || j["id"].get<std::string>().empty()) return "bad id";
  if (!j["title"].is_string()) return "title must be a string";
  if (!j["description"].is_string()) return "description must be a string";
  if (!j["skills"].is_array()) return "skills must be an array";
  if (!j["labels"].is_object()) return "labels must be an object";

  ad.id = j["id"].get<std::string>();
  ad.title = j["title"].get<std::string>();
  ad.description = j["description"].get<std::string>();
  ad.skills.clear();
  for (const auto& s : j["skills"]) {
    if (!s.is_string()) return "skills must contain strings";
    ad.skills.push_back(s.get<std::string>());
  }
  ad.labels.clear();
  for (const auto& [key, value] : j["labels"].items()) {
    auto scheme = scheme_from_name(key);
    if (!scheme) return "unknown scheme: " + key;
    if (!value.is_string()) return "label for " + key + " must be a string";
    std::string code = value.get<std::string>();
    if (code != "0") {
      try {
        code = parse_code(code, *scheme).text();  // canonicalize
      } catch (const CodeError& e) {
        return std::string("bad label: ") + e.what();
      }
    }
    ad.labels[*scheme] = code;
  }
  return {};
}

}  // namespace

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw CorpusError(CorpusError::Kind::Unreadable, "cannot open corpus file: " + path);
  }
  Corpus corpus;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
      corpus.rejects.push_back({lineno, "invalid JSON", snippet_of(line)});
      continue;
    }
    JobAd ad;
    if (std::string reason = parse_record(j, ad); !reason.empty()) {
      corpus.rejects.push_back({lineno, reason, snippet_of(line)});
      continue;
    }
    if (!seen_ids.insert(ad.id).second) {
      throw CorpusError(CorpusError::Kind::DuplicateId,
                        "duplicate id '" + ad.id + "' at line " + std::to_string(lineno));
    }
    corpus.ads.push_back(std::move(ad));
  }
  return corpus;
}

std::string to_jsonl_line(const JobAd& ad) {
  json j;
  j["id"] = ad.id;
  j["title"] = ad.title;
  j["description"] = ad.description;
  j["skills"] = ad.skills;
  json labels = json::object();
  for (const auto& [scheme, code] : ad.labels) labels[scheme_name(scheme)] = code;
  j["labels"] = labels;
  return j.dump();
}

void save_corpus(const std::vector<JobAd>& ads, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError(CorpusError::Kind::Unreadable, "cannot write: " + path);
  for (const auto& ad : ads) out << to_jsonl_line(ad) << '\n';
}

SplitResult split(const std::vector<JobAd>& ads, const SplitSpec& spec) {
  if (!(spec.test_fraction >= 0.0 && spec.test_fraction <= 1.0)) {
    throw std::invalid_argument("test_fraction must lie in [0,1]");
  }
  struct Ranked {
    uint64_t hash;
    const std::string* id;
    size_t index;
  };
  std::vector<Ranked> eligible;
  eligible.reserve(ads.size());
  SplitResult result;
  for (size_t i = 0; i < ads.size(); ++i) {
    if (ads[i].known_label(spec.scheme)) {
      eligible.push_back({stable_hash64(ads[i].id, spec.seed), &ads[i].id, i});
    } else {
      ++result.excluded;
    }
  }
  if (eligible.empty()) {
    throw CorpusError(CorpusError::Kind::EmptyAfterFilter,
                      std::string("no ads carry a known ") + scheme_name(spec.scheme) + " label");
  }
  // rank by (hash, id); ids are unique so the order is total
  std::sort(eligible.begin(), eligible.end(), [](const Ranked& a, const Ranked& b) {
    return a.hash != b.hash ? a.hash < b.hash : *a.id < *b.id;
  });
  size_t n_test = static_cast<size_t>(
      std::llround(spec.test_fraction * static_cast<double>(eligible.size())));
  for (size_t r = 0; r < eligible.size(); ++r) {
    (r < n_test ? result.test : result.train).push_back(eligible[r].index);
  }
  std::sort(result.train.begin(), result.train.end());
  std::sort(result.test.begin(), result.test.end());
  return result;
}

double TokenLengthStats::fraction_over(size_t n) const {
  if (total == 0) return 0.0;
  size_t over = 0;
  for (const auto& [len, count] : counts) {
    if (len > n) over += count;
  }
  return static_cast<double>(over) / static_cast<double>(total);
}

double TokenLengthStats::mean() const {
  if (total == 0) return 0.0;
  double sum = 0;
  for (const auto& [len, count] : counts) sum += static_cast<double>(len) * count;
  return sum / static_cast<double>(total);
}

size_t TokenLengthStats::max() const {
  return counts.empty() ? 0 : counts.rbegin()->first;
}

size_t TokenLengthStats::percentile(double p) const {
  if (total == 0) return 0;
  p = std::min(100.0, std::max(0.0, p));
  size_t rank = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(total)));
  rank = std::max<size_t>(rank, 1);
  size_t seen = 0;
  for (const auto& [len, count] : counts) {
    seen += count;
    if (seen >= rank) return len;
  }
  return max();
}

std::vector<TokenLengthStats::Bucket> TokenLengthStats::histogram(size_t bucket_width) const {
  std::vector<Bucket> out;
  if (bucket_width == 0 || counts.empty()) return out;
  size_t top = max();
  for (size_t lo = 0; lo <= top; lo += bucket_width) {
    out.push_back({lo, lo + bucket_width - 1, 0});
  }
  for (const auto& [len, count] : counts) out[len / bucket_width].count += count;
  return out;
}

TokenLengthStats token_length_stats(const std::vector<JobAd>& ads, const Tokenizer& tokenizer,
                                    Field field) {
  TokenLengthStats stats;
  for (const auto& ad : ads) {
    size_t len;
    if (field == Field::Skills) {
      len = tokenizer(join(ad.skills, " "), field).size();
    } else {
      len = tokenizer(ad.text(field), field).size();
    }
    ++stats.counts[len];
    ++stats.total;
  }
  return stats;
}

}  // namespace occlass
