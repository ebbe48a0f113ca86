#include "occlass/embed.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "occlass/util.hpp"

namespace occlass {

using nlohmann::json;

namespace {

uint64_t gram_hash(const int32_t* ids, size_t n, uint64_t seed) {
  uint64_t h = seed;
  for (size_t i = 0; i < n; ++i) {
    h = mix64(h ^ (static_cast<uint64_t>(static_cast<uint32_t>(ids[i])) +
                   0x9e3779b97f4a7c15ULL));
  }
  return h;
}

}  // namespace

std::vector<double> embed_hashed(const TokenSeq& seq, size_t dim, int max_ngram) {
  if (dim == 0) throw std::invalid_argument("embedding dimension must be positive");
  if (max_ngram < 1) throw std::invalid_argument("max_ngram must be at least 1");
  std::vector<double> vec(dim, 0.0);
  const auto& ids = seq.ids;
  for (int n = 1; n <= max_ngram; ++n) {
    if (ids.size() < static_cast<size_t>(n)) break;
    for (size_t i = 0; i + static_cast<size_t>(n) <= ids.size(); ++i) {
      uint64_t bucket = gram_hash(ids.data() + i, static_cast<size_t>(n), kHashedBucketSeed);
      uint64_t sign = gram_hash(ids.data() + i, static_cast<size_t>(n), kHashedSignSeed);
      vec[bucket % dim] += (sign & 1) ? 1.0 : -1.0;
    }
  }
  double norm = 0.0;
  for (double v : vec) norm += v * v;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& v : vec) v /= norm;
  }
  return vec;
}

EmbeddingStore EmbeddingStore::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EmbedError(EmbedError::Kind::Store, "cannot open store: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw EmbedError(EmbedError::Kind::Store, "empty store file: " + path);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  EmbeddingStore store;
  {
    auto parts = split_on(trim(line), ' ');
    if (parts.size() != 2 || parts[0].rfind("dim=", 0) != 0 ||
        parts[1].rfind("provider=", 0) != 0) {
      throw EmbedError(EmbedError::Kind::Store,
                       "bad store header (want 'dim=<d> provider=<id>'): " + line);
    }
    char* end = nullptr;
    long d = std::strtol(parts[0].c_str() + 4, &end, 10);
    if (*end != '\0' || d <= 0) {
      throw EmbedError(EmbedError::Kind::Store, "bad store dimension: " + parts[0]);
    }
    store.dim_ = static_cast<size_t>(d);
    store.provider_ = parts[1].substr(9);
  }
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw EmbedError(EmbedError::Kind::Store,
                       "missing tab separator at line " + std::to_string(lineno));
    }
    std::string id = line.substr(0, tab);
    std::vector<double> vec;
    vec.reserve(store.dim_);
    const char* p = line.c_str() + tab + 1;
    while (*p) {
      char* end = nullptr;
      double v = std::strtod(p, &end);
      if (end == p) {
        throw EmbedError(EmbedError::Kind::Store,
                         "bad number at line " + std::to_string(lineno));
      }
      vec.push_back(v);
      p = end;
      if (*p == ',') ++p;
    }
    if (vec.size() != store.dim_) {
      throw EmbedError(EmbedError::Kind::DimensionMismatch,
                       "record '" + id + "' has " + std::to_string(vec.size()) +
                           " values, store dim is " + std::to_string(store.dim_));
    }
    store.records_[id] = std::move(vec);
  }
  return store;
}

void EmbeddingStore::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EmbedError(EmbedError::Kind::Store, "cannot write store: " + path);
  out << "dim=" << dim_ << " provider=" << provider_ << "\n";
  for (const auto& [id, vec] : records_) {
    out << id << '\t';
    for (size_t i = 0; i < vec.size(); ++i) {
      if (i) out << ',';
      out << format_double(vec[i]);
    }
    out << '\n';
  }
}

const std::vector<double>& EmbeddingStore::lookup(const std::string& id) const {
  auto it = records_.find(id);
  if (it == records_.end()) {
    throw EmbedError(EmbedError::Kind::MissingEmbedding, "no embedding for id '" + id + "'");
  }
  return it->second;
}

void EmbeddingStore::put(const std::string& id, std::vector<double> vec) {
  if (id.empty() || id.find('\t') != std::string::npos || id.find('\n') != std::string::npos) {
    throw EmbedError(EmbedError::Kind::Store, "store ids must be nonempty and tab-free");
  }
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_) {
    throw EmbedError(EmbedError::Kind::DimensionMismatch,
                     "vector for '" + id + "' has " + std::to_string(vec.size()) +
                         " values, store dim is " + std::to_string(dim_));
  }
  records_[id] = std::move(vec);
}

RemoteEmbedder::RemoteEmbedder(RemoteConfig config, EmbeddingStore* cache)
    : config_(std::move(config)), cache_(cache) {
  if (cache_ && !cache_->provider().empty() && cache_->provider() != config_.provider_id) {
    throw EmbedError(EmbedError::Kind::Store,
                     "cache belongs to provider '" + cache_->provider() + "', not '" +
                         config_.provider_id + "'");
  }
}

std::string RemoteEmbedder::content_key(const std::string& text) {
  // two independent 64-bit hashes; collisions are not a practical concern
  return to_hex(fnv1a64(text)) + to_hex(mix64(fnv1a64(text) ^ 0xabcdef1234567890ULL));
}

std::vector<std::vector<double>> RemoteEmbedder::embed_batch(
    const std::vector<std::string>& texts) {
  std::vector<std::vector<double>> out(texts.size());
  std::vector<size_t> missing;
  std::vector<std::string> missing_texts;
  for (size_t i = 0; i < texts.size(); ++i) {
    std::string key = content_key(texts[i]);
    if (cache_ && cache_->contains(key)) {
      out[i] = cache_->lookup(key);
    } else {
      missing.push_back(i);
      missing_texts.push_back(texts[i]);
    }
  }
  if (!missing.empty()) {
    auto fetched = fetch(missing_texts);
    for (size_t k = 0; k < missing.size(); ++k) {
      if (cache_) cache_->put(content_key(missing_texts[k]), fetched[k]);
      out[missing[k]] = std::move(fetched[k]);
    }
  }
  return out;
}

std::vector<std::vector<double>> RemoteEmbedder::fetch(const std::vector<std::string>& texts) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout_s, 0);
  client.set_read_timeout(config_.timeout_s, 0);

  for (size_t start = 0; start < texts.size(); start += config_.batch_size) {
    size_t end = std::min(texts.size(), start + config_.batch_size);
    json request;
    request["texts"] = json::array();
    for (size_t i = start; i < end; ++i) request["texts"].push_back(texts[i]);
    std::string body = request.dump();

    httplib::Result res;
    for (int attempt = 0; attempt < std::max(1, config_.max_attempts); ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(config_.backoff_ms << (attempt - 1)));
      }
      res = client.Post(config_.path, body, "application/json");
      if (res && res->status < 500) break;  // 5xx and transport failures retry
    }
    if (!res) {
      throw EmbedError(EmbedError::Kind::Transport,
                       "no response from " + config_.base_url + " after " +
                           std::to_string(config_.max_attempts) + " attempts");
    }
    if (res->status != 200) {
      throw EmbedError((res->status >= 500) ? EmbedError::Kind::Transport
                                            : EmbedError::Kind::Protocol,
                       "embedding endpoint returned status " + std::to_string(res->status));
    }
    json reply = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
    if (reply.is_discarded() || !reply.contains("vectors") || !reply["vectors"].is_array() ||
        reply["vectors"].size() != end - start) {
      throw EmbedError(EmbedError::Kind::Protocol,
                       "malformed embedding response (want 'vectors' with " +
                           std::to_string(end - start) + " rows)");
    }
    for (const auto& row : reply["vectors"]) {
      if (!row.is_array() || row.empty()) {
        throw EmbedError(EmbedError::Kind::Protocol, "malformed vector row in response");
      }
      std::vector<double> vec;
      vec.reserve(row.size());
      for (const auto& v : row) {
        if (!v.is_number()) {
          throw EmbedError(EmbedError::Kind::Protocol, "non-numeric value in vector row");
        }
        vec.push_back(v.get<double>());
      }
      if (!out.empty() && vec.size() != out.front().size()) {
        throw EmbedError(EmbedError::Kind::DimensionMismatch,
                         "inconsistent vector dimensions in response");
      }
      out.push_back(std::move(vec));
    }
  }
  return out;
}

std::string SkillVocab::normalize(const std::string& skill) { return lower_ascii(trim(skill)); }

SkillVocab SkillVocab::build(const std::vector<std::vector<std::string>>& skill_lists) {
  std::vector<std::string> entries;
  for (const auto& list : skill_lists) {
    for (const auto& skill : list) {
      std::string norm = normalize(skill);
      if (!norm.empty()) entries.push_back(std::move(norm));
    }
  }
  std::sort(entries.begin(), entries.end());
  entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
  return from_entries(std::move(entries));
}

SkillVocab SkillVocab::from_entries(std::vector<std::string> sorted_entries) {
  SkillVocab v;
  v.entries_ = std::move(sorted_entries);
  for (size_t i = 0; i < v.entries_.size(); ++i) {
    v.index_[v.entries_[i]] = static_cast<int>(i);
  }
  if (v.index_.size() != v.entries_.size()) {
    throw std::invalid_argument("skill vocabulary entries must be unique");
  }
  return v;
}

int SkillVocab::index(const std::string& skill) const {
  auto it = index_.find(normalize(skill));
  return it == index_.end() ? -1 : it->second;
}

std::vector<double> vectorize_skills(const std::vector<std::string>& skills,
                                     const SkillVocab& vocab,
                                     std::atomic<uint64_t>* oov_tally) {
  std::vector<double> vec(vocab.size(), 0.0);
  for (const auto& skill : skills) {
    int idx = vocab.index(skill);
    if (idx >= 0) {
      vec[static_cast<size_t>(idx)] = 1.0;
    } else if (oov_tally) {
      oov_tally->fetch_add(1, std::memory_order_relaxed);
    }
  }
  return vec;
}

}  // namespace occlass
