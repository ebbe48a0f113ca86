// Command-line front end: ingest, stats, train, tune, predict, evaluate,
// ensemble. Every command resolves its flags into a RunManifest before any
// work; deterministic artifacts embed the manifest digest and wall-clock
// timestamps live only in the .run.json sidecars so identical manifests
// yield byte-identical outputs.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "occlass/pipeline.hpp"
#include "occlass/textprep.hpp"
#include "occlass/util.hpp"

namespace {

using json = nlohmann::json;
using namespace occlass;

constexpr const char* kErrUsage = "usage";

// Command failure with a category keyword for machine parsing.
struct CliError {
  int code;
  std::string category;
  std::string message;
};

[[noreturn]] void fail(int code, const std::string& category, const std::string& message) {
  throw CliError{code, category, message};
}

[[noreturn]] void fail_usage(const std::string& message) { fail(1, kErrUsage, message); }

std::string iso_utc_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// shared flags and the --config fallback

struct CommonFlags {
  uint64_t seed = 1;
  int threads = 1;
  std::string scheme = "ons2020";
  std::string config_path;
};

void add_common_flags(CLI::App* cmd, CommonFlags& c) {
  cmd->add_option("--seed", c.seed, "seed for every stochastic step")->capture_default_str();
  cmd->add_option("--threads", c.threads, "worker threads; 1 is the deterministic path")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--scheme", c.scheme, "taxonomy scheme")
      ->check(CLI::IsMember({"ons2010", "ons2020", "onet2019"}))
      ->capture_default_str();
  cmd->add_option("--config", c.config_path,
                  "JSON object of flag defaults; explicit flags win on conflict");
}

// Applies a JSON config file to the flags the user did not pass. Keys name
// flags without the leading dashes; unknown keys and type mismatches are
// usage errors so typos fail loudly.
class ConfigFile {
 public:
  ConfigFile(CLI::App* cmd, const std::string& path) : cmd_(cmd) {
    if (path.empty()) return;
    std::string text;
    if (!read_file(path, text)) fail_usage("--config: cannot read " + path);
    try {
      values_ = json::parse(text);
    } catch (const json::exception& e) {
      fail_usage("--config: " + path + " is not valid JSON: " + e.what());
    }
    if (!values_.is_object()) fail_usage("--config: " + path + " must hold a JSON object");
    for (const auto& [key, value] : values_.items()) {
      (void)value;
      if (cmd_->get_option_no_throw("--" + key) == nullptr)
        fail_usage("--config: unknown key \"" + key + "\" for command " + cmd_->get_name());
    }
  }

  template <typename T>
  void fall_back(const std::string& flag, T& var) const {
    const std::string key = flag.substr(2);
    if (!values_.contains(key)) return;
    if (cmd_->get_option(flag)->count() > 0) return;  // explicit flag wins
    try {
      var = values_.at(key).get<T>();
    } catch (const json::exception&) {
      fail_usage("--config: key \"" + key + "\" has the wrong type for " + flag);
    }
  }

  void fall_back_optional(const std::string& flag, std::optional<double>& var) const {
    double v = 0.0;
    const std::string key = flag.substr(2);
    if (!values_.contains(key) || cmd_->get_option(flag)->count() > 0) return;
    try {
      v = values_.at(key).get<double>();
    } catch (const json::exception&) {
      fail_usage("--config: key \"" + key + "\" has the wrong type for " + flag);
    }
    var = v;
  }

 private:
  CLI::App* cmd_;
  json values_ = json::object();
};

Scheme parse_scheme(const std::string& name) {
  auto s = scheme_from_name(name);
  if (!s) fail_usage("--scheme: unknown scheme \"" + name + "\"");
  return *s;
}

// ---------------------------------------------------------------------------
// file helpers

Taxonomy load_taxonomy_file(const std::string& path, Scheme scheme) {
  try {
    return Taxonomy::load(path, scheme);
  } catch (const TaxonomyError& e) {
    fail(2, "taxonomy", path + ": " + e.what());
  }
}

Corpus load_corpus_file(const std::string& path, std::ostream& warn) {
  Corpus corpus;
  try {
    corpus = load_corpus(path);
  } catch (const CorpusError& e) {
    fail(2, "corpus", path + ": " + e.what());
  }
  if (!corpus.rejects.empty()) {
    warn << "warning: " << path << ": " << corpus.rejects.size()
         << " malformed records skipped (first at line " << corpus.rejects.front().line << ": "
         << corpus.rejects.front().reason << ")\n";
  }
  return corpus;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(2, "io", "cannot create directory " + dir + ": " + ec.message());
}

// Wall-clock and output-location record of one run, kept beside the
// artifacts rather than inside them so artifact bytes depend only on the
// manifest.
void write_sidecar(const std::string& path, const RunManifest& manifest,
                   const std::string& started, const std::vector<std::string>& outputs = {}) {
  json j;
  j["format"] = "occlass.run v1";
  j["digest"] = manifest.digest();
  j["manifest"] = json::parse(manifest.to_json());
  j["started"] = started;
  j["finished"] = iso_utc_now();
  j["outputs"] = outputs;
  write_file(path, j.dump(2) + "\n");
}

RunManifest base_manifest(const std::string& command, const CommonFlags& common) {
  RunManifest m;
  m.command = command;
  m.seed = common.seed;
  m.threads = common.threads;
  m.scheme = common.scheme;
  return m;
}

std::string size_str(size_t v) { return std::to_string(v); }

// ---------------------------------------------------------------------------
// encoder flags shared by train and tune

struct EncoderFlags {
  std::string feature = "title";
  std::string vector_kind = "hashed_ngram";
  size_t dim = 512;
  int max_ngram = 2;
  std::string tokenizer = "hashed_words";
  std::string vocab_path;
  uint32_t buckets = 32768;
  std::string truncation = "head";
  size_t max_len = 512;
  size_t mixed_head = 384;
  std::string clean = "all";
  std::string embeddings_path;
};

void add_encoder_flags(CLI::App* cmd, EncoderFlags& e) {
  cmd->add_option("--feature", e.feature, "document feature the model consumes")
      ->check(CLI::IsMember({"title", "description", "skills"}))
      ->capture_default_str();
  cmd->add_option("--vector", e.vector_kind, "input vector source for text features")
      ->check(CLI::IsMember({"hashed_ngram", "store"}))
      ->capture_default_str();
  cmd->add_option("--dim", e.dim, "input vector width (hashed_ngram)")->capture_default_str();
  cmd->add_option("--max-ngram", e.max_ngram, "token n-gram order folded into the hash")
      ->capture_default_str();
  cmd->add_option("--tokenizer", e.tokenizer, "tokenizer for hashed_ngram vectors")
      ->check(CLI::IsMember({"hashed_words", "wordpiece"}))
      ->capture_default_str();
  cmd->add_option("--vocab", e.vocab_path, "subword vocabulary file (wordpiece)");
  cmd->add_option("--buckets", e.buckets, "hash bucket count (hashed_words)")
      ->capture_default_str();
  cmd->add_option("--truncation", e.truncation, "token truncation strategy")
      ->check(CLI::IsMember({"head", "tail", "mixed"}))
      ->capture_default_str();
  cmd->add_option("--max-len", e.max_len, "token budget before truncation")
      ->capture_default_str();
  cmd->add_option("--mixed-head", e.mixed_head, "leading tokens kept by mixed truncation")
      ->capture_default_str();
  cmd->add_option("--clean", e.clean, "text cleaning rule set")
      ->check(CLI::IsMember({"all", "none"}))
      ->capture_default_str();
  cmd->add_option("--embeddings", e.embeddings_path, "embedding store file (store vectors)");
}

void encoder_fall_backs(const ConfigFile& cfg, EncoderFlags& e) {
  cfg.fall_back("--feature", e.feature);
  cfg.fall_back("--vector", e.vector_kind);
  cfg.fall_back("--dim", e.dim);
  cfg.fall_back("--max-ngram", e.max_ngram);
  cfg.fall_back("--tokenizer", e.tokenizer);
  cfg.fall_back("--vocab", e.vocab_path);
  cfg.fall_back("--buckets", e.buckets);
  cfg.fall_back("--truncation", e.truncation);
  cfg.fall_back("--max-len", e.max_len);
  cfg.fall_back("--mixed-head", e.mixed_head);
  cfg.fall_back("--clean", e.clean);
  cfg.fall_back("--embeddings", e.embeddings_path);
}

std::vector<std::string> read_vocab_lines(const std::string& path) {
  std::string text;
  if (!read_file(path, text)) fail(2, "io", "cannot read vocabulary file " + path);
  std::vector<std::string> pieces;
  for (const auto& line : split_on(text, '\n')) {
    std::string piece = trim(line);
    if (!piece.empty()) pieces.push_back(piece);
  }
  if (pieces.empty()) fail(2, "data", "vocabulary file " + path + " holds no tokens");
  return pieces;
}

// Holds the embedding store alive for the duration of a command.
struct EncoderResources {
  std::optional<EmbeddingStore> store;
  EncodeContext ctx;
};

// Resolves encoder flags into a runnable spec. Skills features derive their
// multi-hot vocabulary from the labelled ads; store-backed vectors take
// width and provider from the store file.
EncoderSpec build_encoder_spec(const EncoderFlags& flags, std::span<const JobAd> ads,
                               Scheme scheme, EncoderResources& res) {
  EncoderSpec spec;
  auto field = field_from_name(flags.feature);
  if (!field) fail_usage("--feature: unknown feature \"" + flags.feature + "\"");
  spec.field = *field;
  spec.clean = flags.clean == "all" ? CleanRuleSet::all() : CleanRuleSet::none();
  spec.truncation.strategy = truncation_from_name(flags.truncation);
  spec.truncation.max_len = flags.max_len;
  spec.truncation.mixed_head_len = flags.mixed_head;

  if (spec.field == Field::Skills) {
    std::vector<std::vector<std::string>> lists;
    for (const auto& ad : ads)
      if (ad.known_label(scheme)) lists.push_back(ad.skills);
    SkillVocab vocab = SkillVocab::build(lists);
    if (vocab.size() == 0)
      fail(2, "data", "no skills found on labelled documents; cannot build a skills vocabulary");
    spec.vector_kind = "skills";
    spec.skill_vocab = vocab.entries();
    spec.dim = vocab.size();
    spec.tokenizer = "none";
    spec.provider_id = "skills";
    return spec;
  }

  spec.vector_kind = flags.vector_kind;
  if (flags.vector_kind == "hashed_ngram") {
    spec.dim = flags.dim;
    spec.max_ngram = flags.max_ngram;
    spec.tokenizer = flags.tokenizer;
    spec.hash_buckets = flags.buckets;
    spec.provider_id = "hashed";
    if (flags.tokenizer == "wordpiece") {
      if (flags.vocab_path.empty()) fail_usage("--vocab: required when --tokenizer=wordpiece");
      spec.vocab = read_vocab_lines(flags.vocab_path);
    }
  } else {  // store
    if (flags.embeddings_path.empty()) fail_usage("--embeddings: required when --vector=store");
    try {
      res.store = EmbeddingStore::load(flags.embeddings_path);
    } catch (const EmbedError& e) {
      fail(2, "embedding", flags.embeddings_path + ": " + e.what());
    }
    res.ctx.store = &*res.store;
    spec.dim = res.store->dim();
    spec.provider_id = res.store->provider();
    spec.tokenizer = "none";
  }
  return spec;
}

void record_encoder_config(RunManifest& m, const EncoderFlags& e) {
  m.config["feature"] = e.feature;
  m.config["vector"] = e.vector_kind;
  m.config["dim"] = size_str(e.dim);
  m.config["max_ngram"] = std::to_string(e.max_ngram);
  m.config["tokenizer"] = e.tokenizer;
  m.config["buckets"] = std::to_string(e.buckets);
  m.config["truncation"] = e.truncation;
  m.config["max_len"] = size_str(e.max_len);
  m.config["mixed_head"] = size_str(e.mixed_head);
  m.config["clean"] = e.clean;
}

// ---------------------------------------------------------------------------
// training flags shared by train and tune

struct TrainFlags {
  std::string arch = "simple";
  size_t hidden = 512;
  std::optional<double> dropout;
  int level = 0;  // 0 means leaf level
  bool flat = false;
  double lr = 1.26e-4;
  double weight_decay = 1.52e-6;
  size_t epochs = 75;
  size_t batch_size = 16;
  size_t accum_steps = 20;
  double clip = 1.0;
  size_t patience = 5;
  double eta_min = 0.0;
  double val_fraction = 0.15;
};

void add_train_flags(CLI::App* cmd, TrainFlags& t) {
  cmd->add_option("--arch", t.arch, "head architecture")
      ->check(CLI::IsMember({"baseline", "simple", "skillnet", "ovr"}))
      ->capture_default_str();
  cmd->add_option("--hidden", t.hidden, "hidden width (simple architecture)")
      ->capture_default_str();
  cmd->add_option("--dropout", t.dropout, "hidden dropout rate; architecture default when unset");
  cmd->add_option("--level", t.level, "taxonomy level to train; 0 means the leaf level")
      ->capture_default_str();
  cmd->add_flag("--flat", t.flat, "train the leaf level (same as --level 0)");
  cmd->add_option("--lr", t.lr, "peak learning rate")->capture_default_str();
  cmd->add_option("--weight-decay", t.weight_decay, "decoupled weight decay")
      ->capture_default_str();
  cmd->add_option("--epochs", t.epochs, "epoch cap")->capture_default_str();
  cmd->add_option("--batch-size", t.batch_size, "mini-batch size")->capture_default_str();
  cmd->add_option("--accum-steps", t.accum_steps, "gradient accumulation steps")
      ->capture_default_str();
  cmd->add_option("--clip", t.clip, "gradient clipping norm")->capture_default_str();
  cmd->add_option("--patience", t.patience, "early-stopping patience in epochs")
      ->capture_default_str();
  cmd->add_option("--eta-min", t.eta_min, "cosine annealing floor")->capture_default_str();
  cmd->add_option("--val-fraction", t.val_fraction, "fraction of rows held out for validation")
      ->capture_default_str();
}

void train_fall_backs(const ConfigFile& cfg, TrainFlags& t) {
  cfg.fall_back("--arch", t.arch);
  cfg.fall_back("--hidden", t.hidden);
  cfg.fall_back_optional("--dropout", t.dropout);
  cfg.fall_back("--level", t.level);
  cfg.fall_back("--lr", t.lr);
  cfg.fall_back("--weight-decay", t.weight_decay);
  cfg.fall_back("--epochs", t.epochs);
  cfg.fall_back("--batch-size", t.batch_size);
  cfg.fall_back("--accum-steps", t.accum_steps);
  cfg.fall_back("--clip", t.clip);
  cfg.fall_back("--patience", t.patience);
  cfg.fall_back("--eta-min", t.eta_min);
  cfg.fall_back("--val-fraction", t.val_fraction);
}

int resolve_level(const TrainFlags& t, const Taxonomy& taxonomy) {
  if (t.flat && t.level != 0 && t.level != taxonomy.depth())
    fail_usage("--flat: conflicts with --level " + std::to_string(t.level));
  if (t.level == 0) return taxonomy.depth();
  if (t.level < 0 || t.level > taxonomy.depth())
    fail_usage("--level: " + std::to_string(t.level) + " is outside this taxonomy's levels 1.." +
               std::to_string(taxonomy.depth()));
  return t.level;
}

TrainConfig resolve_train_config(const TrainFlags& t, uint64_t seed) {
  TrainConfig cfg;
  cfg.learning_rate = t.lr;
  cfg.weight_decay = t.weight_decay;
  cfg.epochs = t.epochs;
  cfg.batch_size = t.batch_size;
  cfg.accumulation_steps = t.accum_steps;
  cfg.clip_norm = t.clip;
  cfg.patience = t.patience;
  cfg.eta_min = t.eta_min;
  cfg.seed = seed;
  return cfg;
}

void record_train_config(RunManifest& m, const TrainFlags& t, int level) {
  m.config["arch"] = t.arch;
  m.config["hidden"] = size_str(t.hidden);
  m.config["dropout"] = t.dropout ? format_double(*t.dropout) : "default";
  m.config["level"] = std::to_string(level);
  m.config["learning_rate"] = format_double(t.lr);
  m.config["weight_decay"] = format_double(t.weight_decay);
  m.config["epochs"] = size_str(t.epochs);
  m.config["batch_size"] = size_str(t.batch_size);
  m.config["accumulation_steps"] = size_str(t.accum_steps);
  m.config["clip_norm"] = format_double(t.clip);
  m.config["patience"] = size_str(t.patience);
  m.config["eta_min"] = format_double(t.eta_min);
  m.config["val_fraction"] = format_double(t.val_fraction);
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  CommonFlags common;
  std::string corpus_path, taxonomy_path, out_dir;
};

int cmd_ingest(const IngestArgs& a) {
  const std::string started = iso_utc_now();
  Scheme scheme = parse_scheme(a.common.scheme);
  Taxonomy taxonomy = load_taxonomy_file(a.taxonomy_path, scheme);

  RunManifest manifest = base_manifest("ingest", a.common);
  manifest.config["corpus"] = a.corpus_path;
  manifest.config["taxonomy"] = a.taxonomy_path;
  manifest.add_input(a.corpus_path);
  manifest.add_input(a.taxonomy_path);

  IngestResult result = ingest_corpus(a.corpus_path, taxonomy);
  ensure_dir(a.out_dir);
  const std::string dataset_path = a.out_dir + "/dataset.jsonl";
  save_corpus(result.ads, dataset_path);

  std::string rejects_text;
  for (const auto& r : result.rejects) {
    json line;
    line["line"] = r.line;
    line["reason"] = r.reason;
    line["snippet"] = r.snippet;
    rejects_text += line.dump() + "\n";
  }
  write_file(a.out_dir + "/rejects.jsonl", rejects_text);

  size_t unlabeled = result.ads.size() - result.labeled;
  json meta;
  meta["format"] = "occlass.ingest v1";
  meta["manifest"] = manifest.digest();
  meta["scheme"] = a.common.scheme;
  meta["documents"] = result.ads.size();
  meta["labeled"] = result.labeled;
  meta["unlabeled"] = unlabeled;
  meta["rejects"] = result.rejects.size();
  meta["parse_rejects"] = result.parse_rejects;
  meta["label_rejects"] = result.rejects.size() - result.parse_rejects;
  write_file(a.out_dir + "/ingest.json", meta.dump(2) + "\n");
  write_sidecar(a.out_dir + "/run.json", manifest, started,
                {dataset_path, a.out_dir + "/rejects.jsonl", a.out_dir + "/ingest.json"});

  for (size_t i = 0; i < result.rejects.size() && i < 5; ++i) {
    const auto& r = result.rejects[i];
    std::cerr << "warning: " << a.corpus_path << ":" << r.line << ": " << r.reason << "\n";
  }
  if (result.rejects.size() > 5)
    std::cerr << "warning: " << (result.rejects.size() - 5) << " further rejects in "
              << a.out_dir + "/rejects.jsonl" << "\n";
  std::cout << "ingested " << result.ads.size() << " documents (" << result.labeled
            << " labelled, " << unlabeled << " unlabelled) into " << dataset_path << "; "
            << result.rejects.size() << " rejected\n";
  return 0;
}

// ---------------------------------------------------------------------------
// stats

struct StatsArgs {
  CommonFlags common;
  std::string dataset_path;
  std::string field = "description";
  std::string tokenizer = "hashed_words";
  std::string vocab_path;
  uint32_t buckets = 32768;
  size_t bucket_width = 64;
  size_t over = 512;
  std::string out_path;
};

int cmd_stats(const StatsArgs& a) {
  const std::string started = iso_utc_now();
  Corpus corpus = load_corpus_file(a.dataset_path, std::cerr);
  auto field = field_from_name(a.field);
  if (!field) fail_usage("--field: unknown field \"" + a.field + "\"");

  std::unique_ptr<Tokenizer> tokenizer;
  if (a.tokenizer == "wordpiece") {
    if (a.vocab_path.empty()) fail_usage("--vocab: required when --tokenizer=wordpiece");
    tokenizer = std::make_unique<WordPieceTokenizer>(
        SubwordVocab::from_tokens(read_vocab_lines(a.vocab_path)));
  } else {
    tokenizer = std::make_unique<HashBucketTokenizer>(a.buckets);
  }

  RunManifest manifest = base_manifest("stats", a.common);
  manifest.config["dataset"] = a.dataset_path;
  manifest.config["field"] = a.field;
  manifest.config["tokenizer"] = a.tokenizer;
  manifest.config["buckets"] = std::to_string(a.buckets);
  manifest.config["bucket_width"] = size_str(a.bucket_width);
  manifest.config["over"] = size_str(a.over);
  manifest.add_input(a.dataset_path);
  if (!a.vocab_path.empty()) manifest.add_input(a.vocab_path);

  TokenLengthStats stats = token_length_stats(corpus.ads, *tokenizer, *field);
  if (stats.total == 0) fail(2, "data", a.dataset_path + ": no documents to measure");

  auto buckets = stats.histogram(a.bucket_width);
  size_t peak = 1;
  for (const auto& b : buckets) peak = std::max(peak, b.count);

  std::ostringstream table;
  table << "token length distribution: field=" << a.field << " tokenizer=" << a.tokenizer
        << " documents=" << stats.total << "\n";
  char line[160];
  std::snprintf(line, sizeof line,
                "  mean=%.1f p50=%zu p90=%zu p99=%zu max=%zu over%zu=%.2f%%\n", stats.mean(),
                stats.percentile(50), stats.percentile(90), stats.percentile(99), stats.max(),
                a.over, 100.0 * stats.fraction_over(a.over));
  table << line;
  for (const auto& b : buckets) {
    size_t bar = (b.count * 40 + peak - 1) / peak;
    std::snprintf(line, sizeof line, "  [%5zu,%5zu] %7zu ", b.lo, b.hi, b.count);
    table << line << std::string(bar, '#') << "\n";
  }
  std::cout << table.str();

  if (!a.out_path.empty()) {
    json out;
    out["format"] = "occlass.stats v1";
    out["manifest"] = manifest.digest();
    out["field"] = a.field;
    out["tokenizer"] = a.tokenizer;
    out["documents"] = stats.total;
    out["mean"] = stats.mean();
    out["p50"] = stats.percentile(50);
    out["p90"] = stats.percentile(90);
    out["p99"] = stats.percentile(99);
    out["max"] = stats.max();
    out["over"] = a.over;
    out["over_fraction"] = stats.fraction_over(a.over);
    out["histogram"] = json::array();
    for (const auto& b : buckets)
      out["histogram"].push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}});
    write_file(a.out_path, out.dump(2) + "\n");
    write_sidecar(a.out_path + ".run.json", manifest, started, {a.out_path});
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  CommonFlags common;
  std::string dataset_path, taxonomy_path, out_path;
  EncoderFlags encoder;
  TrainFlags train;
};

json report_to_json(const TrainReport& report) {
  json j;
  j["best_epoch"] = report.best_epoch;
  j["stopped_epoch"] = report.stopped_epoch;
  j["best_val_accuracy"] = report.best_val_accuracy;
  j["early_stopped"] = report.early_stopped;
  j["warnings"] = report.warnings;
  j["epochs"] = json::array();
  for (const auto& e : report.epochs)
    j["epochs"].push_back({{"epoch", e.epoch},
                           {"train_loss", e.train_loss},
                           {"val_accuracy", e.val_accuracy},
                           {"lr", e.lr}});
  return j;
}

int cmd_train(const TrainArgs& a) {
  const std::string started = iso_utc_now();
  Scheme scheme = parse_scheme(a.common.scheme);
  Taxonomy taxonomy = load_taxonomy_file(a.taxonomy_path, scheme);
  Corpus corpus = load_corpus_file(a.dataset_path, std::cerr);
  int level = resolve_level(a.train, taxonomy);

  EncoderResources res;
  EncoderSpec spec = build_encoder_spec(a.encoder, corpus.ads, scheme, res);

  RunManifest manifest = base_manifest("train", a.common);
  manifest.config["dataset"] = a.dataset_path;
  manifest.config["taxonomy"] = a.taxonomy_path;
  record_encoder_config(manifest, a.encoder);
  record_train_config(manifest, a.train, level);
  manifest.add_input(a.dataset_path);
  manifest.add_input(a.taxonomy_path);
  if (!a.encoder.vocab_path.empty()) manifest.add_input(a.encoder.vocab_path);
  if (!a.encoder.embeddings_path.empty()) manifest.add_input(a.encoder.embeddings_path);

  TrainBundleOptions options;
  options.arch = a.train.arch;
  options.hidden = a.train.hidden;
  options.dropout = a.train.dropout;
  options.train = resolve_train_config(a.train, a.common.seed);
  options.val_fraction = a.train.val_fraction;
  options.split_seed = a.common.seed;

  TrainedBundle trained = train_bundle(corpus.ads, taxonomy, level, spec, options, res.ctx,
                                       &std::cout);
  trained.bundle.manifest_digest = manifest.digest();
  save_model(trained.bundle, a.out_path);

  json report;
  report["format"] = "occlass.train-report v1";
  report["manifest"] = manifest.digest();
  report["scheme"] = a.common.scheme;
  report["level"] = level;
  report["classes"] = trained.bundle.class_codes.size();
  report["train_count"] = trained.train_count;
  report["val_count"] = trained.val_count;
  report["report"] = report_to_json(trained.report);
  write_file(a.out_path + ".report.json", report.dump(2) + "\n");
  write_sidecar(a.out_path + ".run.json", manifest, started,
                {a.out_path, a.out_path + ".report.json"});

  std::cout << "trained " << a.train.arch << " head for level " << level << " ("
            << trained.bundle.class_codes.size() << " classes) on " << trained.train_count
            << " rows; best val accuracy " << format_double(trained.report.best_val_accuracy)
            << " at epoch " << trained.report.best_epoch << "; model written to " << a.out_path
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// tune

struct TuneArgs {
  CommonFlags common;
  std::string dataset_path, taxonomy_path, out_path, log_path, space_path;
  size_t budget = 50;
  size_t folds = 3;
  EncoderFlags encoder;
  TrainFlags train;
};

Dimension::Kind dimension_kind_from_name(const std::string& name) {
  if (name == "uniform") return Dimension::Kind::Uniform;
  if (name == "log_uniform") return Dimension::Kind::LogUniform;
  if (name == "quantized") return Dimension::Kind::Quantized;
  fail(2, "data", "unknown search dimension kind \"" + name + "\"");
}

SearchSpace load_search_space(const std::string& path) {
  std::string text;
  if (!read_file(path, text)) fail(2, "io", "cannot read search space file " + path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(2, "data", path + ": invalid JSON: " + e.what());
  }
  if (!j.is_object() || !j.contains("dims") || !j.at("dims").is_array())
    fail(2, "data", path + ": expected an object with a \"dims\" array");
  SearchSpace space;
  try {
    for (const auto& d : j.at("dims")) {
      Dimension dim;
      dim.name = d.at("name").get<std::string>();
      dim.kind = dimension_kind_from_name(d.value("kind", "uniform"));
      dim.lo = d.at("lo").get<double>();
      dim.hi = d.at("hi").get<double>();
      dim.step = d.value("step", 0.0);
      space.dims.push_back(std::move(dim));
    }
  } catch (const json::exception& e) {
    fail(2, "data", path + ": malformed dimension: " + e.what());
  }
  return space;
}

int cmd_tune(const TuneArgs& a) {
  const std::string started = iso_utc_now();
  Scheme scheme = parse_scheme(a.common.scheme);
  Taxonomy taxonomy = load_taxonomy_file(a.taxonomy_path, scheme);
  Corpus corpus = load_corpus_file(a.dataset_path, std::cerr);
  int level = resolve_level(a.train, taxonomy);

  EncoderResources res;
  EncoderSpec spec = build_encoder_spec(a.encoder, corpus.ads, scheme, res);
  DocumentEncoder encoder(spec, res.ctx);
  EncodedDataset dataset = build_dataset(corpus.ads, taxonomy, level, encoder);

  SearchSpace space = a.space_path.empty() ? default_search_space()
                                           : load_search_space(a.space_path);
  space.validate();

  const std::string log_path = a.log_path.empty() ? a.out_path + ".study.jsonl" : a.log_path;

  RunManifest manifest = base_manifest("tune", a.common);
  manifest.config["dataset"] = a.dataset_path;
  manifest.config["taxonomy"] = a.taxonomy_path;
  manifest.config["budget"] = size_str(a.budget);
  manifest.config["folds"] = size_str(a.folds);
  manifest.config["space"] = a.space_path.empty() ? "default" : a.space_path;
  record_encoder_config(manifest, a.encoder);
  record_train_config(manifest, a.train, level);
  manifest.add_input(a.dataset_path);
  manifest.add_input(a.taxonomy_path);
  if (!a.space_path.empty()) manifest.add_input(a.space_path);
  if (!a.encoder.vocab_path.empty()) manifest.add_input(a.encoder.vocab_path);
  if (!a.encoder.embeddings_path.empty()) manifest.add_input(a.encoder.embeddings_path);

  TrainConfig base = resolve_train_config(a.train, a.common.seed);
  FoldTrainer trainer = make_fold_trainer(a.train.arch, dataset.class_codes.size(), base,
                                          a.train.hidden);
  StudyResult study = run_study(space, a.budget, dataset.xs, dataset.ys, trainer, a.folds,
                                a.common.seed, log_path, &std::cout);

  json best;
  best["format"] = "occlass.tune v1";
  best["manifest"] = manifest.digest();
  best["budget"] = a.budget;
  best["folds"] = a.folds;
  best["trials"] = study.history.size();
  best["best"]["number"] = study.best.number;
  best["best"]["objective"] = study.best.objective;
  best["best"]["config"] = study.best.config;
  best["best"]["fold_scores"] = study.best.fold_scores;
  write_file(a.out_path, best.dump(2) + "\n");
  write_sidecar(a.out_path + ".run.json", manifest, started, {a.out_path, log_path});

  std::cout << "best objective " << format_double(study.best.objective) << " at trial "
            << study.best.number << " of " << study.history.size() << "; study log at "
            << log_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  CommonFlags common;
  std::string input_path, taxonomy_path, out_path;
  std::vector<std::string> model_paths;
  std::string ensemble_path;
  std::string postprocess = "none";
  std::vector<int> prune_levels;
  size_t top_k = 10;
  std::string embeddings_path;
};

std::optional<CombineMode> parse_postprocess(const std::string& name) {
  if (name == "none") return std::nullopt;
  try {
    return combine_mode_from_name(name);
  } catch (const HierarchyError& e) {
    fail_usage(std::string("--postprocess: ") + e.what());
  }
}

int cmd_predict(const PredictArgs& a) {
  const std::string started = iso_utc_now();
  if (a.model_paths.empty() == a.ensemble_path.empty())
    fail_usage("--model/--ensemble: exactly one model source must be given");

  Scheme scheme = parse_scheme(a.common.scheme);
  Taxonomy taxonomy = load_taxonomy_file(a.taxonomy_path, scheme);
  Corpus corpus = load_corpus_file(a.input_path, std::cerr);
  if (corpus.ads.empty()) fail(2, "data", a.input_path + ": no documents to classify");

  EncoderResources res;
  if (!a.embeddings_path.empty()) {
    try {
      res.store = EmbeddingStore::load(a.embeddings_path);
    } catch (const EmbedError& e) {
      fail(2, "embedding", a.embeddings_path + ": " + e.what());
    }
    res.ctx.store = &*res.store;
  }

  PredictOptions options;
  options.postprocess = parse_postprocess(a.postprocess);
  options.prune_levels = a.prune_levels;
  options.top_k = a.top_k;

  RunManifest manifest = base_manifest("predict", a.common);
  manifest.config["input"] = a.input_path;
  manifest.config["taxonomy"] = a.taxonomy_path;
  manifest.config["postprocess"] = a.postprocess;
  {
    std::vector<std::string> levels;
    for (int l : a.prune_levels) levels.push_back(std::to_string(l));
    manifest.config["prune_levels"] = levels.empty() ? "none" : join(levels, ",");
  }
  manifest.config["top_k"] = size_str(a.top_k);
  manifest.add_input(a.input_path);
  manifest.add_input(a.taxonomy_path);
  if (!a.embeddings_path.empty()) manifest.add_input(a.embeddings_path);

  std::string kind;
  std::optional<Classifier> classifier;
  if (!a.ensemble_path.empty()) {
    manifest.config["ensemble"] = a.ensemble_path;
    manifest.add_input(a.ensemble_path);
    EnsembleFileSpec spec = load_ensemble_spec(a.ensemble_path);
    const std::string base_dir = std::filesystem::path(a.ensemble_path).parent_path().string();
    for (const auto& member : spec.members)
      for (const auto& rel : member.model_paths) {
        std::filesystem::path p(rel);
        manifest.add_input(p.is_absolute() || base_dir.empty() ? p.string()
                                                               : base_dir + "/" + rel);
      }
    classifier = Classifier::from_spec(&taxonomy, spec, base_dir, res.ctx);
    kind = "ensemble";
  } else {
    manifest.config["model"] = join(a.model_paths, ",");
    std::vector<ModelBundle> bundles;
    for (const auto& path : a.model_paths) {
      manifest.add_input(path);
      bundles.push_back(load_model(path));
    }
    if (bundles.size() == 1) {
      classifier = Classifier::flat(&taxonomy, std::move(bundles.front()), res.ctx);
      kind = "flat";
    } else {
      classifier = Classifier::level_bank(&taxonomy, std::move(bundles), std::nullopt, res.ctx);
      kind = "bank";
    }
  }

  std::vector<std::string> lines(corpus.ads.size());
  std::vector<uint8_t> fell_back(corpus.ads.size(), 0);
  parallel_for(corpus.ads.size(), a.common.threads, [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      DocumentPrediction pred = classifier->predict(corpus.ads[i], options);
      fell_back[i] = pred.prune_fell_back ? 1 : 0;
      lines[i] = prediction_to_json(pred, taxonomy, a.top_k);
    }
  });

  json header;
  header["format"] = "occlass.predictions v1";
  header["manifest"] = manifest.digest();
  header["scheme"] = a.common.scheme;
  header["documents"] = corpus.ads.size();
  header["postprocess"] = a.postprocess;
  header["prune_levels"] = a.prune_levels;
  header["top_k"] = a.top_k;
  header["model"] = {{"kind", kind}, {"members", classifier->member_count()}};
  std::string out_text = header.dump() + "\n";
  for (const auto& line : lines) out_text += line + "\n";
  write_file(a.out_path, out_text);
  write_sidecar(a.out_path + ".run.json", manifest, started, {a.out_path});

  size_t fallbacks = 0;
  for (uint8_t f : fell_back) fallbacks += f;
  std::cout << "classified " << corpus.ads.size() << " documents with the " << kind
            << " model -> " << a.out_path << "\n";
  if (!a.prune_levels.empty()) {
    std::vector<std::string> levels;
    for (int l : a.prune_levels) levels.push_back(std::to_string(l));
    std::cout << "pruning applied at level " << join(levels, ", ") << " on every document; "
              << fallbacks << " fell back to unpruned scores\n";
  }
  if (options.postprocess)
    std::cout << "level scores combined with " << combine_mode_name(*options.postprocess)
              << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  CommonFlags common;
  std::string predictions_path, gold_path, taxonomy_path, out_dir;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const std::string started = iso_utc_now();
  Scheme scheme = parse_scheme(a.common.scheme);
  Taxonomy taxonomy = load_taxonomy_file(a.taxonomy_path, scheme);
  Corpus gold = load_corpus_file(a.gold_path, std::cerr);

  std::string text;
  if (!read_file(a.predictions_path, text))
    fail(2, "io", "cannot read predictions file " + a.predictions_path);
  std::vector<std::string> file_lines = split_on(text, '\n');
  if (file_lines.empty() || trim(file_lines.front()).empty())
    fail(2, "data", a.predictions_path + ": empty predictions file");

  json header;
  try {
    header = json::parse(file_lines.front());
  } catch (const json::exception& e) {
    fail(2, "data", a.predictions_path + ":1: header is not valid JSON: " + e.what());
  }
  if (!header.is_object() || header.value("format", "") != "occlass.predictions v1")
    fail(2, "data",
         a.predictions_path + ":1: not an occlass.predictions v1 file (format tag missing)");
  if (header.value("scheme", a.common.scheme) != a.common.scheme)
    fail(2, "data", a.predictions_path + ": predictions were made under scheme " +
                        header.value("scheme", "?") + ", not " + a.common.scheme);

  std::vector<PredictionRow> rows;
  for (size_t i = 1; i < file_lines.size(); ++i) {
    if (trim(file_lines[i]).empty()) continue;
    try {
      rows.push_back(prediction_row_from_json(file_lines[i]));
    } catch (const PipelineError& e) {
      fail(2, "data", a.predictions_path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }

  RunManifest manifest = base_manifest("evaluate", a.common);
  manifest.config["predictions"] = a.predictions_path;
  manifest.config["gold"] = a.gold_path;
  manifest.config["taxonomy"] = a.taxonomy_path;
  manifest.add_input(a.predictions_path);
  manifest.add_input(a.gold_path);
  manifest.add_input(a.taxonomy_path);

  EvalReport report = evaluate_rows(taxonomy, rows, gold.ads, &std::cerr);
  std::cout << report.render_text();

  if (!a.out_dir.empty()) {
    ensure_dir(a.out_dir);
    json out;
    out["format"] = "occlass.eval v1";
    out["manifest"] = manifest.digest();
    out["predictions_manifest"] = header.value("manifest", "");
    out["scheme"] = a.common.scheme;
    out["summary"] = json::parse(report.summary_json());
    write_file(a.out_dir + "/report.json", out.dump(2) + "\n");
    write_file(a.out_dir + "/report.txt", report.render_text());
    for (const auto& level : report.levels)
      write_file(a.out_dir + "/confusion_level" + std::to_string(level.level) + ".csv",
                 level.matrix.to_csv());
    std::vector<std::string> outputs{a.out_dir + "/report.json", a.out_dir + "/report.txt"};
    for (const auto& level : report.levels)
      outputs.push_back(a.out_dir + "/confusion_level" + std::to_string(level.level) + ".csv");
    write_sidecar(a.out_dir + "/run.json", manifest, started, outputs);
    std::cout << "report written to " << a.out_dir << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// ensemble

struct EnsembleArgs {
  CommonFlags common;
  std::string out_path, taxonomy_path;
  std::vector<std::string> members;  // each a comma-separated model path list
  std::vector<double> weights;
  std::vector<std::string> postprocess;
  std::string embeddings_path;
};

int cmd_ensemble(const EnsembleArgs& a) {
  const std::string started = iso_utc_now();
  if (a.members.empty()) fail_usage("--member: at least one member is required");
  if (!a.weights.empty() && a.weights.size() != a.members.size())
    fail_usage("--weight: got " + size_str(a.weights.size()) + " weights for " +
               size_str(a.members.size()) + " members");
  if (!a.postprocess.empty() && a.postprocess.size() != a.members.size())
    fail_usage("--postprocess: got " + size_str(a.postprocess.size()) + " modes for " +
               size_str(a.members.size()) + " members");

  Scheme scheme = parse_scheme(a.common.scheme);
  Taxonomy taxonomy = load_taxonomy_file(a.taxonomy_path, scheme);

  EncoderResources res;
  if (!a.embeddings_path.empty()) {
    try {
      res.store = EmbeddingStore::load(a.embeddings_path);
    } catch (const EmbedError& e) {
      fail(2, "embedding", a.embeddings_path + ": " + e.what());
    }
    res.ctx.store = &*res.store;
  }

  const std::string base_dir = std::filesystem::path(a.out_path).parent_path().string();
  auto resolve = [&](const std::string& rel) {
    std::filesystem::path p(rel);
    return p.is_absolute() || base_dir.empty() ? p.string() : base_dir + "/" + rel;
  };

  RunManifest manifest = base_manifest("ensemble", a.common);
  manifest.config["taxonomy"] = a.taxonomy_path;
  manifest.add_input(a.taxonomy_path);

  EnsembleFileSpec spec;
  spec.scheme = a.common.scheme;
  for (size_t i = 0; i < a.members.size(); ++i) {
    MemberSpec member;
    member.model_paths = split_on(a.members[i], ',');
    for (auto& path : member.model_paths) {
      path = trim(path);
      if (path.empty()) fail_usage("--member: empty model path in \"" + a.members[i] + "\"");
      manifest.add_input(resolve(path));
    }
    member.weight = a.weights.empty() ? 1.0 : a.weights[i];
    if (!a.postprocess.empty())
      member.postprocess = a.postprocess[i];
    else if (member.model_paths.size() > 1)
      fail_usage("--postprocess: required for multi-level member " + size_str(i + 1));
    // the member's feature comes from its first model's encoder
    ModelBundle first = load_model(resolve(member.model_paths.front()));
    member.feature = DocumentEncoder(first.encoder, res.ctx).feature();
    manifest.config["member" + size_str(i + 1)] = a.members[i];
    manifest.config["weight" + size_str(i + 1)] = format_double(member.weight);
    manifest.config["postprocess" + size_str(i + 1)] = member.postprocess;
    spec.members.push_back(std::move(member));
  }

  // full validation pass: every model must load, agree on the scheme and
  // match its member's declared feature
  Classifier::from_spec(&taxonomy, spec, base_dir, res.ctx);

  save_ensemble_spec(spec, a.out_path);
  write_sidecar(a.out_path + ".run.json", manifest, started, {a.out_path});
  std::cout << "ensemble spec with " << spec.members.size() << " members written to "
            << a.out_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int dispatch(CLI::App& app, int argc, char** argv) {
  IngestArgs ingest;
  StatsArgs stats;
  TrainArgs train;
  TuneArgs tune;
  PredictArgs predict;
  EvaluateArgs evaluate;
  EnsembleArgs ensemble;

  CLI::App* c_ingest = app.add_subcommand("ingest", "validate a corpus against a taxonomy");
  c_ingest->add_option("--corpus", ingest.corpus_path, "raw corpus JSONL")->required();
  c_ingest->add_option("--taxonomy", ingest.taxonomy_path, "taxonomy CSV")->required();
  c_ingest->add_option("--out", ingest.out_dir, "output directory")->required();
  add_common_flags(c_ingest, ingest.common);

  CLI::App* c_stats = app.add_subcommand("stats", "token length distribution of a dataset");
  c_stats->add_option("--dataset", stats.dataset_path, "dataset JSONL")->required();
  c_stats->add_option("--field", stats.field, "document field to measure")
      ->check(CLI::IsMember({"title", "description", "skills"}))
      ->capture_default_str();
  c_stats->add_option("--tokenizer", stats.tokenizer, "tokenizer")
      ->check(CLI::IsMember({"hashed_words", "wordpiece"}))
      ->capture_default_str();
  c_stats->add_option("--vocab", stats.vocab_path, "subword vocabulary file (wordpiece)");
  c_stats->add_option("--buckets", stats.buckets, "hash bucket count")->capture_default_str();
  c_stats->add_option("--bucket-width", stats.bucket_width, "histogram bucket width")
      ->capture_default_str();
  c_stats->add_option("--over", stats.over, "report the fraction of documents over this length")
      ->capture_default_str();
  c_stats->add_option("--out", stats.out_path, "also write the report as JSON here");
  add_common_flags(c_stats, stats.common);

  CLI::App* c_train = app.add_subcommand("train", "train one classification head");
  c_train->add_option("--dataset", train.dataset_path, "dataset JSONL")->required();
  c_train->add_option("--taxonomy", train.taxonomy_path, "taxonomy CSV")->required();
  c_train->add_option("--out", train.out_path, "model file to write")->required();
  add_encoder_flags(c_train, train.encoder);
  add_train_flags(c_train, train.train);
  add_common_flags(c_train, train.common);

  CLI::App* c_tune = app.add_subcommand("tune", "search hyperparameters by cross-validation");
  c_tune->add_option("--dataset", tune.dataset_path, "dataset JSONL")->required();
  c_tune->add_option("--taxonomy", tune.taxonomy_path, "taxonomy CSV")->required();
  c_tune->add_option("--out", tune.out_path, "best-configuration JSON to write")->required();
  c_tune->add_option("--log", tune.log_path,
                     "study log path; an existing log resumes the study "
                     "(default: <out>.study.jsonl)");
  c_tune->add_option("--budget", tune.budget, "total trials including resumed history")
      ->capture_default_str();
  c_tune->add_option("--folds", tune.folds, "cross-validation folds")->capture_default_str();
  c_tune->add_option("--space", tune.space_path,
                     "search space JSON; built-in training ranges when omitted");
  add_encoder_flags(c_tune, tune.encoder);
  add_train_flags(c_tune, tune.train);
  add_common_flags(c_tune, tune.common);

  CLI::App* c_predict = app.add_subcommand("predict", "classify documents");
  c_predict->add_option("--input", predict.input_path, "corpus JSONL to classify")->required();
  c_predict->add_option("--taxonomy", predict.taxonomy_path, "taxonomy CSV")->required();
  c_predict->add_option("--out", predict.out_path, "predictions file to write")->required();
  c_predict->add_option("--model", predict.model_paths,
                        "model file; repeat for one model per level");
  c_predict->add_option("--ensemble", predict.ensemble_path,
                        "ensemble spec JSON (alternative to --model)");
  c_predict->add_option("--postprocess", predict.postprocess,
                        "combine per-level scores into leaf scores")
      ->check(CLI::IsMember({"none", "total_avg", "weighted_avg", "joint_prob"}))
      ->capture_default_str();
  c_predict->add_option("--prune-levels", predict.prune_levels,
                        "restrict leaves to the argmax ancestry at these levels");
  c_predict->add_option("--top-k", predict.top_k, "ranked entries stored per level")
      ->capture_default_str();
  c_predict->add_option("--embeddings", predict.embeddings_path,
                        "embedding store for store-backed encoders");
  add_common_flags(c_predict, predict.common);

  CLI::App* c_evaluate = app.add_subcommand("evaluate", "score predictions against gold labels");
  c_evaluate->add_option("--predictions", evaluate.predictions_path, "predictions file")
      ->required();
  c_evaluate->add_option("--gold", evaluate.gold_path, "gold-labelled dataset JSONL")->required();
  c_evaluate->add_option("--taxonomy", evaluate.taxonomy_path, "taxonomy CSV")->required();
  c_evaluate->add_option("--out", evaluate.out_dir, "report directory (stdout only when unset)");
  add_common_flags(c_evaluate, evaluate.common);

  CLI::App* c_ensemble = app.add_subcommand("ensemble", "assemble an ensemble spec from models");
  c_ensemble->add_option("--out", ensemble.out_path, "spec file to write")->required();
  c_ensemble->add_option("--taxonomy", ensemble.taxonomy_path, "taxonomy CSV")->required();
  c_ensemble
      ->add_option("--member", ensemble.members,
                   "comma-separated model paths for one member; repeat per member; "
                   "paths are stored verbatim and resolve against the spec's directory")
      ->required();
  c_ensemble->add_option("--weight", ensemble.weights, "fusion weight per member (default 1)");
  c_ensemble->add_option("--postprocess", ensemble.postprocess,
                         "combine mode per member (required for multi-level members)");
  c_ensemble->add_option("--embeddings", ensemble.embeddings_path,
                         "embedding store for store-backed encoders");
  add_common_flags(c_ensemble, ensemble.common);

  app.require_subcommand(1);
  app.parse(argc, argv);

  if (c_ingest->parsed()) {
    ConfigFile cfg(c_ingest, ingest.common.config_path);
    cfg.fall_back("--seed", ingest.common.seed);
    cfg.fall_back("--threads", ingest.common.threads);
    cfg.fall_back("--scheme", ingest.common.scheme);
    return cmd_ingest(ingest);
  }
  if (c_stats->parsed()) {
    ConfigFile cfg(c_stats, stats.common.config_path);
    cfg.fall_back("--seed", stats.common.seed);
    cfg.fall_back("--threads", stats.common.threads);
    cfg.fall_back("--scheme", stats.common.scheme);
    cfg.fall_back("--field", stats.field);
    cfg.fall_back("--tokenizer", stats.tokenizer);
    cfg.fall_back("--vocab", stats.vocab_path);
    cfg.fall_back("--buckets", stats.buckets);
    cfg.fall_back("--bucket-width", stats.bucket_width);
    cfg.fall_back("--over", stats.over);
    return cmd_stats(stats);
  }
  if (c_train->parsed()) {
    ConfigFile cfg(c_train, train.common.config_path);
    cfg.fall_back("--seed", train.common.seed);
    cfg.fall_back("--threads", train.common.threads);
    cfg.fall_back("--scheme", train.common.scheme);
    encoder_fall_backs(cfg, train.encoder);
    train_fall_backs(cfg, train.train);
    return cmd_train(train);
  }
  if (c_tune->parsed()) {
    ConfigFile cfg(c_tune, tune.common.config_path);
    cfg.fall_back("--seed", tune.common.seed);
    cfg.fall_back("--threads", tune.common.threads);
    cfg.fall_back("--scheme", tune.common.scheme);
    cfg.fall_back("--budget", tune.budget);
    cfg.fall_back("--folds", tune.folds);
    cfg.fall_back("--space", tune.space_path);
    encoder_fall_backs(cfg, tune.encoder);
    train_fall_backs(cfg, tune.train);
    return cmd_tune(tune);
  }
  if (c_predict->parsed()) {
    ConfigFile cfg(c_predict, predict.common.config_path);
    cfg.fall_back("--seed", predict.common.seed);
    cfg.fall_back("--threads", predict.common.threads);
    cfg.fall_back("--scheme", predict.common.scheme);
    cfg.fall_back("--model", predict.model_paths);
    cfg.fall_back("--ensemble", predict.ensemble_path);
    cfg.fall_back("--postprocess", predict.postprocess);
    cfg.fall_back("--prune-levels", predict.prune_levels);
    cfg.fall_back("--top-k", predict.top_k);
    cfg.fall_back("--embeddings", predict.embeddings_path);
    return cmd_predict(predict);
  }
  if (c_evaluate->parsed()) {
    ConfigFile cfg(c_evaluate, evaluate.common.config_path);
    cfg.fall_back("--seed", evaluate.common.seed);
    cfg.fall_back("--threads", evaluate.common.threads);
    cfg.fall_back("--scheme", evaluate.common.scheme);
    return cmd_evaluate(evaluate);
  }
  ConfigFile cfg(c_ensemble, ensemble.common.config_path);
  cfg.fall_back("--seed", ensemble.common.seed);
  cfg.fall_back("--threads", ensemble.common.threads);
  cfg.fall_back("--scheme", ensemble.common.scheme);
  cfg.fall_back("--member", ensemble.members);
  cfg.fall_back("--weight", ensemble.weights);
  cfg.fall_back("--postprocess", ensemble.postprocess);
  cfg.fall_back("--embeddings", ensemble.embeddings_path);
  return cmd_ensemble(ensemble);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical occupation classification over job ads"};
  try {
    return dispatch(app, argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) return app.exit(e);
    std::cerr << "error: usage: " << e.what() << "\n";
    return 1;
  } catch (const CliError& e) {
    std::cerr << "error: " << e.category << ": " << e.message << "\n";
    return e.code;
  } catch (const PipelineError& e) {
    std::cerr << "error: " << (e.kind == PipelineError::Kind::Config ? "config" : "data") << ": "
              << e.what() << "\n";
    return 2;
  } catch (const TaxonomyError& e) {
    std::cerr << "error: taxonomy: " << e.what() << "\n";
    return 2;
  } catch (const CorpusError& e) {
    std::cerr << "error: corpus: " << e.what() << "\n";
    return 2;
  } catch (const BundleError& e) {
    std::cerr << "error: model: " << e.what() << "\n";
    return 2;
  } catch (const EnsembleError& e) {
    std::cerr << "error: ensemble: " << e.what() << "\n";
    return 2;
  } catch (const HierarchyError& e) {
    std::cerr << "error: hierarchy: " << e.what() << "\n";
    return 2;
  } catch (const TrainError& e) {
    std::cerr << "error: training: " << e.what() << "\n";
    return 2;
  } catch (const TuneError& e) {
    std::cerr << "error: tuning: " << e.what() << "\n";
    return 2;
  } catch (const EvalError& e) {
    std::cerr << "error: evaluation: " << e.what() << "\n";
    return 2;
  } catch (const EmbedError& e) {
    std::cerr << "error: embedding: " << e.what() << "\n";
    return 2;
  } catch (const CodeError& e) {
    std::cerr << "error: code: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 2;
  }
}
