#include "occlass/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "json.hpp"

#include "occlass/rng.hpp"
#include "occlass/util.hpp"

namespace occlass {

using json = nlohmann::json;

namespace {

PipelineError config_error(const std::string& what) {
  return PipelineError(PipelineError::Kind::Config, what);
}

PipelineError data_error(const std::string& what) {
  return PipelineError(PipelineError::Kind::Data, what);
}

std::vector<double> softmax(std::vector<double> v) {
  double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - m);
    sum += x;
  }
  for (double& x : v) x /= sum;
  return v;
}

// Levels 1..depth-1 derived from the leaf distribution (each node takes its
// best leaf, renormalized); the leaf level is the distribution itself.
std::vector<LevelDistribution> derive_levels(const Taxonomy& taxonomy,
                                             const std::vector<double>& leaf_dist) {
  std::vector<LevelDistribution> out;
  for (int level = 1; level < taxonomy.depth(); ++level) {
    std::vector<double> v = level_scores_from_leaves(taxonomy, leaf_dist, level);
    double sum = std::accumulate(v.begin(), v.end(), 0.0);
    if (sum > 0.0) {
      for (double& x : v) x /= sum;
    } else {
      std::fill(v.begin(), v.end(), 1.0 / static_cast<double>(v.size()));
    }
    out.push_back({level, std::move(v)});
  }
  out.push_back({taxonomy.depth(), leaf_dist});
  return out;
}

HeadArchitecture make_arch(const std::string& name, size_t in_dim, size_t n_classes,
                           size_t hidden, std::optional<double> dropout) {
  if (name == "baseline") return baseline_arch(in_dim, n_classes);
  if (name == "simple") {
    return dropout ? simple_arch(in_dim, n_classes, hidden, *dropout)
                   : simple_arch(in_dim, n_classes, hidden);
  }
  if (name == "skillnet") {
    return dropout ? skillnet_arch(in_dim, n_classes, *dropout) : skillnet_arch(in_dim, n_classes);
  }
  if (name == "ovr") return ovr_arch(in_dim, n_classes);
  throw config_error("unknown architecture '" + name +
                     "' (expected baseline, simple, skillnet or ovr)");
}

std::vector<double> probabilities_from_output(const HeadArchitecture& arch,
                                              std::vector<double> out) {
  // One-vs-rest heads end in sigmoids, everything else emits logits.
  return arch.kind == HeadKind::OvrBinary ? out : softmax(std::move(out));
}

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  if (path.empty() || path.front() == '/' || base_dir.empty()) return path;
  return base_dir + "/" + path;
}

std::vector<std::string> level_codes(const Taxonomy& taxonomy, int level) {
  std::vector<std::string> codes;
  for (int idx : taxonomy.level_nodes(level)) codes.push_back(taxonomy.node(idx).code.text());
  return codes;
}

const std::string& leaf_code_at(const Taxonomy& taxonomy, size_t leaf_pos) {
  return taxonomy.node(taxonomy.leaves()[leaf_pos]).code.text();
}

// Ranked positions: probability descending, taxonomy position ascending on
// ties; the same order top-k accuracy uses.
std::vector<size_t> ranked_positions(const std::vector<double>& probs) {
  std::vector<size_t> order(probs.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return probs[a] > probs[b]; });
  return order;
}

}  // namespace

DocumentEncoder::DocumentEncoder(EncoderSpec spec, EncodeContext ctx)
    : spec_(std::move(spec)), ctx_(ctx) {
  try {
    spec_.validate();
  } catch (const std::invalid_argument& e) {
    throw config_error(e.what());
  }
  if (spec_.vector_kind == "hashed_ngram") {
    if (spec_.tokenizer == "wordpiece") {
      tokenizer_ = std::make_shared<WordPieceTokenizer>(SubwordVocab::from_tokens(spec_.vocab));
    } else if (spec_.tokenizer == "hashed_words") {
      tokenizer_ = std::make_shared<HashBucketTokenizer>(spec_.hash_buckets);
    } else {
      throw config_error("hashed_ngram vectors need a tokenizer, got '" + spec_.tokenizer + "'");
    }
  } else if (spec_.vector_kind == "skills") {
    skills_ = std::make_shared<SkillVocab>(SkillVocab::from_entries(spec_.skill_vocab));
  } else if (spec_.vector_kind == "store") {
    if (!ctx_.store) throw config_error("store-backed encoder needs an embedding store");
    if (ctx_.store->provider() != spec_.provider_id) {
      throw config_error("embedding store provider '" + ctx_.store->provider() +
                         "' does not match the encoder provider '" + spec_.provider_id + "'");
    }
    if (ctx_.store->dim() != spec_.dim) {
      throw config_error("embedding store width " + std::to_string(ctx_.store->dim()) +
                         " does not match the encoder width " + std::to_string(spec_.dim));
    }
  } else if (spec_.vector_kind == "remote") {
    if (!ctx_.remote) throw config_error("remote-backed encoder needs a remote embedder");
    if (ctx_.remote->provider_id() != spec_.provider_id) {
      throw config_error("remote provider '" + ctx_.remote->provider_id() +
                         "' does not match the encoder provider '" + spec_.provider_id + "'");
    }
  }
}

std::string DocumentEncoder::feature() const {
  if (spec_.vector_kind == "skills" || spec_.field == Field::Skills) return "skills";
  return field_name(spec_.field);
}

bool DocumentEncoder::present(const JobAd& ad) const {
  if (spec_.vector_kind == "skills" || spec_.field == Field::Skills) return !ad.skills.empty();
  return !trim(ad.text(spec_.field)).empty();
}

std::string DocumentEncoder::prepared_text(const JobAd& ad) const {
  const std::string raw = spec_.field == Field::Skills ? join(ad.skills, " ") : ad.text(spec_.field);
  return clean(raw, spec_.clean, spec_.field);
}

std::vector<double> DocumentEncoder::encode(const JobAd& ad) const {
  if (spec_.vector_kind == "skills") {
    return vectorize_skills(ad.skills, *skills_);
  }
  if (spec_.vector_kind == "hashed_ngram") {
    TokenSeq seq = (*tokenizer_)(prepared_text(ad), spec_.field);
    return embed_hashed(truncate(seq, spec_.truncation), spec_.dim, spec_.max_ngram);
  }
  if (spec_.vector_kind == "store") {
    return ctx_.store->lookup(RemoteEmbedder::content_key(prepared_text(ad)));
  }
  // remote
  std::vector<double> v = ctx_.remote->embed_batch({prepared_text(ad)}).front();
  if (v.size() != spec_.dim) {
    throw EmbedError(EmbedError::Kind::DimensionMismatch,
                     "remote returned width " + std::to_string(v.size()) + ", encoder expects " +
                         std::to_string(spec_.dim));
  }
  return v;
}

bool feature_present(const EncoderSpec& spec, const JobAd& ad) {
  return DocumentEncoder(spec).present(ad);
}

std::vector<double> encode_document(const EncoderSpec& spec, const JobAd& ad,
                                    const EncodeContext& ctx) {
  return DocumentEncoder(spec, ctx).encode(ad);
}

EncodedDataset build_dataset(std::span<const JobAd> ads, const Taxonomy& taxonomy, int level,
                             const DocumentEncoder& encoder) {
  if (level < 1 || level > taxonomy.depth()) {
    throw config_error("level " + std::to_string(level) + " outside taxonomy depth " +
                       std::to_string(taxonomy.depth()));
  }
  EncodedDataset ds;
  ds.level = level;
  ds.class_codes = level_codes(taxonomy, level);
  for (size_t i = 0; i < ads.size(); ++i) {
    const JobAd& ad = ads[i];
    auto label = ad.known_label(taxonomy.scheme());
    if (!label) {
      ++ds.skipped_unlabeled;
      continue;
    }
    int leaf_pos = taxonomy.level_position(*label, taxonomy.depth());
    if (leaf_pos < 0) {
      throw data_error("document " + ad.id + ": label " + *label + " is not a " +
                       scheme_name(taxonomy.scheme()) + " leaf");
    }
    if (!encoder.present(ad)) {
      ++ds.skipped_absent;
      continue;
    }
    ds.xs.push_back(encoder.encode(ad));
    ds.ys.push_back(
        static_cast<size_t>(taxonomy.leaf_ancestor_position(static_cast<size_t>(leaf_pos), level)));
    ds.ad_indices.push_back(i);
  }
  if (ds.xs.empty()) {
    throw data_error("no usable documents: every ad lacks a label or the '" + encoder.feature() +
                     "' feature");
  }
  return ds;
}

TrainedBundle train_bundle(std::span<const JobAd> ads, const Taxonomy& taxonomy, int level,
                           const EncoderSpec& encoder, const TrainBundleOptions& options,
                           const EncodeContext& ctx, std::ostream* log) {
  if (!(options.val_fraction > 0.0) || !(options.val_fraction < 1.0)) {
    throw config_error("validation fraction must lie in (0, 1)");
  }
  DocumentEncoder enc(encoder, ctx);
  EncodedDataset ds = build_dataset(ads, taxonomy, level, enc);
  size_t n = ds.xs.size();
  if (n < 2) throw data_error("training needs at least 2 usable documents, got 1");

  size_t n_val = static_cast<size_t>(std::llround(options.val_fraction * static_cast<double>(n)));
  n_val = std::clamp<size_t>(n_val, 1, n - 1);
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng(options.split_seed).shuffle(order);

  std::vector<std::vector<double>> train_x, val_x;
  std::vector<size_t> train_y, val_y;
  for (size_t i = 0; i < n; ++i) {
    size_t row = order[i];
    if (i < n_val) {
      val_x.push_back(ds.xs[row]);
      val_y.push_back(ds.ys[row]);
    } else {
      train_x.push_back(ds.xs[row]);
      train_y.push_back(ds.ys[row]);
    }
  }

  HeadArchitecture arch = make_arch(options.arch, ds.xs.front().size(), ds.class_codes.size(),
                                    options.hidden, options.dropout);
  TrainResult result = train_model(arch, train_x, train_y, val_x, val_y, options.train, log);

  TrainedBundle out;
  out.bundle.scheme = taxonomy.scheme();
  out.bundle.level = level;
  out.bundle.arch = std::move(arch);
  out.bundle.params = std::move(result.params);
  out.bundle.class_codes = std::move(ds.class_codes);
  out.bundle.encoder = encoder;
  out.bundle.init_seed = options.train.seed;
  out.report = std::move(result.report);
  out.train_count = train_x.size();
  out.val_count = val_x.size();
  return out;
}

std::vector<double> score_document(const ModelBundle& bundle, const JobAd& ad,
                                   const EncodeContext& ctx) {
  DocumentEncoder enc(bundle.encoder, ctx);
  std::vector<double> x = enc.encode(ad);
  return probabilities_from_output(bundle.arch, forward(bundle.arch, bundle.params, x, Mode::Infer));
}

Classifier Classifier::flat(const Taxonomy* taxonomy, ModelBundle leaf_model, EncodeContext ctx) {
  leaf_model.validate();
  if (leaf_model.scheme != taxonomy->scheme()) {
    throw EnsembleError(EnsembleError::Kind::SchemeMismatch,
                        "model scheme does not match the taxonomy");
  }
  if (leaf_model.level != taxonomy->depth()) {
    throw config_error("flat classification needs a leaf-level model, got level " +
                       std::to_string(leaf_model.level));
  }
  Classifier c;
  c.taxonomy_ = taxonomy;
  c.kind_ = Kind::Flat;
  c.encoders_.emplace_back(leaf_model.encoder, ctx);
  c.feature_ = c.encoders_.front().feature();
  // Fail now, not at first predict, when the class list does not cover the
  // leaf level.
  align_level_distribution(*taxonomy, leaf_model.level, leaf_model.class_codes,
                           std::vector<double>(leaf_model.class_codes.size(), 1.0));
  c.bundles_.push_back(std::move(leaf_model));
  return c;
}

Classifier Classifier::level_bank(const Taxonomy* taxonomy, std::vector<ModelBundle> per_level,
                                  std::optional<CombineMode> combine, EncodeContext ctx) {
  std::sort(per_level.begin(), per_level.end(),
            [](const ModelBundle& a, const ModelBundle& b) { return a.level < b.level; });
  if (per_level.size() != static_cast<size_t>(taxonomy->depth())) {
    throw config_error("a level bank needs one model per level, got " +
                       std::to_string(per_level.size()) + " for depth " +
                       std::to_string(taxonomy->depth()));
  }
  Classifier c;
  c.taxonomy_ = taxonomy;
  c.kind_ = Kind::Bank;
  c.combine_ = combine;
  for (int level = 1; level <= taxonomy->depth(); ++level) {
    ModelBundle& b = per_level[static_cast<size_t>(level - 1)];
    b.validate();
    if (b.scheme != taxonomy->scheme()) {
      throw EnsembleError(EnsembleError::Kind::SchemeMismatch,
                          "model scheme does not match the taxonomy");
    }
    if (b.level != level) {
      throw config_error("level bank models must cover levels 1.." +
                         std::to_string(taxonomy->depth()) + " exactly once");
    }
    align_level_distribution(*taxonomy, level, b.class_codes,
                             std::vector<double>(b.class_codes.size(), 1.0));
    c.encoders_.emplace_back(b.encoder, ctx);
  }
  c.feature_ = c.encoders_.front().feature();
  c.bundles_ = std::move(per_level);
  return c;
}

Classifier Classifier::fused(const Taxonomy* taxonomy, std::vector<Classifier> members,
                             std::vector<double> weights) {
  if (members.empty()) throw config_error("a fused classifier needs at least one member");
  if (!weights.empty() && weights.size() != members.size()) {
    throw config_error("got " + std::to_string(weights.size()) + " weights for " +
                       std::to_string(members.size()) + " members");
  }
  for (double w : weights) {
    if (!std::isfinite(w) || w <= 0.0) {
      throw config_error("member weights must be finite and positive");
    }
  }
  Classifier c;
  c.taxonomy_ = taxonomy;
  c.kind_ = Kind::Fused;
  c.feature_ = "ensemble";
  for (Classifier& m : members) {
    if (&m.taxonomy() != taxonomy) {
      throw config_error("every member must share the ensemble's taxonomy");
    }
    c.members_.push_back(std::make_shared<Classifier>(std::move(m)));
  }
  c.weights_ = std::move(weights);
  return c;
}

Classifier Classifier::from_spec(const Taxonomy* taxonomy, const EnsembleFileSpec& spec,
                                 const std::string& base_dir, EncodeContext ctx) {
  if (!spec.scheme.empty() && spec.scheme != scheme_name(taxonomy->scheme())) {
    throw EnsembleError(EnsembleError::Kind::SchemeMismatch,
                        "spec scheme '" + spec.scheme + "' does not match the taxonomy");
  }
  std::vector<Classifier> members;
  std::vector<double> weights;
  for (const MemberSpec& m : spec.members) {
    std::vector<ModelBundle> bundles;
    for (const std::string& path : m.model_paths) {
      bundles.push_back(load_model(resolve_path(base_dir, path)));
    }
    Classifier member =
        bundles.size() == 1
            ? flat(taxonomy, std::move(bundles.front()), ctx)
            : level_bank(taxonomy, std::move(bundles),
                         m.postprocess == "none"
                             ? std::nullopt
                             : std::optional<CombineMode>(combine_mode_from_name(m.postprocess)),
                         ctx);
    if (member.feature() != m.feature) {
      throw config_error("member '" + m.feature + "' lists models that consume '" +
                         member.feature() + "'");
    }
    members.push_back(std::move(member));
    weights.push_back(m.weight);
  }
  return fused(taxonomy, std::move(members), std::move(weights));
}

bool Classifier::present(const JobAd& ad) const {
  if (kind_ == Kind::Fused) {
    return std::any_of(members_.begin(), members_.end(),
                       [&](const auto& m) { return m->present(ad); });
  }
  return std::any_of(encoders_.begin(), encoders_.end(),
                     [&](const DocumentEncoder& e) { return e.present(ad); });
}

DocumentPrediction Classifier::predict(const JobAd& ad, const PredictOptions& options) const {
  const Taxonomy& tax = *taxonomy_;
  DocumentPrediction pred;
  pred.id = ad.id;

  std::vector<double> leaf;
  if (kind_ == Kind::Flat) {
    const ModelBundle& b = bundles_.front();
    std::vector<double> probs = probabilities_from_output(
        b.arch, forward(b.arch, b.params, encoders_.front().encode(ad), Mode::Infer));
    leaf = align_level_distribution(tax, b.level, b.class_codes, probs).probs;
    pred.levels = derive_levels(tax, leaf);
  } else if (kind_ == Kind::Bank) {
    for (size_t i = 0; i < bundles_.size(); ++i) {
      const ModelBundle& b = bundles_[i];
      std::vector<double> probs = probabilities_from_output(
          b.arch, forward(b.arch, b.params, encoders_[i].encode(ad), Mode::Infer));
      pred.levels.push_back(align_level_distribution(tax, b.level, b.class_codes, probs));
    }
    std::optional<CombineMode> mode = options.postprocess ? options.postprocess : combine_;
    leaf = mode ? combine_levels(tax, pred.levels, *mode) : pred.levels.back().probs;
  } else {
    size_t n_leaves = tax.level_count(tax.depth());
    std::vector<std::vector<double>> member_scores;
    PredictOptions nested;
    nested.postprocess = options.postprocess;
    for (const auto& m : members_) {
      MemberVote vote;
      vote.feature = m->feature();
      if (m->present(ad)) {
        member_scores.push_back(m->predict(ad, nested).leaf_scores);
      } else {
        vote.absent = true;
        member_scores.push_back(
            std::vector<double>(n_leaves, 1.0 / static_cast<double>(n_leaves)));
      }
      vote.leaf_position = argmax_position(member_scores.back());
      vote.confidence = member_scores.back()[vote.leaf_position];
      pred.votes.push_back(std::move(vote));
    }
    leaf = fuse_scores(member_scores, weights_);
    pred.levels = derive_levels(tax, leaf);
  }

  if (!options.prune_levels.empty()) {
    PruneResult pr = logical_prune(tax, pred.levels, leaf, options.prune_levels);
    pred.pruned = true;
    pred.prune_fell_back = pr.fell_back;
    leaf = std::move(pr.scores);
  }
  pred.leaf_scores = std::move(leaf);
  pred.leaf_position = argmax_position(pred.leaf_scores);
  pred.leaf_code = leaf_code_at(tax, pred.leaf_position);
  return pred;
}

void RunManifest::add_input(const std::string& path) {
  try {
    inputs[path] = to_hex(file_digest(path));
  } catch (const std::exception&) {
    throw data_error("cannot read input: " + path);
  }
}

std::string RunManifest::to_json() const {
  json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["command"] = command;
  j["seed"] = seed;
  j["threads"] = threads;
  j["scheme"] = scheme;
  j["config"] = json::object();
  for (const auto& [k, v] : config) j["config"][k] = v;
  j["inputs"] = json::object();
  for (const auto& [k, v] : inputs) j["inputs"][k] = v;
  return j.dump();
}

std::string RunManifest::digest() const { return to_hex(stable_hash64(to_json(), 0x0cc1a55)); }

std::string prediction_to_json(const DocumentPrediction& pred, const Taxonomy& taxonomy,
                               size_t top_k) {
  if (pred.levels.size() != static_cast<size_t>(taxonomy.depth())) {
    throw data_error("prediction carries " + std::to_string(pred.levels.size()) +
                     " level distributions for depth " + std::to_string(taxonomy.depth()));
  }
  json j;
  j["id"] = pred.id;
  j["leaf"] = pred.leaf_code;
  j["fell_back"] = pred.prune_fell_back;
  json levels = json::object();
  for (int level = 1; level <= taxonomy.depth(); ++level) {
    const std::vector<double>& probs =
        level == taxonomy.depth() ? pred.leaf_scores : pred.levels[static_cast<size_t>(level - 1)].probs;
    const auto& nodes = taxonomy.level_nodes(level);
    json entries = json::array();
    std::vector<size_t> order = ranked_positions(probs);
    size_t keep = std::min(top_k, order.size());
    for (size_t r = 0; r < keep; ++r) {
      json e;
      e["code"] = taxonomy.node(nodes[order[r]]).code.text();
      e["p"] = probs[order[r]];
      entries.push_back(std::move(e));
    }
    levels[std::to_string(level)] = std::move(entries);
  }
  j["levels"] = std::move(levels);
  if (!pred.votes.empty()) {
    json votes = json::array();
    for (const MemberVote& v : pred.votes) {
      json e;
      e["feature"] = v.feature;
      e["absent"] = v.absent;
      e["code"] = leaf_code_at(taxonomy, v.leaf_position);
      e["confidence"] = v.confidence;
      votes.push_back(std::move(e));
    }
    j["votes"] = std::move(votes);
  }
  return j.dump();
}

PredictionRow prediction_row_from_json(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j["id"].is_string() ||
      !j.contains("leaf") || !j["leaf"].is_string() || !j.contains("levels") ||
      !j["levels"].is_object()) {
    throw data_error("malformed prediction line");
  }
  PredictionRow row;
  row.id = j["id"].get<std::string>();
  row.leaf_code = j["leaf"].get<std::string>();
  row.prune_fell_back = j.value("fell_back", false);
  for (const auto& [key, entries] : j["levels"].items()) {
    int level = 0;
    try {
      level = std::stoi(key);
    } catch (const std::exception&) {
      throw data_error("malformed prediction line: level key '" + key + "'");
    }
    if (!entries.is_array() || entries.empty()) {
      throw data_error("malformed prediction line: level " + key + " has no entries");
    }
    std::vector<LevelTopEntry> list;
    for (const auto& e : entries) {
      if (!e.is_object() || !e.contains("code") || !e["code"].is_string() || !e.contains("p") ||
          !e["p"].is_number()) {
        throw data_error("malformed prediction line: bad level entry");
      }
      list.push_back({e["code"].get<std::string>(), e["p"].get<double>()});
    }
    row.levels.emplace_back(level, std::move(list));
  }
  std::sort(row.levels.begin(), row.levels.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return row;
}

EvalReport evaluate_rows(const Taxonomy& taxonomy, std::span<const PredictionRow> rows,
                         std::span<const JobAd> gold_ads, std::ostream* warn) {
  const int depth = taxonomy.depth();
  std::map<std::string, size_t> gold_leaf;  // id -> leaf position
  std::set<std::string> known_ids;
  for (const JobAd& ad : gold_ads) {
    known_ids.insert(ad.id);
    auto label = ad.known_label(taxonomy.scheme());
    if (!label) continue;
    int pos = taxonomy.level_position(*label, depth);
    if (pos < 0) {
      throw data_error("document " + ad.id + ": label " + *label + " is not a " +
                       scheme_name(taxonomy.scheme()) + " leaf");
    }
    gold_leaf[ad.id] = static_cast<size_t>(pos);
  }

  std::vector<const PredictionRow*> matched;
  size_t unlabeled = 0;
  for (const PredictionRow& row : rows) {
    auto it = gold_leaf.find(row.id);
    if (it == gold_leaf.end()) {
      if (!known_ids.count(row.id)) {
        throw data_error("prediction " + row.id + " has no document in the gold corpus");
      }
      ++unlabeled;
      continue;
    }
    matched.push_back(&row);
  }
  if (warn && unlabeled) {
    *warn << "skipped " << unlabeled << " predictions whose gold documents carry no label\n";
  }
  if (matched.empty()) {
    throw EvalError(EvalError::Kind::EmptyEvaluation, "no labelled documents to evaluate");
  }

  EvalReport report;
  report.samples = matched.size();

  std::vector<size_t> pred_leaves(matched.size()), gold_leaves(matched.size());
  std::vector<std::string> pred_codes(matched.size()), gold_codes(matched.size());
  for (size_t i = 0; i < matched.size(); ++i) {
    const PredictionRow& row = *matched[i];
    int pos = taxonomy.level_position(row.leaf_code, depth);
    if (pos < 0) {
      throw data_error("prediction " + row.id + ": leaf " + row.leaf_code + " is not a leaf");
    }
    pred_leaves[i] = static_cast<size_t>(pos);
    gold_leaves[i] = gold_leaf.at(row.id);
    pred_codes[i] = row.leaf_code;
    gold_codes[i] = leaf_code_at(taxonomy, gold_leaves[i]);
  }

  for (int level = 1; level <= depth; ++level) {
    size_t n = taxonomy.level_count(level);
    std::vector<std::vector<double>> scores(matched.size());
    std::vector<size_t> preds(matched.size()), golds(matched.size());
    size_t stored_min = n;
    for (size_t i = 0; i < matched.size(); ++i) {
      const PredictionRow& row = *matched[i];
      auto it = std::find_if(row.levels.begin(), row.levels.end(),
                             [&](const auto& p) { return p.first == level; });
      if (it == row.levels.end()) {
        throw data_error("prediction " + row.id + " is missing level " + std::to_string(level));
      }
      // Classes outside the stored list sit below every stored entry.
      scores[i].assign(n, -1.0);
      for (const LevelTopEntry& e : it->second) {
        int pos = taxonomy.level_position(e.code, level);
        if (pos < 0) {
          throw data_error("prediction " + row.id + ": " + e.code + " is not a level " +
                           std::to_string(level) + " code");
        }
        if (!(e.prob >= 0.0) || !std::isfinite(e.prob)) {
          throw data_error("prediction " + row.id + ": bad probability for " + e.code);
        }
        scores[i][static_cast<size_t>(pos)] = e.prob;
      }
      stored_min = std::min(stored_min, it->second.size());
      preds[i] = static_cast<size_t>(
          taxonomy.level_position(it->second.front().code, level));
      golds[i] = static_cast<size_t>(taxonomy.leaf_ancestor_position(gold_leaves[i], level));
      if (level == depth && preds[i] != pred_leaves[i]) {
        throw data_error("prediction " + row.id + ": leaf " + row.leaf_code +
                         " disagrees with the leaf ranking");
      }
    }
    LevelMetrics lm;
    lm.level = level;
    lm.macro_f1 = macro_f1(preds, golds, n);
    auto capped = [&](size_t k) {
      size_t kk = std::min(k, n);
      if (kk > stored_min) {
        if (warn) {
          *warn << "level " << level << " top-" << k << " capped at the stored list length "
                << stored_min << "\n";
        }
        kk = stored_min;
      }
      return topk_accuracy(scores, golds, kk);
    };
    lm.top1 = capped(1);
    lm.top5 = capped(5);
    lm.top10 = capped(10);
    lm.matrix = confusion_at_level(taxonomy, level, preds, golds);
    report.levels.push_back(std::move(lm));
  }

  report.hierarchy = hierarchical_prf_corpus(pred_codes, gold_codes, taxonomy);
  report.support_table = error_vs_support(pred_leaves, gold_leaves, taxonomy.level_count(depth));
  return report;
}

AppliedTrial apply_trial(const TrialConfig& trial, const TrainConfig& base, std::ostream* warn) {
  AppliedTrial out;
  out.config = base;
  for (const auto& [name, value] : trial) {
    if (name == "learning_rate") {
      out.config.learning_rate = value;
    } else if (name == "weight_decay") {
      out.config.weight_decay = value;
    } else if (name == "epochs") {
      out.config.epochs = static_cast<size_t>(std::llround(value));
    } else if (name == "hidden_dropout") {
      out.hidden_dropout = value;
    } else if (name == "attention_dropout") {
      if (warn) *warn << "attention_dropout has no effect on native heads\n";
    } else {
      throw config_error("unknown tuning dimension '" + name + "'");
    }
  }
  return out;
}

FoldTrainer make_fold_trainer(const std::string& arch, size_t n_classes, const TrainConfig& base,
                              size_t hidden) {
  return [arch, n_classes, base, hidden](
             const TrialConfig& config, std::span<const std::vector<double>> train_x,
             std::span<const size_t> train_y, std::span<const std::vector<double>> val_x,
             std::span<const size_t> val_y) {
    AppliedTrial applied = apply_trial(config, base);
    HeadArchitecture a =
        make_arch(arch, train_x.front().size(), n_classes, hidden, applied.hidden_dropout);
    return train_model(a, train_x, train_y, val_x, val_y, applied.config).report.best_val_accuracy;
  };
}

IngestResult ingest_corpus(const std::string& path, const Taxonomy& taxonomy) {
  Corpus corpus = load_corpus(path);
  IngestResult out;
  out.rejects = std::move(corpus.rejects);
  out.parse_rejects = out.rejects.size();
  for (JobAd& ad : corpus.ads) {
    auto label = ad.known_label(taxonomy.scheme());
    if (label && taxonomy.level_position(*label, taxonomy.depth()) < 0) {
      out.rejects.push_back({0,
                             "label " + *label + " is not a " +
                                 std::string(scheme_name(taxonomy.scheme())) + " leaf",
                             ad.id});
      continue;
    }
    if (label) ++out.labeled;
    out.ads.push_back(std::move(ad));
  }
  return out;
}

}  // namespace occlass
