#include "occlass/bundle.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "occlass/util.hpp"

namespace occlass {

using nlohmann::json;

namespace {

const char* strategy_name(TruncationPolicy::Strategy s) {
  switch (s) {
    case TruncationPolicy::Strategy::Head: return "head";
    case TruncationPolicy::Strategy::Tail: return "tail";
    case TruncationPolicy::Strategy::Mixed: return "mixed";
  }
  return "head";
}

TruncationPolicy::Strategy strategy_from_name(const std::string& name) {
  if (name == "head") return TruncationPolicy::Strategy::Head;
  if (name == "tail") return TruncationPolicy::Strategy::Tail;
  if (name == "mixed") return TruncationPolicy::Strategy::Mixed;
  throw BundleError(BundleError::Kind::Format, "unknown truncation strategy: " + name);
}

json encoder_to_json(const EncoderSpec& e) {
  json j;
  j["field"] = field_name(e.field);
  j["clean"] = {{"split_or_phrases", e.clean.split_or_phrases},
                {"strip_bracketed", e.clean.strip_bracketed},
                {"strip_hour_ranges", e.clean.strip_hour_ranges},
                {"strip_salary_ranges", e.clean.strip_salary_ranges},
                {"truncate_after_hyphen", e.clean.truncate_after_hyphen}};
  j["truncation"] = {{"strategy", strategy_name(e.truncation.strategy)},
                     {"max_len", e.truncation.max_len},
                     {"head_len", e.truncation.mixed_head_len}};
  j["tokenizer"] = e.tokenizer;
  j["hash_buckets"] = e.hash_buckets;
  j["vocab"] = e.vocab;
  j["vector_kind"] = e.vector_kind;
  j["dim"] = e.dim;
  j["max_ngram"] = e.max_ngram;
  j["provider_id"] = e.provider_id;
  j["skill_vocab"] = e.skill_vocab;
  return j;
}

EncoderSpec encoder_from_json(const json& j) {
  EncoderSpec e;
  auto field = field_from_name(j.at("field").get<std::string>());
  if (!field) {
    throw BundleError(BundleError::Kind::Format,
                      "unknown encoder field: " + j.at("field").get<std::string>());
  }
  e.field = *field;
  const json& c = j.at("clean");
  e.clean.split_or_phrases = c.at("split_or_phrases").get<bool>();
  e.clean.strip_bracketed = c.at("strip_bracketed").get<bool>();
  e.clean.strip_hour_ranges = c.at("strip_hour_ranges").get<bool>();
  e.clean.strip_salary_ranges = c.at("strip_salary_ranges").get<bool>();
  e.clean.truncate_after_hyphen = c.at("truncate_after_hyphen").get<bool>();
  const json& t = j.at("truncation");
  e.truncation.strategy = strategy_from_name(t.at("strategy").get<std::string>());
  e.truncation.max_len = t.at("max_len").get<size_t>();
  e.truncation.mixed_head_len = t.at("head_len").get<size_t>();
  e.tokenizer = j.at("tokenizer").get<std::string>();
  e.hash_buckets = j.at("hash_buckets").get<uint32_t>();
  e.vocab = j.at("vocab").get<std::vector<std::string>>();
  e.vector_kind = j.at("vector_kind").get<std::string>();
  e.dim = j.at("dim").get<size_t>();
  e.max_ngram = j.at("max_ngram").get<int>();
  e.provider_id = j.at("provider_id").get<std::string>();
  e.skill_vocab = j.at("skill_vocab").get<std::vector<std::string>>();
  return e;
}

std::string block_name(size_t layer, const char* part) {
  return "layer" + std::to_string(layer) + "." + part;
}

void write_block(std::ostream& out, const std::string& name, std::span<const double> values) {
  out << "block " << name << ' ' << values.size() << '\n';
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out << ' ';
    out << format_double(values[i]);
  }
  out << '\n';
}

void read_block(std::istream& in, const std::string& expect_name, std::span<double> into) {
  std::string tag, name;
  size_t count = 0;
  if (!(in >> tag >> name >> count) || tag != "block") {
    throw BundleError(BundleError::Kind::Format, "expected 'block " + expect_name + "'");
  }
  if (name != expect_name) {
    throw BundleError(BundleError::Kind::Format,
                      "expected block '" + expect_name + "', found '" + name + "'");
  }
  if (count != into.size()) {
    throw BundleError(BundleError::Kind::Inconsistent,
                      "block '" + name + "' holds " + std::to_string(count) +
                          " values, architecture needs " + std::to_string(into.size()));
  }
  for (size_t i = 0; i < count; ++i) {
    if (!(in >> into[i])) {
      throw BundleError(BundleError::Kind::Format, "bad value in block '" + name + "'");
    }
  }
}

}  // namespace

void EncoderSpec::validate() const {
  if (tokenizer != "wordpiece" && tokenizer != "hashed_words" && tokenizer != "none") {
    throw std::invalid_argument("unknown tokenizer: " + tokenizer);
  }
  if (vector_kind != "hashed_ngram" && vector_kind != "store" && vector_kind != "remote" &&
      vector_kind != "skills") {
    throw std::invalid_argument("unknown vector kind: " + vector_kind);
  }
  if (dim == 0) throw std::invalid_argument("encoder dimension must be positive");
  if (vector_kind == "hashed_ngram" && max_ngram < 1) {
    throw std::invalid_argument("max_ngram must be at least 1");
  }
  if (vector_kind == "skills") {
    if (skill_vocab.size() != dim) {
      throw std::invalid_argument("skill encoder dimension must equal the skill vocabulary size");
    }
  }
  if (tokenizer == "wordpiece" && vocab.empty() && vector_kind == "hashed_ngram") {
    throw std::invalid_argument("wordpiece tokenizer needs an inline vocabulary");
  }
  if (tokenizer == "hashed_words" && hash_buckets == 0) {
    throw std::invalid_argument("hashed tokenizer needs a positive bucket count");
  }
}

void ModelBundle::validate() const {
  try {
    arch.validate();
    encoder.validate();
  } catch (const std::invalid_argument& e) {
    throw BundleError(BundleError::Kind::Inconsistent, e.what());
  }
  if (level < 1 || level > scheme_max_level(scheme)) {
    throw BundleError(BundleError::Kind::Inconsistent,
                      "level " + std::to_string(level) + " out of range for " +
                          scheme_name(scheme));
  }
  if (class_codes.size() != arch.num_classes) {
    throw BundleError(BundleError::Kind::Inconsistent,
                      "class list has " + std::to_string(class_codes.size()) +
                          " codes, architecture expects " + std::to_string(arch.num_classes));
  }
  for (const auto& text : class_codes) {
    OccupationCode code;
    try {
      code = parse_code(text, scheme);
    } catch (const CodeError& e) {
      throw BundleError(BundleError::Kind::Inconsistent,
                        "bad class code '" + text + "': " + e.what());
    }
    if (code.level() != level) {
      throw BundleError(BundleError::Kind::Inconsistent,
                        "class code " + text + " is level " + std::to_string(code.level()) +
                            ", model is level " + std::to_string(level));
    }
  }
  if (params.size() != ModelParams::zeros(arch).size()) {
    throw BundleError(BundleError::Kind::Inconsistent,
                      "parameter count does not match the architecture");
  }
  if (encoder.dim != arch.input_dim()) {
    throw BundleError(BundleError::Kind::Inconsistent,
                      "encoder dimension " + std::to_string(encoder.dim) +
                          " does not match model input " + std::to_string(arch.input_dim()));
  }
  if (!params.all_finite()) {
    throw BundleError(BundleError::Kind::Inconsistent, "parameters contain non-finite values");
  }
}

void save_model(const ModelBundle& bundle, const std::string& path) {
  bundle.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw BundleError(BundleError::Kind::Io, "cannot write model file: " + path);

  json header;
  header["scheme"] = scheme_name(bundle.scheme);
  header["level"] = bundle.level;
  header["kind"] = head_kind_name(bundle.arch.kind);
  header["layers"] = json::array();
  for (const LayerSpec& l : bundle.arch.layers) {
    header["layers"].push_back({{"in", l.in_dim},
                                {"out", l.out_dim},
                                {"activation", activation_name(l.activation)},
                                {"layer_norm", l.layer_norm},
                                {"dropout", l.dropout_rate}});
  }
  header["num_classes"] = bundle.arch.num_classes;
  header["classes"] = bundle.class_codes;
  header["encoder"] = encoder_to_json(bundle.encoder);
  header["init_seed"] = bundle.init_seed;
  header["manifest_digest"] = bundle.manifest_digest;

  out << "occlass.model v1\n" << header.dump() << '\n';
  for (size_t l = 0; l < bundle.arch.layers.size(); ++l) {
    write_block(out, block_name(l, "weight"), bundle.params.weight(l));
    write_block(out, block_name(l, "bias"), bundle.params.bias(l));
    if (bundle.arch.layers[l].layer_norm) {
      write_block(out, block_name(l, "gain"), bundle.params.gain(l));
      write_block(out, block_name(l, "ln_bias"), bundle.params.ln_bias(l));
    }
  }
  out << "end\n";
  if (!out) throw BundleError(BundleError::Kind::Io, "short write to model file: " + path);
}

ModelBundle load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BundleError(BundleError::Kind::Io, "cannot open model file: " + path);

  std::string magic;
  if (!std::getline(in, magic)) {
    throw BundleError(BundleError::Kind::Format, "empty model file: " + path);
  }
  if (magic.rfind("occlass.model", 0) != 0) {
    throw BundleError(BundleError::Kind::Format, "not a model file: " + path);
  }
  if (magic != "occlass.model v1") {
    throw BundleError(BundleError::Kind::Version, "unsupported model version: " + magic);
  }

  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw BundleError(BundleError::Kind::Format, "model file has no header");
  }
  json header = json::parse(header_line, nullptr, /*allow_exceptions=*/false);
  if (header.is_discarded()) {
    throw BundleError(BundleError::Kind::Format, "model header is not valid JSON");
  }

  ModelBundle bundle;
  try {
    auto scheme = scheme_from_name(header.at("scheme").get<std::string>());
    if (!scheme) {
      throw BundleError(BundleError::Kind::Format,
                        "unknown scheme: " + header.at("scheme").get<std::string>());
    }
    bundle.scheme = *scheme;
    bundle.level = header.at("level").get<int>();
    bundle.arch.kind = head_kind_from_name(header.at("kind").get<std::string>());
    for (const json& l : header.at("layers")) {
      LayerSpec spec;
      spec.in_dim = l.at("in").get<size_t>();
      spec.out_dim = l.at("out").get<size_t>();
      spec.activation = activation_from_name(l.at("activation").get<std::string>());
      spec.layer_norm = l.at("layer_norm").get<bool>();
      spec.dropout_rate = l.at("dropout").get<double>();
      bundle.arch.layers.push_back(spec);
    }
    bundle.arch.num_classes = header.at("num_classes").get<size_t>();
    bundle.class_codes = header.at("classes").get<std::vector<std::string>>();
    bundle.encoder = encoder_from_json(header.at("encoder"));
    bundle.init_seed = header.at("init_seed").get<uint64_t>();
    bundle.manifest_digest = header.at("manifest_digest").get<std::string>();
  } catch (const json::exception& e) {
    throw BundleError(BundleError::Kind::Format, std::string("bad model header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw BundleError(BundleError::Kind::Format, std::string("bad model header: ") + e.what());
  }

  try {
    bundle.arch.validate();
  } catch (const std::invalid_argument& e) {
    throw BundleError(BundleError::Kind::Inconsistent, e.what());
  }
  bundle.params = ModelParams::zeros(bundle.arch);
  for (size_t l = 0; l < bundle.arch.layers.size(); ++l) {
    read_block(in, block_name(l, "weight"), bundle.params.weight(l));
    read_block(in, block_name(l, "bias"), bundle.params.bias(l));
    if (bundle.arch.layers[l].layer_norm) {
      read_block(in, block_name(l, "gain"), bundle.params.gain(l));
      read_block(in, block_name(l, "ln_bias"), bundle.params.ln_bias(l));
    }
  }
  std::string tail;
  if (!(in >> tail) || tail != "end") {
    throw BundleError(BundleError::Kind::Format, "model file missing 'end' marker");
  }
  bundle.validate();
  return bundle;
}

}  // namespace occlass
