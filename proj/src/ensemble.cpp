#include "occlass/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "occlass/hierarchy.hpp"
#include "occlass/util.hpp"

namespace occlass {

namespace {

// Validate and renormalize one member's emission in place.
void to_distribution(std::vector<double>& scores, const std::string& who, size_t expected) {
  if (scores.size() != expected) {
    throw EnsembleError(EnsembleError::Kind::DimensionMismatch,
                        who + " emitted " + std::to_string(scores.size()) + " scores, expected " +
                            std::to_string(expected));
  }
  double sum = 0.0;
  for (double v : scores) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw EnsembleError(EnsembleError::Kind::DimensionMismatch,
                          who + " emitted a negative or non-finite score");
    }
    sum += v;
  }
  if (sum <= 0.0) {
    std::fill(scores.begin(), scores.end(), 1.0 / static_cast<double>(scores.size()));
  } else {
    for (double& v : scores) v /= sum;
  }
}

}  // namespace

std::vector<double> fuse_scores(const std::vector<std::vector<double>>& member_scores,
                                std::span<const double> weights) {
  if (member_scores.empty()) {
    throw EnsembleError(EnsembleError::Kind::Config, "fusion needs at least one member");
  }
  if (!weights.empty() && weights.size() != member_scores.size()) {
    throw EnsembleError(EnsembleError::Kind::Config,
                        "fusion got " + std::to_string(weights.size()) + " weights for " +
                            std::to_string(member_scores.size()) + " members");
  }
  size_t n = member_scores.front().size();
  if (n == 0) {
    throw EnsembleError(EnsembleError::Kind::DimensionMismatch, "member score vector is empty");
  }

  double w_sum = 0.0;
  std::vector<double> w(member_scores.size(), 1.0);
  for (size_t i = 0; i < member_scores.size(); ++i) {
    if (!weights.empty()) w[i] = weights[i];
    if (!(w[i] > 0.0) || !std::isfinite(w[i])) {
      throw EnsembleError(EnsembleError::Kind::Config,
                          "member weights must be positive and finite");
    }
    w_sum += w[i];
  }

  std::vector<double> fused(n, 0.0);
  for (size_t i = 0; i < member_scores.size(); ++i) {
    std::vector<double> s = member_scores[i];
    to_distribution(s, "member " + std::to_string(i), n);
    for (size_t l = 0; l < n; ++l) fused[l] += w[i] * s[l] / w_sum;
  }
  return fused;
}

void Ensemble::add_member(EnsembleMember member) {
  if (member.feature.empty()) {
    throw EnsembleError(EnsembleError::Kind::Config, "ensemble member needs a feature label");
  }
  if (!(member.weight > 0.0) || !std::isfinite(member.weight)) {
    throw EnsembleError(EnsembleError::Kind::Config,
                        "weight for member " + member.feature + " must be positive and finite");
  }
  if (!member.scorer) {
    throw EnsembleError(EnsembleError::Kind::Config,
                        "member " + member.feature + " has no scorer");
  }
  members_.push_back(std::move(member));
}

FusedPrediction Ensemble::predict(const JobAd& ad) const {
  if (members_.empty()) {
    throw EnsembleError(EnsembleError::Kind::Config, "ensemble has no members");
  }
  size_t n_leaves = taxonomy_->level_count(taxonomy_->depth());

  FusedPrediction out;
  out.fused.assign(n_leaves, 0.0);
  double w_sum = 0.0;
  for (const EnsembleMember& m : members_) w_sum += m.weight;

  for (const EnsembleMember& m : members_) {
    MemberVote vote;
    vote.feature = m.feature;
    std::vector<double> s;
    if (auto scored = m.scorer(ad)) {
      s = std::move(*scored);
      to_distribution(s, "member " + m.feature, n_leaves);
    } else {
      vote.absent = true;
      s.assign(n_leaves, 1.0 / static_cast<double>(n_leaves));
    }
    vote.leaf_position = argmax_position(s);
    vote.confidence = s[vote.leaf_position];
    out.votes.push_back(std::move(vote));
    for (size_t l = 0; l < n_leaves; ++l) out.fused[l] += m.weight * s[l] / w_sum;
  }

  // Leaf order is code order, so the first maximum is the smallest code.
  out.leaf_position = argmax_position(out.fused);
  const auto& leaves = taxonomy_->level_nodes(taxonomy_->depth());
  out.leaf_code = taxonomy_->node(leaves[out.leaf_position]).code.text();
  return out;
}

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& what) {
  throw EnsembleError(EnsembleError::Kind::Config, "ensemble spec: " + what);
}

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) config_error("unknown key \"" + it.key() + "\" in " + where);
  }
}

}  // namespace

EnsembleFileSpec EnsembleFileSpec::parse(const std::string& json_text) {
  json root = json::parse(json_text, nullptr, false);
  if (root.is_discarded() || !root.is_object()) config_error("not a JSON object");
  reject_unknown_keys(root, {"format", "scheme", "members"}, "the top-level object");

  // The tag is optional for hand-written specs but must be ours when present.
  if (root.contains("format") &&
      (!root["format"].is_string() || root["format"].get<std::string>() != kEnsembleFormat)) {
    config_error("unsupported format tag; expected \"" + std::string(kEnsembleFormat) + "\"");
  }

  EnsembleFileSpec spec;
  if (root.contains("scheme")) {
    if (!root["scheme"].is_string()) config_error("\"scheme\" must be a string");
    spec.scheme = root["scheme"].get<std::string>();
    if (!scheme_from_name(spec.scheme)) config_error("unknown scheme \"" + spec.scheme + "\"");
  }

  if (!root.contains("members") || !root["members"].is_array() || root["members"].empty()) {
    config_error("\"members\" must be a non-empty array");
  }
  for (const json& jm : root["members"]) {
    if (!jm.is_object()) config_error("each member must be an object");
    reject_unknown_keys(jm, {"feature", "model", "models", "weight", "postprocess"}, "a member");

    MemberSpec m;
    if (!jm.contains("feature") || !jm["feature"].is_string() ||
        jm["feature"].get<std::string>().empty()) {
      config_error("each member needs a non-empty \"feature\"");
    }
    m.feature = jm["feature"].get<std::string>();

    if (jm.contains("model") == jm.contains("models")) {
      config_error("member " + m.feature + " needs exactly one of \"model\" or \"models\"");
    }
    if (jm.contains("model")) {
      if (!jm["model"].is_string() || jm["model"].get<std::string>().empty()) {
        config_error("member " + m.feature + ": \"model\" must be a non-empty string");
      }
      m.model_paths.push_back(jm["model"].get<std::string>());
    } else {
      if (!jm["models"].is_array() || jm["models"].empty()) {
        config_error("member " + m.feature + ": \"models\" must be a non-empty array");
      }
      for (const json& jp : jm["models"]) {
        if (!jp.is_string() || jp.get<std::string>().empty()) {
          config_error("member " + m.feature + ": model paths must be non-empty strings");
        }
        m.model_paths.push_back(jp.get<std::string>());
      }
    }

    if (jm.contains("weight")) {
      if (!jm["weight"].is_number()) config_error("member " + m.feature + ": bad \"weight\"");
      m.weight = jm["weight"].get<double>();
      if (!(m.weight > 0.0) || !std::isfinite(m.weight)) {
        config_error("member " + m.feature + ": weight must be positive and finite");
      }
    }

    if (jm.contains("postprocess")) {
      if (!jm["postprocess"].is_string()) {
        config_error("member " + m.feature + ": bad \"postprocess\"");
      }
      m.postprocess = jm["postprocess"].get<std::string>();
    }
    if (m.postprocess != "none") {
      try {
        combine_mode_from_name(m.postprocess);
      } catch (const std::invalid_argument&) {
        config_error("member " + m.feature + ": unknown postprocess \"" + m.postprocess + "\"");
      }
    } else if (m.model_paths.size() > 1) {
      config_error("member " + m.feature +
                   " has several per-level models and needs a \"postprocess\" mode");
    }
    spec.members.push_back(std::move(m));
  }
  return spec;
}

std::string EnsembleFileSpec::to_json() const {
  json root = json::object();
  root["format"] = kEnsembleFormat;
  if (!scheme.empty()) root["scheme"] = scheme;
  root["members"] = json::array();
  for (const MemberSpec& m : members) {
    json jm = json::object();
    jm["feature"] = m.feature;
    if (m.model_paths.size() == 1) {
      jm["model"] = m.model_paths.front();
    } else {
      jm["models"] = m.model_paths;
    }
    jm["weight"] = m.weight;
    if (m.postprocess != "none") jm["postprocess"] = m.postprocess;
    root["members"].push_back(std::move(jm));
  }
  return root.dump(2) + "\n";
}

EnsembleFileSpec load_ensemble_spec(const std::string& path) {
  std::string text;
  if (!read_file(path, text)) {
    throw EnsembleError(EnsembleError::Kind::Config, "cannot read ensemble spec: " + path);
  }
  return EnsembleFileSpec::parse(text);
}

void save_ensemble_spec(const EnsembleFileSpec& spec, const std::string& path) {
  write_file(path, spec.to_json());
}

}  // namespace occlass
