#include "occlass/hierarchy.hpp"

#include <algorithm>
#include <cmath>

namespace occlass {

namespace {

// Re-align and defensively renormalize a model's output into a taxonomy-
// ordered distribution.
std::vector<double> align_distribution(const std::vector<double>& raw,
                                       const std::vector<size_t>& to_taxonomy, int level) {
  if (raw.size() != to_taxonomy.size()) {
    throw HierarchyError(HierarchyError::Kind::DimensionMismatch,
                         "level " + std::to_string(level) + " model emitted " +
                             std::to_string(raw.size()) + " scores, expected " +
                             std::to_string(to_taxonomy.size()));
  }
  std::vector<double> probs(raw.size(), 0.0);
  double sum = 0.0;
  for (size_t i = 0; i < raw.size(); ++i) {
    double v = raw[i];
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw HierarchyError(HierarchyError::Kind::DimensionMismatch,
                           "level " + std::to_string(level) +
                               " model emitted a negative or non-finite score");
    }
    probs[to_taxonomy[i]] = v;
    sum += v;
  }
  if (sum <= 0.0) {
    std::fill(probs.begin(), probs.end(), 1.0 / static_cast<double>(probs.size()));
  } else {
    for (double& p : probs) p /= sum;
  }
  return probs;
}

// Maps registered class codes onto level positions, insisting the class list
// covers the level exactly.
std::vector<size_t> level_mapping(const Taxonomy& taxonomy, int level,
                                  const std::vector<std::string>& class_codes) {
  const auto& nodes = taxonomy.level_nodes(level);
  if (class_codes.size() != nodes.size()) {
    throw HierarchyError(HierarchyError::Kind::InconsistentScheme,
                         "class list has " + std::to_string(class_codes.size()) +
                             " codes, taxonomy level " + std::to_string(level) + " has " +
                             std::to_string(nodes.size()));
  }
  std::vector<size_t> map(class_codes.size());
  std::vector<bool> seen(nodes.size(), false);
  for (size_t i = 0; i < class_codes.size(); ++i) {
    int pos = taxonomy.level_position(class_codes[i], level);
    if (pos < 0) {
      throw HierarchyError(HierarchyError::Kind::InconsistentScheme,
                           "class code " + class_codes[i] + " is not a level " +
                               std::to_string(level) + " node");
    }
    if (seen[static_cast<size_t>(pos)]) {
      throw HierarchyError(HierarchyError::Kind::InconsistentScheme,
                           "duplicate class code " + class_codes[i]);
    }
    seen[static_cast<size_t>(pos)] = true;
    map[i] = static_cast<size_t>(pos);
  }
  return map;
}

}  // namespace

size_t argmax_position(std::span<const double> scores) {
  return static_cast<size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

LevelDistribution align_level_distribution(const Taxonomy& taxonomy, int level,
                                           const std::vector<std::string>& class_codes,
                                           const std::vector<double>& scores) {
  LevelDistribution d;
  d.level = level;
  d.probs = align_distribution(scores, level_mapping(taxonomy, level, class_codes), level);
  return d;
}

void LevelBank::set_level(int level, const std::vector<std::string>& class_codes, ScoreFn model) {
  if (level < 1 || level > taxonomy_->depth()) {
    throw HierarchyError(HierarchyError::Kind::InconsistentScheme,
                         "level " + std::to_string(level) + " outside taxonomy depth " +
                             std::to_string(taxonomy_->depth()));
  }
  Entry e;
  e.model = std::move(model);
  e.to_taxonomy = level_mapping(*taxonomy_, level, class_codes);
  levels_[level] = std::move(e);
}

bool LevelBank::complete() const {
  for (int level = 1; level <= taxonomy_->depth(); ++level) {
    if (!levels_.count(level)) return false;
  }
  return true;
}

std::vector<LevelDistribution> LevelBank::predict_levels(std::span<const double> x) const {
  if (!complete()) {
    throw HierarchyError(HierarchyError::Kind::MissingModel,
                         "level bank is missing a per-level model");
  }
  std::vector<LevelDistribution> out;
  for (int level = 1; level <= taxonomy_->depth(); ++level) {
    const Entry& e = levels_.at(level);
    LevelDistribution d;
    d.level = level;
    d.probs = align_distribution(e.model(x), e.to_taxonomy, level);
    out.push_back(std::move(d));
  }
  return out;
}

LcpnRouter::LcpnRouter(const Taxonomy* taxonomy, double tau) : taxonomy_(taxonomy), tau_(tau) {
  if (tau < 0.0 || tau > 1.0) {
    throw HierarchyError(HierarchyError::Kind::InconsistentScheme,
                         "confidence threshold must lie in [0, 1]");
  }
}

void LcpnRouter::set_root(const std::vector<std::string>& class_codes, ScoreFn model) {
  auto map = level_mapping(*taxonomy_, 1, class_codes);
  Entry e;
  e.model = std::move(model);
  const auto& nodes = taxonomy_->level_nodes(1);
  e.nodes.resize(class_codes.size());
  for (size_t i = 0; i < map.size(); ++i) e.nodes[i] = nodes[map[i]];
  root_ = std::move(e);
}

void LcpnRouter::set_children(const std::string& parent_code,
                              const std::vector<std::string>& class_codes, ScoreFn model) {
  int parent = taxonomy_->index_of(parent_code);
  if (parent < 0) {
    throw HierarchyError(HierarchyError::Kind::InconsistentScheme,
                         "unknown parent code: " + parent_code);
  }
  const auto& children = taxonomy_->node(parent).children;
  if (class_codes.size() != children.size()) {
    throw HierarchyError(HierarchyError::Kind::InconsistentScheme,
                         "child model for " + parent_code + " lists " +
                             std::to_string(class_codes.size()) + " classes, node has " +
                             std::to_string(children.size()) + " children");
  }
  Entry e;
  e.model = std::move(model);
  e.nodes.resize(class_codes.size());
  std::vector<bool> used(children.size(), false);
  for (size_t i = 0; i < class_codes.size(); ++i) {
    int idx = taxonomy_->index_of(class_codes[i]);
    auto it = std::find(children.begin(), children.end(), idx);
    if (idx < 0 || it == children.end()) {
      throw HierarchyError(HierarchyError::Kind::InconsistentScheme,
                           class_codes[i] + " is not a child of " + parent_code);
    }
    size_t pos = static_cast<size_t>(it - children.begin());
    if (used[pos]) {
      throw HierarchyError(HierarchyError::Kind::InconsistentScheme,
                           "duplicate child code " + class_codes[i]);
    }
    used[pos] = true;
    e.nodes[i] = idx;
  }
  children_[parent_code] = std::move(e);
}

void LcpnRouter::set_flat(const std::vector<std::string>& class_codes, ScoreFn model) {
  auto map = level_mapping(*taxonomy_, taxonomy_->depth(), class_codes);
  Entry e;
  e.model = std::move(model);
  const auto& leaves = taxonomy_->level_nodes(taxonomy_->depth());
  e.nodes.resize(class_codes.size());
  for (size_t i = 0; i < map.size(); ++i) e.nodes[i] = leaves[map[i]];
  flat_ = std::move(e);
}

LcpnRouter::Route LcpnRouter::predict(std::span<const double> x) const {
  if (!root_.model || !flat_.model) {
    throw HierarchyError(HierarchyError::Kind::MissingModel,
                         "router needs both a root model and a flat fallback");
  }

  auto pick = [&](const Entry& e) {
    std::vector<double> scores = e.model(x);
    if (scores.size() != e.nodes.size()) {
      throw HierarchyError(HierarchyError::Kind::DimensionMismatch,
                           "router model emitted " + std::to_string(scores.size()) +
                               " scores, expected " + std::to_string(e.nodes.size()));
    }
    // ties break toward the lexicographically smallest code, independent of
    // the order the model's classes were registered in
    size_t best = 0;
    double best_score = scores[0];
    const std::string* best_code = &taxonomy_->node(e.nodes[0]).code.text();
    for (size_t i = 1; i < scores.size(); ++i) {
      const std::string& code = taxonomy_->node(e.nodes[i]).code.text();
      if (scores[i] > best_score || (scores[i] == best_score && code < *best_code)) {
        best = i;
        best_score = scores[i];
        best_code = &code;
      }
    }
    return std::make_pair(e.nodes[best], best_score);
  };

  Route route;
  auto fall_back = [&]() {
    auto [leaf, conf] = pick(flat_);
    route.trace.push_back({"flat", taxonomy_->node(leaf).code.text(), conf});
    route.used_fallback = true;
    route.leaf_code = taxonomy_->node(leaf).code.text();
    return route;
  };

  auto [node, conf] = pick(root_);
  route.trace.push_back({"root", taxonomy_->node(node).code.text(), conf});

  while (true) {
    // tau = 1.0 always routes to the flat model: softmax confidence never
    // reaches 1 exactly, and floating-point saturation must not change that
    if (tau_ >= 1.0 || conf < tau_) return fall_back();
    const TaxonomyNode& n = taxonomy_->node(node);
    if (n.code.level() == taxonomy_->depth()) break;
    auto it = children_.find(n.code.text());
    if (it == children_.end()) return fall_back();
    auto [child, child_conf] = pick(it->second);
    route.trace.push_back({n.code.text(), taxonomy_->node(child).code.text(), child_conf});
    node = child;
    conf = child_conf;
    if (taxonomy_->node(node).code.level() == taxonomy_->depth()) break;
  }
  route.leaf_code = taxonomy_->node(node).code.text();
  return route;
}

const char* combine_mode_name(CombineMode m) {
  switch (m) {
    case CombineMode::TotalAvg: return "total_avg";
    case CombineMode::WeightedAvg: return "weighted_avg";
    case CombineMode::JointProb: return "joint_prob";
  }
  return "total_avg";
}

CombineMode combine_mode_from_name(const std::string& name) {
  if (name == "total_avg") return CombineMode::TotalAvg;
  if (name == "weighted_avg") return CombineMode::WeightedAvg;
  if (name == "joint_prob") return CombineMode::JointProb;
  throw std::invalid_argument("unknown post-processing mode: " + name);
}

namespace {

void check_dists(const Taxonomy& taxonomy, const std::vector<LevelDistribution>& dists) {
  if (static_cast<int>(dists.size()) != taxonomy.depth()) {
    throw HierarchyError(HierarchyError::Kind::InconsistentScheme,
                         "expected " + std::to_string(taxonomy.depth()) +
                             " level distributions, got " + std::to_string(dists.size()));
  }
  for (int level = 1; level <= taxonomy.depth(); ++level) {
    const LevelDistribution& d = dists[static_cast<size_t>(level - 1)];
    if (d.level != level) {
      throw HierarchyError(HierarchyError::Kind::InconsistentScheme,
                           "level distributions must be ascending 1..depth");
    }
    if (d.probs.size() != taxonomy.level_count(level)) {
      throw HierarchyError(HierarchyError::Kind::DimensionMismatch,
                           "level " + std::to_string(level) + " distribution has " +
                               std::to_string(d.probs.size()) + " entries, taxonomy has " +
                               std::to_string(taxonomy.level_count(level)));
    }
  }
}

}  // namespace

std::vector<double> combine_levels(const Taxonomy& taxonomy,
                                   const std::vector<LevelDistribution>& dists, CombineMode mode,
                                   std::span<const double> weights) {
  check_dists(taxonomy, dists);
  int depth = taxonomy.depth();

  std::vector<double> w;
  if (mode == CombineMode::WeightedAvg) {
    if (weights.empty()) {
      for (int k = 1; k <= depth; ++k) w.push_back(static_cast<double>(k));
    } else {
      if (static_cast<int>(weights.size()) != depth) {
        throw HierarchyError(HierarchyError::Kind::InconsistentScheme,
                             "weighted_avg needs one weight per level");
      }
      for (double v : weights) {
        if (!(v > 0.0) || !std::isfinite(v)) {
          throw HierarchyError(HierarchyError::Kind::InconsistentScheme,
                               "weights must be positive and finite");
        }
        w.push_back(v);
      }
    }
  }
  double w_sum = 0.0;
  for (double v : w) w_sum += v;

  size_t n_leaves = taxonomy.level_count(depth);
  std::vector<double> scores(n_leaves, 0.0);
  for (size_t leaf = 0; leaf < n_leaves; ++leaf) {
    double acc = mode == CombineMode::JointProb ? 1.0 : 0.0;
    for (int k = 1; k <= depth; ++k) {
      double p = dists[static_cast<size_t>(k - 1)]
                     .probs[static_cast<size_t>(taxonomy.leaf_ancestor_position(leaf, k))];
      switch (mode) {
        case CombineMode::TotalAvg: acc += p / static_cast<double>(depth); break;
        case CombineMode::WeightedAvg: acc += w[static_cast<size_t>(k - 1)] * p / w_sum; break;
        case CombineMode::JointProb: acc *= p; break;
      }
    }
    scores[leaf] = acc;
  }

  double total = 0.0;
  for (double s : scores) total += s;
  if (total <= 0.0) {
    std::fill(scores.begin(), scores.end(), 1.0 / static_cast<double>(n_leaves));
  } else {
    for (double& s : scores) s /= total;
  }
  return scores;
}

PruneResult logical_prune(const Taxonomy& taxonomy, const std::vector<LevelDistribution>& dists,
                          std::span<const double> leaf_scores,
                          const std::vector<int>& keep_levels) {
  check_dists(taxonomy, dists);
  size_t n_leaves = taxonomy.level_count(taxonomy.depth());
  if (leaf_scores.size() != n_leaves) {
    throw HierarchyError(HierarchyError::Kind::DimensionMismatch,
                         "leaf score vector does not match the taxonomy leaf count");
  }
  for (int level : keep_levels) {
    if (level < 1 || level > taxonomy.depth()) {
      throw HierarchyError(HierarchyError::Kind::InconsistentScheme,
                           "pruning level " + std::to_string(level) + " outside taxonomy depth");
    }
  }

  PruneResult result;
  result.scores.assign(leaf_scores.begin(), leaf_scores.end());
  for (int level : keep_levels) {
    size_t keep = argmax_position(dists[static_cast<size_t>(level - 1)].probs);
    for (size_t leaf = 0; leaf < n_leaves; ++leaf) {
      if (static_cast<size_t>(taxonomy.leaf_ancestor_position(leaf, level)) != keep) {
        result.scores[leaf] = 0.0;
      }
    }
  }

  double total = 0.0;
  for (double s : result.scores) total += s;
  if (total <= 0.0) {
    result.scores.assign(leaf_scores.begin(), leaf_scores.end());
    result.fell_back = true;
    return result;
  }
  for (double& s : result.scores) s /= total;
  return result;
}

}  // namespace occlass
