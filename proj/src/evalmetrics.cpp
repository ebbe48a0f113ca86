#include "occlass/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "occlass/hierarchy.hpp"
#include "occlass/util.hpp"

namespace occlass {

namespace {

void check_aligned(size_t preds, size_t golds) {
  if (preds != golds) {
    throw EvalError(EvalError::Kind::Misaligned,
                    std::to_string(preds) + " predictions against " + std::to_string(golds) +
                        " gold labels");
  }
}

void check_in_range(std::span<const size_t> xs, size_t n_classes, const char* what) {
  for (size_t x : xs) {
    if (x >= n_classes) {
      throw EvalError(EvalError::Kind::Misaligned,
                      std::string(what) + " index " + std::to_string(x) + " outside " +
                          std::to_string(n_classes) + " classes");
    }
  }
}

}  // namespace

double macro_f1(std::span<const size_t> preds, std::span<const size_t> golds, size_t n_classes,
                MacroAveraging averaging) {
  check_aligned(preds.size(), golds.size());
  if (golds.empty()) {
    throw EvalError(EvalError::Kind::EmptyEvaluation, "macro-F1 over zero samples");
  }
  if (n_classes == 0) {
    throw EvalError(EvalError::Kind::Misaligned, "macro-F1 over zero classes");
  }
  check_in_range(preds, n_classes, "prediction");
  check_in_range(golds, n_classes, "gold");

  std::vector<size_t> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0), support(n_classes, 0);
  for (size_t i = 0; i < preds.size(); ++i) {
    ++support[golds[i]];
    if (preds[i] == golds[i]) {
      ++tp[golds[i]];
    } else {
      ++fp[preds[i]];
      ++fn[golds[i]];
    }
  }

  double sum = 0.0;
  size_t counted = 0;
  for (size_t c = 0; c < n_classes; ++c) {
    if (averaging == MacroAveraging::PresentOnly && support[c] == 0) continue;
    double p = tp[c] + fp[c] ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c]) : 0.0;
    double r = tp[c] + fn[c] ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fn[c]) : 0.0;
    sum += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    ++counted;
  }
  return sum / static_cast<double>(counted);
}

double topk_accuracy(std::span<const std::vector<double>> scores, std::span<const size_t> golds,
                     size_t k, std::ostream* warn) {
  check_aligned(scores.size(), golds.size());
  if (golds.empty()) {
    throw EvalError(EvalError::Kind::EmptyEvaluation, "top-k accuracy over zero samples");
  }
  if (k == 0) {
    throw EvalError(EvalError::Kind::Misaligned, "top-k needs k >= 1");
  }
  size_t n_classes = scores.front().size();
  if (n_classes == 0) {
    throw EvalError(EvalError::Kind::Misaligned, "top-k over zero classes");
  }
  check_in_range(golds, n_classes, "gold");
  if (k > n_classes) {
    if (warn) {
      *warn << "top-" << k << " capped at the class count " << n_classes << "\n";
    }
    k = n_classes;
  }

  size_t hits = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const std::vector<double>& s = scores[i];
    if (s.size() != n_classes) {
      throw EvalError(EvalError::Kind::Misaligned, "score vectors have inconsistent widths");
    }
    size_t g = golds[i];
    // Rank of the gold class under "higher score first, smaller position
    // breaks ties".
    size_t ahead = 0;
    for (size_t j = 0; j < n_classes; ++j) {
      if (s[j] > s[g] || (s[j] == s[g] && j < g)) ++ahead;
    }
    if (ahead < k) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(golds.size());
}

HierPrf hierarchical_prf(const std::string& pred_code, const std::string& gold_code,
                         const Taxonomy& taxonomy) {
  auto pred_chain = taxonomy.ancestors(parse_code(pred_code, taxonomy.scheme()));
  auto gold_chain = taxonomy.ancestors(parse_code(gold_code, taxonomy.scheme()));
  size_t shared = 0;
  while (shared < pred_chain.size() && shared < gold_chain.size() &&
         pred_chain[shared].text() == gold_chain[shared].text()) {
    ++shared;
  }
  HierPrf out;
  out.precision = static_cast<double>(shared) / static_cast<double>(pred_chain.size());
  out.recall = static_cast<double>(shared) / static_cast<double>(gold_chain.size());
  out.f1 = out.precision + out.recall > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

HierAggregate hierarchical_prf_corpus(std::span<const std::string> preds,
                                      std::span<const std::string> golds,
                                      const Taxonomy& taxonomy) {
  check_aligned(preds.size(), golds.size());
  if (golds.empty()) {
    throw EvalError(EvalError::Kind::EmptyEvaluation, "hierarchical metrics over zero samples");
  }
  double inter_sum = 0.0, pred_sum = 0.0, gold_sum = 0.0;
  double p_acc = 0.0, r_acc = 0.0, f_acc = 0.0;
  for (size_t i = 0; i < preds.size(); ++i) {
    auto pred_chain = taxonomy.ancestors(parse_code(preds[i], taxonomy.scheme()));
    auto gold_chain = taxonomy.ancestors(parse_code(golds[i], taxonomy.scheme()));
    size_t shared = 0;
    while (shared < pred_chain.size() && shared < gold_chain.size() &&
           pred_chain[shared].text() == gold_chain[shared].text()) {
      ++shared;
    }
    inter_sum += static_cast<double>(shared);
    pred_sum += static_cast<double>(pred_chain.size());
    gold_sum += static_cast<double>(gold_chain.size());
    double p = static_cast<double>(shared) / static_cast<double>(pred_chain.size());
    double r = static_cast<double>(shared) / static_cast<double>(gold_chain.size());
    p_acc += p;
    r_acc += r;
    f_acc += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }

  HierAggregate out;
  out.samples = golds.size();
  out.micro.precision = inter_sum / pred_sum;
  out.micro.recall = inter_sum / gold_sum;
  out.micro.f1 = out.micro.precision + out.micro.recall > 0.0
                     ? 2.0 * out.micro.precision * out.micro.recall /
                           (out.micro.precision + out.micro.recall)
                     : 0.0;
  double n = static_cast<double>(golds.size());
  out.mean.precision = p_acc / n;
  out.mean.recall = r_acc / n;
  out.mean.f1 = f_acc / n;
  return out;
}

std::vector<SupportError> error_vs_support(std::span<const size_t> preds,
                                           std::span<const size_t> golds, size_t n_classes) {
  check_aligned(preds.size(), golds.size());
  check_in_range(preds, n_classes, "prediction");
  check_in_range(golds, n_classes, "gold");

  std::vector<size_t> support(n_classes, 0), correct(n_classes, 0);
  for (size_t i = 0; i < golds.size(); ++i) {
    ++support[golds[i]];
    if (preds[i] == golds[i]) ++correct[golds[i]];
  }

  std::vector<SupportError> table;
  for (size_t c = 0; c < n_classes; ++c) {
    if (support[c] == 0) continue;  // nothing to measure
    SupportError row;
    row.class_index = c;
    row.support = support[c];
    row.error_rate =
        1.0 - static_cast<double>(correct[c]) / static_cast<double>(support[c]);
    table.push_back(row);
  }
  std::sort(table.begin(), table.end(), [](const SupportError& a, const SupportError& b) {
    return a.support != b.support ? a.support < b.support : a.class_index < b.class_index;
  });
  return table;
}

size_t ConfusionMatrix::trace() const {
  size_t t = 0;
  for (size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
  return t;
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream out;
  out << "true\\pred";
  for (const std::string& l : labels) out << ',' << l;
  out << '\n';
  for (size_t i = 0; i < counts.size(); ++i) {
    out << labels[i];
    for (size_t j = 0; j < counts[i].size(); ++j) out << ',' << counts[i][j];
    out << '\n';
  }
  return out.str();
}

ConfusionMatrix confusion(const Taxonomy& taxonomy, std::span<const size_t> pred_leaves,
                          std::span<const size_t> gold_leaves, int level) {
  check_aligned(pred_leaves.size(), gold_leaves.size());
  if (level < 1 || level > taxonomy.depth()) {
    throw EvalError(EvalError::Kind::Misaligned,
                    "confusion level " + std::to_string(level) + " outside taxonomy depth");
  }
  size_t n_leaves = taxonomy.level_count(taxonomy.depth());
  check_in_range(pred_leaves, n_leaves, "prediction");
  check_in_range(gold_leaves, n_leaves, "gold");

  ConfusionMatrix m;
  m.level = level;
  size_t n = taxonomy.level_count(level);
  for (int idx : taxonomy.level_nodes(level)) m.labels.push_back(taxonomy.node(idx).code.text());
  m.counts.assign(n, std::vector<size_t>(n, 0));
  m.total = gold_leaves.size();
  for (size_t i = 0; i < gold_leaves.size(); ++i) {
    size_t t = static_cast<size_t>(taxonomy.leaf_ancestor_position(gold_leaves[i], level));
    size_t p = static_cast<size_t>(taxonomy.leaf_ancestor_position(pred_leaves[i], level));
    ++m.counts[t][p];
  }
  return m;
}

ConfusionMatrix confusion_at_level(const Taxonomy& taxonomy, int level,
                                   std::span<const size_t> pred_positions,
                                   std::span<const size_t> gold_positions) {
  check_aligned(pred_positions.size(), gold_positions.size());
  if (level < 1 || level > taxonomy.depth()) {
    throw EvalError(EvalError::Kind::Misaligned,
                    "confusion level " + std::to_string(level) + " outside taxonomy depth");
  }
  size_t n = taxonomy.level_count(level);
  check_in_range(pred_positions, n, "prediction");
  check_in_range(gold_positions, n, "gold");

  ConfusionMatrix m;
  m.level = level;
  for (int idx : taxonomy.level_nodes(level)) m.labels.push_back(taxonomy.node(idx).code.text());
  m.counts.assign(n, std::vector<size_t>(n, 0));
  m.total = gold_positions.size();
  for (size_t i = 0; i < gold_positions.size(); ++i) {
    ++m.counts[gold_positions[i]][pred_positions[i]];
  }
  return m;
}

std::vector<double> level_scores_from_leaves(const Taxonomy& taxonomy,
                                             std::span<const double> leaf_scores, int level) {
  size_t n_leaves = taxonomy.level_count(taxonomy.depth());
  if (leaf_scores.size() != n_leaves) {
    throw EvalError(EvalError::Kind::Misaligned,
                    "leaf score vector does not match the taxonomy leaf count");
  }
  if (level < 1 || level > taxonomy.depth()) {
    throw EvalError(EvalError::Kind::Misaligned,
                    "level " + std::to_string(level) + " outside taxonomy depth");
  }
  std::vector<double> out(taxonomy.level_count(level), 0.0);
  std::vector<bool> seen(out.size(), false);
  for (size_t leaf = 0; leaf < n_leaves; ++leaf) {
    size_t pos = static_cast<size_t>(taxonomy.leaf_ancestor_position(leaf, level));
    if (!seen[pos] || leaf_scores[leaf] > out[pos]) {
      out[pos] = leaf_scores[leaf];
      seen[pos] = true;
    }
  }
  return out;
}

EvalReport evaluate(const Taxonomy& taxonomy, std::span<const std::vector<double>> leaf_scores,
                    std::span<const size_t> gold_leaves, std::ostream* warn) {
  check_aligned(leaf_scores.size(), gold_leaves.size());
  if (gold_leaves.empty()) {
    throw EvalError(EvalError::Kind::EmptyEvaluation, "evaluation over zero samples");
  }
  size_t n_leaves = taxonomy.level_count(taxonomy.depth());
  check_in_range(gold_leaves, n_leaves, "gold");
  for (const auto& s : leaf_scores) {
    if (s.size() != n_leaves) {
      throw EvalError(EvalError::Kind::Misaligned,
                      "leaf score vector does not match the taxonomy leaf count");
    }
  }

  EvalReport report;
  report.samples = gold_leaves.size();

  std::vector<size_t> pred_leaves(gold_leaves.size());
  for (size_t i = 0; i < leaf_scores.size(); ++i) {
    pred_leaves[i] = argmax_position(leaf_scores[i]);
  }

  for (int level = 1; level <= taxonomy.depth(); ++level) {
    size_t n = taxonomy.level_count(level);
    std::vector<std::vector<double>> scores(leaf_scores.size());
    std::vector<size_t> preds(leaf_scores.size()), golds(leaf_scores.size());
    for (size_t i = 0; i < leaf_scores.size(); ++i) {
      scores[i] = level_scores_from_leaves(taxonomy, leaf_scores[i], level);
      preds[i] = static_cast<size_t>(taxonomy.leaf_ancestor_position(pred_leaves[i], level));
      golds[i] = static_cast<size_t>(taxonomy.leaf_ancestor_position(gold_leaves[i], level));
    }
    LevelMetrics lm;
    lm.level = level;
    lm.macro_f1 = macro_f1(preds, golds, n);
    lm.top1 = topk_accuracy(scores, golds, 1);
    lm.top5 = topk_accuracy(scores, golds, std::min<size_t>(5, n), warn);
    lm.top10 = topk_accuracy(scores, golds, std::min<size_t>(10, n), warn);
    lm.matrix = confusion(taxonomy, pred_leaves, gold_leaves, level);
    report.levels.push_back(std::move(lm));
  }

  const auto& leaves = taxonomy.leaves();
  std::vector<std::string> pred_codes(pred_leaves.size()), gold_codes(gold_leaves.size());
  for (size_t i = 0; i < pred_leaves.size(); ++i) {
    pred_codes[i] = taxonomy.node(leaves[pred_leaves[i]]).code.text();
    gold_codes[i] = taxonomy.node(leaves[gold_leaves[i]]).code.text();
  }
  report.hierarchy = hierarchical_prf_corpus(pred_codes, gold_codes, taxonomy);
  report.support_table = error_vs_support(pred_leaves, gold_leaves, n_leaves);
  return report;
}

std::string EvalReport::summary_json() const {
  nlohmann::json root;
  root["samples"] = samples;
  root["levels"] = nlohmann::json::array();
  for (const LevelMetrics& lm : levels) {
    nlohmann::json jl;
    jl["level"] = lm.level;
    jl["macro_f1"] = lm.macro_f1;
    jl["top1"] = lm.top1;
    jl["top5"] = lm.top5;
    jl["top10"] = lm.top10;
    jl["accuracy"] = 100.0 * static_cast<double>(lm.matrix.trace()) /
                     static_cast<double>(lm.matrix.total);
    root["levels"].push_back(std::move(jl));
  }
  root["hierarchical"] = {
      {"micro",
       {{"precision", hierarchy.micro.precision},
        {"recall", hierarchy.micro.recall},
        {"f1", hierarchy.micro.f1}}},
      {"mean",
       {{"precision", hierarchy.mean.precision},
        {"recall", hierarchy.mean.recall},
        {"f1", hierarchy.mean.f1}}},
  };
  return root.dump(2) + "\n";
}

std::string EvalReport::render_text() const {
  std::ostringstream out;
  out << "samples: " << samples << "\n\n";
  out << "level  macro_f1  top1%   top5%   top10%\n";
  char line[128];
  for (const LevelMetrics& lm : levels) {
    std::snprintf(line, sizeof(line), "%5d  %8.4f  %6.2f  %6.2f  %6.2f\n", lm.level, lm.macro_f1,
                  lm.top1, lm.top5, lm.top10);
    out << line;
  }
  std::snprintf(line, sizeof(line),
                "\nhierarchical micro  hP=%.4f hR=%.4f hF=%.4f\n"
                "hierarchical mean   hP=%.4f hR=%.4f hF=%.4f\n",
                hierarchy.micro.precision, hierarchy.micro.recall, hierarchy.micro.f1,
                hierarchy.mean.precision, hierarchy.mean.recall, hierarchy.mean.f1);
  out << line;
  if (!support_table.empty()) {
    out << "\nleaf_class_position  support  error_rate\n";
    for (const SupportError& row : support_table) {
      std::snprintf(line, sizeof(line), "%19zu  %7zu  %10.4f\n", row.class_index, row.support,
                    row.error_rate);
      out << line;
    }
  }
  return out.str();
}

}  // namespace occlass
