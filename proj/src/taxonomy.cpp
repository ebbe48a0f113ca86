#include "occlass/taxonomy.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <tuple>

#include "occlass/util.hpp"

namespace occlass {

namespace {

std::vector<detail::TaxonomyRow> parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw TaxonomyError(TaxonomyError::Kind::Parse, "cannot open taxonomy file: " + path);
  }
  std::vector<detail::TaxonomyRow> rows;
  std::string line;
  size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!header_seen) {
      // the header line doubles as the format tag
      if (lower_ascii(t).rfind("code,", 0) != 0) {
        throw TaxonomyError(TaxonomyError::Kind::Parse,
                            "missing 'code,parent,level,title' header", lineno);
      }
      header_seen = true;
      continue;
    }
    size_t c1 = t.find(',');
    size_t c2 = c1 == std::string::npos ? std::string::npos : t.find(',', c1 + 1);
    size_t c3 = c2 == std::string::npos ? std::string::npos : t.find(',', c2 + 1);
    if (c3 == std::string::npos) {
      throw TaxonomyError(TaxonomyError::Kind::Parse, "expected 4 comma-separated fields", lineno);
    }
    std::string level_text = trim(t.substr(c2 + 1, c3 - c2 - 1));
    char* end = nullptr;
    long declared = std::strtol(level_text.c_str(), &end, 10);
    if (end == level_text.c_str() || *end != '\0' || declared < 1 || declared > 4) {
      throw TaxonomyError(TaxonomyError::Kind::Parse, "bad level '" + level_text + "'", lineno);
    }
    rows.push_back({trim(t.substr(0, c1)), trim(t.substr(c1 + 1, c2 - c1 - 1)),
                    static_cast<int>(declared), trim(t.substr(c3 + 1)), lineno});
  }
  if (!header_seen) {
    throw TaxonomyError(TaxonomyError::Kind::Parse, "empty taxonomy file: " + path);
  }
  return rows;
}

}  // namespace

Taxonomy Taxonomy::load(const std::string& path, Scheme scheme) {
  return build(parse_file(path), scheme);
}

Taxonomy Taxonomy::from_rows(
    const std::vector<std::tuple<std::string, std::string, std::string>>& rows, Scheme scheme) {
  std::vector<detail::TaxonomyRow> raw;
  raw.reserve(rows.size());
  for (const auto& [code, parent, title] : rows) raw.push_back({code, parent, -1, title, 0});
  return build(raw, scheme);
}

Taxonomy Taxonomy::build(const std::vector<detail::TaxonomyRow>& rows, Scheme scheme) {
  Taxonomy tax;
  tax.scheme_ = scheme;
  tax.nodes_.reserve(rows.size());
  for (const auto& row : rows) {
    OccupationCode code;
    try {
      code = parse_code(row.code, scheme);
    } catch (const CodeError& e) {
      throw TaxonomyError(TaxonomyError::Kind::Parse, e.what(), row.line);
    }
    if (row.declared_level > 0 && row.declared_level != code.level()) {
      throw TaxonomyError(TaxonomyError::Kind::LevelGap,
                          "declared level " + std::to_string(row.declared_level) + " for '" +
                              code.text() + "' contradicts code grammar",
                          row.line);
    }
    if (tax.by_code_.count(code.text())) {
      throw TaxonomyError(TaxonomyError::Kind::Duplicate, "duplicate code '" + code.text() + "'",
                          row.line);
    }
    TaxonomyNode node;
    node.code = code;
    node.title = row.title;
    tax.by_code_[code.text()] = static_cast<int>(tax.nodes_.size());
    tax.nodes_.push_back(std::move(node));
    tax.depth_ = std::max(tax.depth_, code.level());
  }
  // resolve parents after all nodes exist; file order is unconstrained
  for (const auto& row : rows) {
    int child_idx = tax.index_of(parse_code(row.code, scheme).text());
    TaxonomyNode& node = tax.nodes_[static_cast<size_t>(child_idx)];
    if (row.parent == "ROOT") {
      if (node.code.level() != 1) {
        throw TaxonomyError(TaxonomyError::Kind::LevelGap,
                            "'" + node.code.text() + "' claims ROOT parent but is not level 1",
                            row.line);
      }
      continue;
    }
    OccupationCode parent_code;
    try {
      parent_code = parse_code(row.parent, scheme);
    } catch (const CodeError& e) {
      throw TaxonomyError(TaxonomyError::Kind::Parse, e.what(), row.line);
    }
    auto it = tax.by_code_.find(parent_code.text());
    if (it == tax.by_code_.end()) {
      throw TaxonomyError(TaxonomyError::Kind::Orphan,
                          "'" + node.code.text() + "' has missing parent '" + parent_code.text() +
                              "'",
                          row.line);
    }
    if (parent_code.level() != node.code.level() - 1) {
      throw TaxonomyError(TaxonomyError::Kind::LevelGap,
                          "'" + node.code.text() + "' (level " + std::to_string(node.code.level()) +
                              ") under level " + std::to_string(parent_code.level()) + " parent",
                          row.line);
    }
    if (!(node.code.prefix(parent_code.level()) == parent_code)) {
      throw TaxonomyError(TaxonomyError::Kind::LevelGap,
                          "'" + node.code.text() + "' is not a child code of '" +
                              parent_code.text() + "'",
                          row.line);
    }
    node.parent = it->second;
    tax.nodes_[static_cast<size_t>(it->second)].children.push_back(child_idx);
  }
  tax.index_levels();
  tax.validate();
  return tax;
}

void Taxonomy::index_levels() {
  levels_.assign(static_cast<size_t>(depth_), {});
  for (size_t i = 0; i < nodes_.size(); ++i) {
    levels_[static_cast<size_t>(nodes_[i].code.level() - 1)].push_back(static_cast<int>(i));
  }
  auto by_text = [this](int a, int b) {
    return nodes_[static_cast<size_t>(a)].code.text() < nodes_[static_cast<size_t>(b)].code.text();
  };
  for (auto& level : levels_) std::sort(level.begin(), level.end(), by_text);
  for (auto& node : nodes_) std::sort(node.children.begin(), node.children.end(), by_text);

  std::vector<std::unordered_map<int, int>> pos(static_cast<size_t>(depth_));
  for (int lv = 1; lv <= depth_; ++lv) {
    const auto& idx = levels_[static_cast<size_t>(lv - 1)];
    for (size_t p = 0; p < idx.size(); ++p) {
      pos[static_cast<size_t>(lv - 1)][idx[p]] = static_cast<int>(p);
    }
  }
  const auto& leaves = levels_.back();
  leaf_ancestors_.assign(leaves.size(), std::vector<int>(static_cast<size_t>(depth_), -1));
  for (size_t lp = 0; lp < leaves.size(); ++lp) {
    int cur = leaves[lp];
    while (cur >= 0) {
      int lv = nodes_[static_cast<size_t>(cur)].code.level();
      leaf_ancestors_[lp][static_cast<size_t>(lv - 1)] = pos[static_cast<size_t>(lv - 1)].at(cur);
      cur = nodes_[static_cast<size_t>(cur)].parent;
    }
  }
}

void Taxonomy::validate() const {
  if (nodes_.empty()) {
    throw TaxonomyError(TaxonomyError::Kind::Parse, "taxonomy has no nodes");
  }
  for (int lv = 1; lv <= depth_; ++lv) {
    if (levels_[static_cast<size_t>(lv - 1)].empty()) {
      throw TaxonomyError(TaxonomyError::Kind::LevelGap, "no nodes at level " + std::to_string(lv));
    }
  }
  for (const auto& node : nodes_) {
    if (node.code.level() < depth_ && node.children.empty()) {
      throw TaxonomyError(TaxonomyError::Kind::Incomplete,
                          "'" + node.code.text() + "' at level " +
                              std::to_string(node.code.level()) + " has no children (depth " +
                              std::to_string(depth_) + ")");
    }
  }
}

bool Taxonomy::contains(std::string_view code_text) const {
  return by_code_.count(std::string(code_text)) > 0;
}

int Taxonomy::index_of(std::string_view code_text) const {
  auto it = by_code_.find(std::string(code_text));
  return it == by_code_.end() ? -1 : it->second;
}

const std::vector<int>& Taxonomy::level_nodes(int level) const {
  if (level < 1 || level > depth_) {
    throw TaxonomyError(TaxonomyError::Kind::LevelGap,
                        "level " + std::to_string(level) + " out of range (depth " +
                            std::to_string(depth_) + ")");
  }
  return levels_[static_cast<size_t>(level - 1)];
}

std::vector<OccupationCode> Taxonomy::ancestors(const OccupationCode& code) const {
  int idx = index_of(code.text());
  if (idx < 0) {
    throw TaxonomyError(TaxonomyError::Kind::UnknownCode,
                        "code '" + code.text() + "' not in taxonomy");
  }
  std::vector<OccupationCode> chain;
  while (idx >= 0) {
    chain.push_back(nodes_[static_cast<size_t>(idx)].code);
    idx = nodes_[static_cast<size_t>(idx)].parent;
  }
  std::reverse(chain.begin(), chain.end());
  return chain;
}

int Taxonomy::level_position(std::string_view code_text, int level) const {
  const auto& lv = level_nodes(level);
  auto it = std::lower_bound(lv.begin(), lv.end(), code_text, [this](int a, std::string_view t) {
    return nodes_[static_cast<size_t>(a)].code.text() < t;
  });
  if (it == lv.end() || nodes_[static_cast<size_t>(*it)].code.text() != code_text) return -1;
  return static_cast<int>(it - lv.begin());
}

}  // namespace occlass
