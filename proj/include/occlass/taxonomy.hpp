#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "occlass/codes.hpp"

namespace occlass {

namespace detail {
struct TaxonomyRow {
  std::string code;
  std::string parent;  // code text or "ROOT"
  int declared_level;  // -1 when not provided
  std::string title;
  size_t line;         // 0 when not from a file
};
}  // namespace detail

class TaxonomyError : public std::runtime_error {
 public:
  enum class Kind { Parse, Orphan, LevelGap, Duplicate, Incomplete, UnknownCode };
  TaxonomyError(Kind kind, const std::string& what, size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
        kind(kind),
        line(line) {}
  Kind kind;
  size_t line;
};

struct TaxonomyNode {
  OccupationCode code;
  std::string title;
  int parent = -1;               // node index, -1 for level-1 nodes
  std::vector<int> children;     // node indices, sorted by code text
};

// Rooted occupation tree. Depth comes from the file (max level present,
// bounded by the scheme grammar); leaves are exactly the bottom-level nodes
// and every non-leaf has at least one child. Level indexes are sorted by
// code text and duplicate-free, which fixes class ordering everywhere.
class Taxonomy {
 public:
  // File format, one node per line after a mandatory header:
  //   code,parent_code_or_ROOT,level,title
  // '#' starts a comment line. UTF-8. Titles may contain commas; everything
  // after the third comma is title text.
  static Taxonomy load(const std::string& path, Scheme scheme);

  // Programmatic construction from (code text, parent text or "ROOT", title).
  static Taxonomy from_rows(
      const std::vector<std::tuple<std::string, std::string, std::string>>& rows, Scheme scheme);

  Scheme scheme() const { return scheme_; }
  int depth() const { return depth_; }
  size_t size() const { return nodes_.size(); }

  bool contains(std::string_view code_text) const;
  const TaxonomyNode& node(int index) const { return nodes_[static_cast<size_t>(index)]; }
  int index_of(std::string_view code_text) const;  // -1 if absent

  // Node indices at a level (1-based), sorted by code text.
  const std::vector<int>& level_nodes(int level) const;
  size_t level_count(int level) const { return level_nodes(level).size(); }

  // Chain of codes from level 1 down to the given code, inclusive.
  // Throws UnknownCode if the code is not a node of this taxonomy.
  std::vector<OccupationCode> ancestors(const OccupationCode& code) const;

  // Position of a node within its level index, -1 if absent at that level.
  int level_position(std::string_view code_text, int level) const;

  // For the leaf at position `leaf_pos` in level_nodes(depth()), the position
  // of its level-k ancestor within level_nodes(k). Precomputed.
  int leaf_ancestor_position(size_t leaf_pos, int level) const {
    return leaf_ancestors_[leaf_pos][static_cast<size_t>(level - 1)];
  }

  const std::vector<int>& leaves() const { return level_nodes(depth_); }

 private:
  static Taxonomy build(const std::vector<detail::TaxonomyRow>& rows, Scheme scheme);
  void index_levels();
  void validate() const;

  Scheme scheme_ = Scheme::Ons2010;
  int depth_ = 0;
  std::vector<TaxonomyNode> nodes_;
  std::unordered_map<std::string, int> by_code_;
  std::vector<std::vector<int>> levels_;              // [level-1] -> node indices
  std::vector<std::vector<int>> leaf_ancestors_;      // [leaf_pos][level-1] -> level position
};

}  // namespace occlass
