#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace occlass {

enum class Scheme { Ons2010, Ons2020, Onet2019 };

const char* scheme_name(Scheme s);                    // "ons2010" | "ons2020" | "onet2019"
std::optional<Scheme> scheme_from_name(std::string_view name);

class CodeError : public std::runtime_error {
 public:
  enum class Kind { Malformed, SchemeMismatch };
  CodeError(Kind kind, const std::string& what) : std::runtime_error(what), kind(kind) {}
  Kind kind;
};

// A validated taxonomy code. Level is implied by the canonical text:
//   ONS:    level-L code is exactly L digits ("5", "52", "523", "5235")
//   O*NET:  "19" / "19-3" / "19-302" / "19-3022" (major 2 digits, then
//           minor 1, broad 2, detailed 1 after the hyphen)
// The sentinel "0" (unknown label) is never a valid code.
class OccupationCode {
 public:
  OccupationCode() = default;

  Scheme scheme() const { return scheme_; }
  const std::string& text() const { return text_; }
  int level() const { return level_; }

  // Ancestor code at 1 <= k <= level(), by prefix decomposition.
  OccupationCode prefix(int k) const;

  bool operator==(const OccupationCode& o) const {
    return scheme_ == o.scheme_ && text_ == o.text_;
  }
  bool operator<(const OccupationCode& o) const { return text_ < o.text_; }

 private:
  friend OccupationCode parse_code(std::string_view, Scheme);
  OccupationCode(Scheme scheme, std::string text, int level)
      : scheme_(scheme), text_(std::move(text)), level_(level) {}

  Scheme scheme_ = Scheme::Ons2010;
  std::string text_;
  int level_ = 0;
};

// Canonicalizes raw input: trims whitespace and, for O*NET, drops a trailing
// ".00"-style suffix. Throws CodeError on malformed or wrong-scheme input.
OccupationCode parse_code(std::string_view raw, Scheme scheme);

// Canonical display form; parse_code(render_code(c), c.scheme()) == c.
std::string render_code(const OccupationCode& code);

// Maximum level the scheme grammar can express (4 for all supported schemes).
int scheme_max_level(Scheme s);

// True iff codes[0..n) are levels 1..n of one chain, i.e. each code is the
// prefix-parent of the next. All codes must share a scheme.
bool is_consistent_path(const std::vector<OccupationCode>& codes);

}  // namespace occlass
