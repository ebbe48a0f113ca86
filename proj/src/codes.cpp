#include "occlass/codes.hpp"

#include <cctype>

#include "occlass/util.hpp"

namespace occlass {

namespace {

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

[[noreturn]] void malformed(std::string_view raw, const char* why) {
  throw CodeError(CodeError::Kind::Malformed,
                  "malformed code '" + std::string(raw) + "': " + why);
}

}  // namespace

const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Ons2010: return "ons2010";
    case Scheme::Ons2020: return "ons2020";
    case Scheme::Onet2019: return "onet2019";
  }
  return "?";
}

std::optional<Scheme> scheme_from_name(std::string_view name) {
  if (name == "ons2010") return Scheme::Ons2010;
  if (name == "ons2020") return Scheme::Ons2020;
  if (name == "onet2019") return Scheme::Onet2019;
  return std::nullopt;
}

int scheme_max_level(Scheme) { return 4; }

OccupationCode parse_code(std::string_view raw, Scheme scheme) {
  std::string s = trim(raw);
  if (s.empty()) malformed(raw, "empty");
  if (s == "0") malformed(raw, "'0' is the unknown-label sentinel, not a code");

  if (scheme == Scheme::Ons2010 || scheme == Scheme::Ons2020) {
    if (s.find('-') != std::string::npos) {
      throw CodeError(CodeError::Kind::SchemeMismatch,
                      "code '" + s + "' is hyphenated but scheme is " + scheme_name(scheme));
    }
    if (!all_digits(s)) malformed(raw, "expected digits only");
    if (s.size() > 4) malformed(raw, "ONS codes have at most 4 digits");
    if (s[0] == '0') malformed(raw, "ONS codes never start with 0");
    return OccupationCode(scheme, s, static_cast<int>(s.size()));
  }

  // O*NET: strip one trailing ".<digits>" suffix ("19-3022.00" -> "19-3022")
  if (size_t dot = s.find('.'); dot != std::string::npos) {
    if (dot + 1 >= s.size() || !all_digits(std::string_view(s).substr(dot + 1))) {
      malformed(raw, "bad suffix after '.'");
    }
    s.resize(dot);
  }
  size_t hyphen = s.find('-');
  if (hyphen == std::string::npos) {
    if (!all_digits(s)) malformed(raw, "expected digits");
    if (s.size() != 2) malformed(raw, "O*NET major group is exactly 2 digits");
    return OccupationCode(scheme, s, 1);
  }
  std::string_view major = std::string_view(s).substr(0, hyphen);
  std::string_view rest = std::string_view(s).substr(hyphen + 1);
  if (major.size() != 2 || !all_digits(major)) malformed(raw, "O*NET major group is exactly 2 digits");
  if (!all_digits(rest)) malformed(raw, "expected digits after '-'");
  int level;
  switch (rest.size()) {
    case 1: level = 2; break;  // minor
    case 3: level = 3; break;  // minor + broad
    case 4: level = 4; break;  // minor + broad + detailed
    default: malformed(raw, "digits after '-' must number 1, 3 or 4");
  }
  return OccupationCode(scheme, s, level);
}

OccupationCode OccupationCode::prefix(int k) const {
  if (k < 1 || k > level_) {
    throw CodeError(CodeError::Kind::Malformed,
                    "prefix level " + std::to_string(k) + " out of range for '" + text_ + "'");
  }
  if (k == level_) return *this;
  if (scheme_ == Scheme::Onet2019) {
    // lengths: level 1 -> 2 chars, 2 -> 4 ("MM-m"), 3 -> 6, 4 -> 7
    static constexpr size_t kLen[] = {0, 2, 4, 6, 7};
    return OccupationCode(scheme_, text_.substr(0, kLen[k]), k);
  }
  return OccupationCode(scheme_, text_.substr(0, static_cast<size_t>(k)), k);
}

std::string render_code(const OccupationCode& code) { return code.text(); }

bool is_consistent_path(const std::vector<OccupationCode>& codes) {
  for (size_t i = 0; i < codes.size(); ++i) {
    if (codes[i].level() != static_cast<int>(i) + 1) return false;
    if (i > 0 && codes[i - 1].scheme() != codes[i].scheme()) return false;
    if (i > 0 && !(codes[i].prefix(codes[i - 1].level()) == codes[i - 1])) return false;
  }
  return true;
}

}  // namespace occlass
