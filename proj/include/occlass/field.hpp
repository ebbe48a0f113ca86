#pragma once

#include <optional>
#include <string_view>

namespace occlass {

enum class Field { Title, Description, Skills };

constexpr const char* field_name(Field f) {
  switch (f) {
    case Field::Title: return "title";
    case Field::Description: return "description";
    case Field::Skills: return "skills";
  }
  return "?";
}

inline std::optional<Field> field_from_name(std::string_view name) {
  if (name == "title") return Field::Title;
  if (name == "description") return Field::Description;
  if (name == "skills") return Field::Skills;
  return std::nullopt;
}

}  // namespace occlass
