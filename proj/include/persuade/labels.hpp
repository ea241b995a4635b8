#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace persuade {

/// Binary label. The integer values are the class indices used by the
/// classifier head and by every saved checkpoint.
enum class Label : int { False = 0, True = 1 };

inline constexpr int kNumClasses = 2;
inline constexpr std::array<Label, 2> kAllLabels{Label::False, Label::True};

constexpr int label_index(Label label) { return static_cast<int>(label); }

constexpr Label label_from_index(int index) {
  return index == 1 ? Label::True : Label::False;
}

constexpr std::string_view to_string(Label label) {
  return label == Label::True ? "true" : "false";
}

/// Parses the lowercase textual form; anything else yields nullopt.
constexpr std::optional<Label> parse_label(std::string_view text) {
  if (text == "true") return Label::True;
  if (text == "false") return Label::False;
  return std::nullopt;
}

constexpr Label other(Label label) {
  return label == Label::True ? Label::False : Label::True;
}

}  // namespace persuade
