#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "persuade/labels.hpp"

namespace persuade {

struct PredictionRow {
  std::string id;
  Label label = Label::False;

  friend bool operator==(const PredictionRow&, const PredictionRow&) = default;
};

inline constexpr const char* kPredictionHeader = "id\tlabel";

/// UTF-8, tab separated, header "id\tlabel", one "\n"-terminated row each.
void write_predictions(std::ostream& out, const std::vector<PredictionRow>& rows);
void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRow>& rows);

/// Throws ValidationError on a bad header, malformed row or duplicate id.
std::vector<PredictionRow> read_predictions(const std::filesystem::path& path);

}  // namespace persuade
