#include "persuade/predictions.hpp"

#include <fstream>
#include <ostream>
#include <unordered_set>

#include <fmt/format.h>

#include "persuade/errors.hpp"

namespace persuade {

void write_predictions(std::ostream& out, const std::vector<PredictionRow>& rows) {
  out << kPredictionHeader << '\n';
  for (const PredictionRow& row : rows) out << row.id << '\t' << to_string(row.label) << '\n';
}

void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure(fmt::format("cannot write prediction file '{}'", path.string()));
  write_predictions(out, rows);
  if (!out.flush()) throw RuntimeFailure(fmt::format("write failed for '{}'", path.string()));
}

std::vector<PredictionRow> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open prediction file '{}'", path.string()));
  const auto fail = [&](std::size_t line_no, const std::string& what) {
    return ValidationError(fmt::format("{}:{}: {}", path.string(), line_no, what));
  };
  std::string line;
  std::size_t line_no = 0;
  std::vector<PredictionRow> rows;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != kPredictionHeader) throw fail(line_no, "expected header \"id<TAB>label\"");
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw fail(line_no, "expected exactly two tab-separated fields");
    }
    PredictionRow row{line.substr(0, tab)};
    if (row.id.empty()) throw fail(line_no, "empty id");
    const auto label = parse_label(std::string_view(line).substr(tab + 1));
    if (!label) throw fail(line_no, fmt::format("invalid label \"{}\"", line.substr(tab + 1)));
    row.label = *label;
    if (!seen.insert(row.id).second) throw fail(line_no, fmt::format("duplicate id \"{}\"", row.id));
    rows.push_back(std::move(row));
  }
  if (line_no == 0) throw ValidationError(fmt::format("{}: empty file (missing header)", path.string()));
  return rows;
}

}  // namespace persuade
