#include "persuade/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "persuade/errors.hpp"
#include "persuade/rng.hpp"
#include "persuade/text.hpp"

namespace persuade {
namespace {

std::string_view strip_line_ending(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

Snippet parse_record(std::string_view line, bool require_labels, std::string_view source,
                     std::size_t line_no) {
  auto fail = [&](const std::string& what) {
    return ValidationError(fmt::format("{}:{}: {}", source, line_no, what));
  };
  if (line.empty()) throw fail("malformed record: empty line");
  if (line.front() == '#') throw fail("malformed record: comment lines are not supported");

  nlohmann::json record;
  try {
    record = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw fail(fmt::format("malformed record: {}", e.what()));
  }
  if (!record.is_object()) throw fail("malformed record: expected a JSON object");

  Snippet snippet;
  const auto id = record.find("id");
  if (id == record.end() || !id->is_string()) throw fail("malformed record: \"id\" must be a string");
  snippet.id = id->get<std::string>();
  if (snippet.id.empty()) throw fail("malformed record: empty id");

  const auto text = record.find("text");
  if (text == record.end() || !text->is_string()) throw fail("malformed record: \"text\" must be a string");
  try {
    snippet.text = text::trim(text::nfc(text->get<std::string>()));
  } catch (const ValidationError& e) {
    throw fail(e.what());
  }
  if (snippet.text.empty()) throw fail(fmt::format("empty text for id \"{}\"", snippet.id));

  if (const auto label = record.find("label"); label != record.end()) {
    if (!label->is_string()) throw fail("malformed record: \"label\" must be the string \"true\" or \"false\"");
    snippet.label = parse_label(label->get<std::string>());
    if (!snippet.label) {
      throw fail(fmt::format("invalid label \"{}\" (expected \"true\" or \"false\")", label->get<std::string>()));
    }
  }
  if (require_labels && !snippet.label) throw fail(fmt::format("missing label for id \"{}\"", snippet.id));

  if (const auto genre = record.find("type"); genre != record.end()) {
    if (!genre->is_string()) throw fail("malformed record: \"type\" must be a string");
    snippet.genre = genre->get<std::string>();
  }
  return snippet;
}

}  // namespace

LabeledCorpus::LabeledCorpus(std::vector<Snippet> snippets) : snippets_(std::move(snippets)) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(snippets_.size());
  for (const Snippet& s : snippets_) {
    if (s.id.empty()) throw ValidationError("snippet with empty id");
    if (!seen.insert(s.id).second) throw ValidationError(fmt::format("duplicate id \"{}\"", s.id));
    if (text::trim(s.text).empty()) throw ValidationError(fmt::format("empty text for id \"{}\"", s.id));
    if (s.label == Label::True) ++counts_.n_true;
    if (s.label == Label::False) ++counts_.n_false;
  }
}

std::vector<std::string> LabeledCorpus::texts() const {
  std::vector<std::string> out;
  out.reserve(snippets_.size());
  for (const Snippet& s : snippets_) out.push_back(s.text);
  return out;
}

std::vector<int> LabeledCorpus::label_indices() const {
  std::vector<int> out;
  out.reserve(snippets_.size());
  for (const Snippet& s : snippets_) {
    if (!s.label) throw ValidationError(fmt::format("snippet \"{}\" has no label", s.id));
    out.push_back(label_index(*s.label));
  }
  return out;
}

LabeledCorpus parse_corpus(std::istream& in, bool require_labels, std::string_view source_name) {
  std::vector<Snippet> snippets;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = strip_line_ending(line);
    if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
    Snippet snippet = parse_record(view, require_labels, source_name, line_no);
    if (!seen.insert(snippet.id).second) {
      throw ValidationError(fmt::format("{}:{}: duplicate id \"{}\"", source_name, line_no, snippet.id));
    }
    snippets.push_back(std::move(snippet));
  }
  if (in.bad()) throw RuntimeFailure(fmt::format("{}: read error", source_name));
  return LabeledCorpus(std::move(snippets));
}

LabeledCorpus load_corpus(const std::filesystem::path& path, bool require_labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open corpus file '{}'", path.string()));
  return parse_corpus(in, require_labels, path.string());
}

void write_corpus(std::ostream& out, const LabeledCorpus& corpus) {
  for (const Snippet& s : corpus) {
    nlohmann::ordered_json record;
    record["id"] = s.id;
    record["text"] = s.text;
    if (s.label) record["label"] = std::string(to_string(*s.label));
    if (s.genre) record["type"] = *s.genre;
    out << record.dump() << '\n';
  }
}

void write_corpus(const std::filesystem::path& path, const LabeledCorpus& corpus) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure(fmt::format("cannot write corpus file '{}'", path.string()));
  write_corpus(out, corpus);
  if (!out.flush()) throw RuntimeFailure(fmt::format("write failed for '{}'", path.string()));
}

CorpusSplit stratified_split(const LabeledCorpus& corpus, double dev_fraction, std::uint64_t seed) {
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) {
    throw ValidationError(fmt::format("dev_fraction must lie in (0, 1), got {}", dev_fraction));
  }
  if (!corpus.fully_labeled()) throw ValidationError("stratified_split needs a fully labeled corpus");

  std::vector<bool> in_dev(corpus.size(), false);
  Rng rng(seed);
  for (const Label label : kAllLabels) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (corpus[i].label == label) members.push_back(i);
    }
    if (members.size() < 2) {
      throw ValidationError(fmt::format("class \"{}\" has {} member(s); stratified split needs at least 2",
                                        to_string(label), members.size()));
    }
    // The small offset keeps products such as 0.29 * 100 from flooring to 28.
    auto take = static_cast<std::size_t>(std::floor(static_cast<double>(members.size()) * dev_fraction + 1e-9));
    take = std::clamp<std::size_t>(take, 1, members.size() - 1);
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t k = 0; k < take; ++k) in_dev[members[k]] = true;
  }

  std::vector<Snippet> train, dev;
  for (std::size_t i = 0; i < corpus.size(); ++i) (in_dev[i] ? dev : train).push_back(corpus[i]);
  return {LabeledCorpus(std::move(train)), LabeledCorpus(std::move(dev))};
}

ClassWeights class_weights(const LabelCounts& counts) {
  if (counts.n_true == 0 || counts.n_false == 0) {
    throw ValidationError(fmt::format("class weights need both classes present (true: {}, false: {})",
                                      counts.n_true, counts.n_false));
  }
  const double total = static_cast<double>(counts.total());
  return {.weight_true = total / (2.0 * static_cast<double>(counts.n_true)),
          .weight_false = total / (2.0 * static_cast<double>(counts.n_false))};
}

ClassWeights class_weights(const LabeledCorpus& corpus) { return class_weights(corpus.counts()); }

LabelDistribution label_distribution(const LabeledCorpus& corpus) {
  LabelDistribution dist;
  dist.counts = corpus.counts();
  const std::size_t total = dist.counts.total();
  if (total == 0) return dist;
  dist.defined = true;
  dist.fraction_true = static_cast<double>(dist.counts.n_true) / static_cast<double>(total);
  dist.fraction_false = static_cast<double>(dist.counts.n_false) / static_cast<double>(total);
  return dist;
}

}  // namespace persuade
