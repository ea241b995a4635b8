#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "persuade/labels.hpp"

namespace persuade {

/// One classification unit: a tweet or a news paragraph.
struct Snippet {
  std::string id;
  std::string text;
  std::optional<Label> label;
  /// Free-form genre tag ("tweet", "news", ...); informational only.
  std::optional<std::string> genre;

  friend bool operator==(const Snippet&, const Snippet&) = default;
};

struct LabelCounts {
  std::size_t n_true = 0;
  std::size_t n_false = 0;

  std::size_t total() const { return n_true + n_false; }
  std::size_t of(Label label) const { return label == Label::True ? n_true : n_false; }

  friend bool operator==(const LabelCounts&, const LabelCounts&) = default;
};

/// Immutable ordered collection of snippets. Construction validates the
/// snippet invariants (non-empty unique ids, non-blank text).
class LabeledCorpus {
 public:
  LabeledCorpus() = default;
  explicit LabeledCorpus(std::vector<Snippet> snippets);

  const std::vector<Snippet>& snippets() const { return snippets_; }
  const LabelCounts& counts() const { return counts_; }
  std::size_t size() const { return snippets_.size(); }
  bool empty() const { return snippets_.empty(); }
  bool fully_labeled() const { return counts_.total() == snippets_.size(); }

  const Snippet& operator[](std::size_t i) const { return snippets_[i]; }
  auto begin() const { return snippets_.begin(); }
  auto end() const { return snippets_.end(); }

  std::vector<std::string> texts() const;
  /// Class indices of every snippet; throws ValidationError if any is unlabeled.
  std::vector<int> label_indices() const;

  friend bool operator==(const LabeledCorpus& a, const LabeledCorpus& b) {
    return a.snippets_ == b.snippets_;
  }

 private:
  std::vector<Snippet> snippets_;
  LabelCounts counts_;
};

/// Per-class loss multipliers, indexed through the fixed label encoding.
struct ClassWeights {
  double weight_true = 1.0;
  double weight_false = 1.0;

  double of(Label label) const { return label == Label::True ? weight_true : weight_false; }
  double of_index(int index) const { return of(label_from_index(index)); }

  static ClassWeights unit() { return {}; }
};

struct LabelDistribution {
  LabelCounts counts;
  double fraction_true = 0.0;
  double fraction_false = 0.0;
  /// False when the corpus holds no labeled snippet; fractions are then 0.
  bool defined = false;
};

struct CorpusSplit {
  LabeledCorpus train;
  LabeledCorpus dev;
};

/// Reads the canonical JSON-lines corpus format. Texts are NFC-normalized
/// and trimmed. Errors carry "<source>:<line>:" prefixes.
LabeledCorpus load_corpus(const std::filesystem::path& path, bool require_labels);
LabeledCorpus parse_corpus(std::istream& in, bool require_labels,
                           std::string_view source_name = "<input>");

void write_corpus(const std::filesystem::path& path, const LabeledCorpus& corpus);
void write_corpus(std::ostream& out, const LabeledCorpus& corpus);

/// Per class, floor(n_c * dev_fraction) snippets (at least one) go to dev.
/// Both outputs keep the source order.
CorpusSplit stratified_split(const LabeledCorpus& corpus, double dev_fraction,
                             std::uint64_t seed);

/// Inverse-frequency weights N / (2 * n_c).
ClassWeights class_weights(const LabelCounts& counts);
ClassWeights class_weights(const LabeledCorpus& corpus);

LabelDistribution label_distribution(const LabeledCorpus& corpus);

}  // namespace persuade
