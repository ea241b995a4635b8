#include "fixtures.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "persuade/rng.hpp"

namespace persuade::testing {
namespace {

// Small enough that every noise word recurs across both classes, so the
// signal words are the only thing worth learning.
constexpr std::uint64_t kImbalancedNoisePool = 20;

std::string word(std::uint64_t index) { return fmt::format("w{}", index); }

std::string noise_text(Rng& rng, std::size_t count, std::uint64_t pool, std::vector<std::string> signal) {
  std::vector<std::string> words = std::move(signal);
  for (std::size_t i = 0; i < count; ++i) words.push_back(word(100 + rng.below(pool)));
  rng.shuffle(std::span<std::string>(words));
  std::string text;
  for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
  return text;
}

}  // namespace

LabeledCorpus separable_corpus(std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Snippet> snippets;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const bool is_true = i % 2 == 0;
    const std::uint64_t base = is_true ? 0 : 10;
    std::vector<std::string> signal;
    const std::size_t n_signal = 2 + rng.below(2);
    for (std::size_t k = 0; k < n_signal; ++k) signal.push_back(word(base + rng.below(10)));
    Snippet s;
    s.text = noise_text(rng, 4 + rng.below(5), 200, std::move(signal));
    s.label = is_true ? Label::True : Label::False;
    snippets.push_back(std::move(s));
  }
  rng.shuffle(std::span<Snippet>(snippets));
  for (std::size_t i = 0; i < snippets.size(); ++i) snippets[i].id = fmt::format("s{:04}", i);
  return LabeledCorpus(std::move(snippets));
}

LabeledCorpus imbalanced_corpus(std::size_t n_true, std::size_t n_false, std::uint64_t seed,
                                std::string_view id_prefix) {
  Rng rng(seed);
  std::vector<Snippet> snippets;
  for (std::size_t i = 0; i < n_true + n_false; ++i) {
    const bool is_true = i < n_true;
    const bool own = rng.uniform() < 0.8;
    const std::uint64_t base = (is_true == own) ? 0 : 10;
    Snippet s;
    s.text = noise_text(rng, 5 + rng.below(4), kImbalancedNoisePool, {word(base + rng.below(10))});
    s.label = is_true ? Label::True : Label::False;
    snippets.push_back(std::move(s));
  }
  rng.shuffle(std::span<Snippet>(snippets));
  for (std::size_t i = 0; i < snippets.size(); ++i) snippets[i].id = fmt::format("{}{:04}", id_prefix, i);
  return LabeledCorpus(std::move(snippets));
}

std::filesystem::path fresh_dir(std::string_view name) {
  const auto dir = std::filesystem::temp_directory_path() / fmt::format("persuade-test-{}", name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out.flush()) throw std::runtime_error("cannot write " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace persuade::testing
