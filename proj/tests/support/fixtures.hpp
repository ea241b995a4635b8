#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "persuade/corpus.hpp"

namespace persuade::testing {

/// Class-correlated token patterns: "true" snippets carry two or three words
/// from w0-w9, "false" snippets from w10-w19, both padded with noise words
/// from w100-w299. Snippets are shuffled with the seed.
LabeledCorpus separable_corpus(std::size_t per_class, std::uint64_t seed);

/// Overlapping classes: each snippet holds one signal word drawn from its
/// own class set (w0-w9 for true, w10-w19 for false) with probability 0.8
/// and from the other set otherwise, plus noise words. With a 9:1 prior the
/// unweighted Bayes decision is "true" for every snippet.
LabeledCorpus imbalanced_corpus(std::size_t n_true, std::size_t n_false, std::uint64_t seed,
                                std::string_view id_prefix = "m");

/// Fresh empty directory under the system temp dir.
std::filesystem::path fresh_dir(std::string_view name);

void write_file(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace persuade::testing
