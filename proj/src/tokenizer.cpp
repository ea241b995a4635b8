#include "persuade/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <limits>
#include <regex>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <unicode/unistr.h>

#include "persuade/errors.hpp"
#include "persuade/text.hpp"

namespace persuade {
namespace {

constexpr const char* kSpecialPieces[] = {"<s>", "<pad>", "</s>", "<unk>"};
constexpr double kUnknownPenalty = 10.0;

std::string byte_piece(unsigned value) { return fmt::format("<0x{:02X}>", value); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string lowercase(const std::string& input) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(input);
  u.toLower();
  std::string out;
  u.toUTF8String(out);
  return out;
}

std::string replace_all(std::string input, const std::string& from, const std::string& to) {
  if (from.empty()) return input;
  std::size_t pos = 0;
  while ((pos = input.find(from, pos)) != std::string::npos) {
    input.replace(pos, from.size(), to);
    pos += to.size();
  }
  return input;
}

}  // namespace

// ---------------------------------------------------------------------------
// WhitespaceByteTokenizer

WhitespaceByteTokenizer::WhitespaceByteTokenizer(std::vector<std::string> words) : words_(std::move(words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    const std::string& w = words_[i];
    if (w.empty() || text::split_whitespace(w).size() != 1 || text::split_whitespace(w)[0] != w) {
      throw ValidationError(fmt::format("vocabulary word {} is empty or contains whitespace", i));
    }
    if (!index_.emplace(w, kFirstWordId + static_cast<TokenId>(i)).second) {
      throw ValidationError(fmt::format("duplicate vocabulary word \"{}\"", w));
    }
  }
}

WhitespaceByteTokenizer WhitespaceByteTokenizer::tiny() {
  std::vector<std::string> words;
  words.reserve(740);
  for (int i = 0; i < 740; ++i) words.push_back(fmt::format("w{}", i));
  return WhitespaceByteTokenizer(std::move(words));
}

std::vector<TokenId> WhitespaceByteTokenizer::tokenize(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const std::string& word : text::split_whitespace(text)) {
    if (const auto it = index_.find(word); it != index_.end()) {
      ids.push_back(it->second);
      continue;
    }
    for (const unsigned char byte : word) ids.push_back(kFirstByteId + static_cast<TokenId>(byte));
  }
  return ids;
}

void WhitespaceByteTokenizer::save(const std::filesystem::path& dir) const {
  std::ofstream out(dir / "vocab.txt", std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure(fmt::format("cannot write '{}'", (dir / "vocab.txt").string()));
  for (const char* special : kSpecialPieces) out << special << '\n';
  for (unsigned b = 0; b < 256; ++b) out << byte_piece(b) << '\n';
  for (const std::string& w : words_) out << w << '\n';
  if (!out.flush()) throw RuntimeFailure("failed writing vocab.txt");
}

WhitespaceByteTokenizer WhitespaceByteTokenizer::load(const std::filesystem::path& vocab_file) {
  std::istringstream in(read_file(vocab_file));
  std::string line;
  std::vector<std::string> words;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t index = line_no++;
    std::string expected;
    if (index < 4) {
      expected = kSpecialPieces[index];
    } else if (index < static_cast<std::size_t>(kFirstWordId)) {
      expected = byte_piece(static_cast<unsigned>(index - kFirstByteId));
    } else {
      words.push_back(line);
      continue;
    }
    if (line != expected) {
      throw ValidationError(fmt::format("{}:{}: expected \"{}\"", vocab_file.string(), line_no, expected));
    }
  }
  if (line_no < static_cast<std::size_t>(kFirstWordId)) {
    throw ValidationError(fmt::format("{}: truncated vocabulary", vocab_file.string()));
  }
  return WhitespaceByteTokenizer(std::move(words));
}

// ---------------------------------------------------------------------------
// UnigramTokenizer

UnigramTokenizer UnigramTokenizer::load(const std::filesystem::path& tokenizer_json) {
  UnigramTokenizer tok;
  tok.source_json_ = read_file(tokenizer_json);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(tok.source_json_);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", tokenizer_json.string(), e.what()));
  }
  const auto fail = [&](const std::string& what) {
    return ValidationError(fmt::format("{}: {}", tokenizer_json.string(), what));
  };

  const nlohmann::json& model = doc.at("model");
  if (model.value("type", "") != "Unigram") throw fail("only Unigram tokenizer models are supported");
  double min_score = std::numeric_limits<double>::infinity();
  for (const auto& entry : model.at("vocab")) {
    const std::string piece = entry.at(0).get<std::string>();
    const double score = entry.at(1).get<double>();
    const auto id = static_cast<TokenId>(tok.pieces_.size());
    tok.pieces_.emplace_back(piece, score);
    tok.index_.emplace(piece, id);
    tok.max_piece_bytes_ = std::max(tok.max_piece_bytes_, piece.size());
    min_score = std::min(min_score, score);
  }
  if (tok.pieces_.empty()) throw fail("empty vocabulary");
  tok.unk_score_ = min_score - kUnknownPenalty;
  tok.fuse_unk_ = model.value("fuse_unk", true);

  const auto find_special = [&](const char* piece) -> TokenId {
    if (const auto it = tok.index_.find(piece); it != tok.index_.end()) return it->second;
    if (doc.contains("added_tokens")) {
      for (const auto& added : doc["added_tokens"]) {
        if (added.value("content", "") == piece) return added.at("id").get<TokenId>();
      }
    }
    throw fail(fmt::format("vocabulary lacks special token {}", piece));
  };
  tok.specials_.bos = find_special("<s>");
  tok.specials_.pad = find_special("<pad>");
  tok.specials_.eos = find_special("</s>");
  tok.specials_.unk = model.contains("unk_id") && !model["unk_id"].is_null() ? model["unk_id"].get<TokenId>()
                                                                              : find_special("<unk>");

  const auto simple_step = [](NormalizeStep::Kind kind) {
    NormalizeStep step;
    step.kind = kind;
    return step;
  };
  std::function<void(const nlohmann::json&)> add_normalizer = [&](const nlohmann::json& n) {
    if (n.is_null()) return;
    const std::string type = n.value("type", "");
    if (type == "Sequence") {
      for (const auto& inner : n.at("normalizers")) add_normalizer(inner);
    } else if (type == "NFC") {
      tok.normalizers_.push_back(simple_step(NormalizeStep::Kind::Nfc));
    } else if (type == "NFKC" || type == "Precompiled") {
      tok.normalizers_.push_back(simple_step(NormalizeStep::Kind::Nfkc));
    } else if (type == "Lowercase") {
      tok.normalizers_.push_back(simple_step(NormalizeStep::Kind::Lowercase));
    } else if (type == "Strip") {
      tok.normalizers_.push_back(simple_step(NormalizeStep::Kind::Strip));
    } else if (type == "Replace") {
      NormalizeStep step;
      step.kind = NormalizeStep::Kind::Replace;
      const auto& pattern = n.at("pattern");
      if (pattern.contains("Regex")) {
        step.pattern = pattern["Regex"].get<std::string>();
        step.regex = true;
      } else {
        step.pattern = pattern.at("String").get<std::string>();
      }
      step.content = n.at("content").get<std::string>();
      tok.normalizers_.push_back(std::move(step));
    } else {
      throw fail(fmt::format("unsupported normalizer \"{}\"", type));
    }
    if (type == "Precompiled") {
      // sentencepiece folds every whitespace character to a plain space.
      NormalizeStep step;
      step.kind = NormalizeStep::Kind::Replace;
      step.pattern = "\\s";
      step.regex = true;
      step.content = " ";
      tok.normalizers_.push_back(std::move(step));
    }
  };
  if (doc.contains("normalizer")) add_normalizer(doc["normalizer"]);

  std::function<void(const nlohmann::json&)> add_pre = [&](const nlohmann::json& p) {
    if (p.is_null()) return;
    const std::string type = p.value("type", "");
    if (type == "Sequence") {
      for (const auto& inner : p.at("pretokenizers")) add_pre(inner);
    } else if (type == "Metaspace") {
      PreTokenizeStep step{PreTokenizeStep::Kind::Metaspace};
      step.replacement = p.value("replacement", step.replacement);
      if (p.contains("prepend_scheme")) {
        step.prepend_scheme = p["prepend_scheme"].get<std::string>();
      } else {
        step.prepend_scheme = p.value("add_prefix_space", true) ? "always" : "never";
      }
      step.split = p.value("split", true);
      tok.pre_tokenizers_.push_back(std::move(step));
    } else if (type == "WhitespaceSplit") {
      tok.pre_tokenizers_.push_back({PreTokenizeStep::Kind::WhitespaceSplit});
    } else {
      throw fail(fmt::format("unsupported pre-tokenizer \"{}\"", type));
    }
  };
  if (doc.contains("pre_tokenizer")) add_pre(doc["pre_tokenizer"]);
  return tok;
}

std::string UnigramTokenizer::normalize(std::string_view input) const {
  std::string s(input);
  for (const NormalizeStep& step : normalizers_) {
    switch (step.kind) {
      case NormalizeStep::Kind::Nfc: s = text::nfc(s); break;
      case NormalizeStep::Kind::Nfkc: s = text::nfkc(s); break;
      case NormalizeStep::Kind::Lowercase: s = lowercase(s); break;
      case NormalizeStep::Kind::Strip: s = text::trim(s); break;
      case NormalizeStep::Kind::Replace:
        s = step.regex ? std::regex_replace(s, std::regex(step.pattern), step.content)
                       : replace_all(std::move(s), step.pattern, step.content);
        break;
    }
  }
  return s;
}

std::vector<std::string> UnigramTokenizer::pre_tokenize(const std::string& input) const {
  std::vector<std::string> pieces{input};
  for (const PreTokenizeStep& step : pre_tokenizers_) {
    std::vector<std::string> next;
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      if (step.kind == PreTokenizeStep::Kind::WhitespaceSplit) {
        for (auto& w : text::split_whitespace(pieces[k])) next.push_back(std::move(w));
        continue;
      }
      std::string s = replace_all(pieces[k], " ", step.replacement);
      const bool prepend = step.prepend_scheme == "always" || (step.prepend_scheme == "first" && k == 0);
      if (prepend && !s.starts_with(step.replacement)) s.insert(0, step.replacement);
      if (!step.split) {
        next.push_back(std::move(s));
        continue;
      }
      // Each marker starts a new piece; the marker stays attached to it.
      const std::string& marker = step.replacement;
      std::size_t start = 0;
      while (start < s.size()) {
        const bool at_marker = s.compare(start, marker.size(), marker) == 0;
        std::size_t end = s.find(marker, start + (at_marker ? marker.size() : 0));
        if (end == std::string::npos) end = s.size();
        next.push_back(s.substr(start, end - start));
        start = end;
      }
    }
    pieces = std::move(next);
  }
  std::erase_if(pieces, [](const std::string& p) { return p.empty(); });
  return pieces;
}

void UnigramTokenizer::segment(const std::string& word, std::vector<TokenId>& out) const {
  const std::vector<std::size_t> bounds = text::char_boundaries(word);
  const std::size_t n = bounds.size();  // positions 0..n-1 index into bounds
  constexpr double kUnset = -std::numeric_limits<double>::infinity();
  std::vector<double> best(n, kUnset);
  std::vector<std::size_t> back(n, 0);
  std::vector<TokenId> via(n, -1);
  best[0] = 0.0;

  for (std::size_t s = 0; s + 1 < n; ++s) {
    if (best[s] == kUnset) continue;
    bool single = false;
    for (std::size_t e = s + 1; e < n && bounds[e] - bounds[s] <= max_piece_bytes_; ++e) {
      const auto it = index_.find(word.substr(bounds[s], bounds[e] - bounds[s]));
      if (it == index_.end()) continue;
      if (e == s + 1) single = true;
      const double candidate = best[s] + pieces_[static_cast<std::size_t>(it->second)].second;
      if (best[e] == kUnset || candidate > best[e]) {
        best[e] = candidate;
        back[e] = s;
        via[e] = it->second;
      }
    }
    if (!single) {
      const double candidate = best[s] + unk_score_;
      if (best[s + 1] == kUnset || candidate > best[s + 1]) {
        best[s + 1] = candidate;
        back[s + 1] = s;
        via[s + 1] = specials_.unk;
      }
    }
  }

  std::vector<TokenId> reversed;
  for (std::size_t pos = n - 1; pos > 0; pos = back[pos]) reversed.push_back(via[pos]);
  for (auto it = reversed.rbegin(); it != reversed.rend(); ++it) {
    if (fuse_unk_ && *it == specials_.unk && !out.empty() && out.back() == specials_.unk) continue;
    out.push_back(*it);
  }
}

std::vector<TokenId> UnigramTokenizer::tokenize(std::string_view input) const {
  std::vector<TokenId> ids;
  for (const std::string& word : pre_tokenize(normalize(input))) {
    std::vector<TokenId> word_ids;
    segment(word, word_ids);
    ids.insert(ids.end(), word_ids.begin(), word_ids.end());
  }
  return ids;
}

void UnigramTokenizer::save(const std::filesystem::path& dir) const {
  std::ofstream out(dir / "tokenizer.json", std::ios::binary | std::ios::trunc);
  if (!out || !(out << source_json_) || !out.flush()) {
    throw RuntimeFailure(fmt::format("cannot write '{}'", (dir / "tokenizer.json").string()));
  }
}

std::shared_ptr<const Tokenizer> load_tokenizer(const std::filesystem::path& dir) {
  if (std::filesystem::exists(dir / "tokenizer.json")) {
    return std::make_shared<UnigramTokenizer>(UnigramTokenizer::load(dir / "tokenizer.json"));
  }
  if (std::filesystem::exists(dir / "vocab.txt")) {
    return std::make_shared<WhitespaceByteTokenizer>(WhitespaceByteTokenizer::load(dir / "vocab.txt"));
  }
  throw ValidationError(fmt::format("'{}' holds neither tokenizer.json nor vocab.txt", dir.string()));
}

// ---------------------------------------------------------------------------
// Batching

void TokenBatch::validate() const {
  if (token_ids.rows() == 0) throw ValidationError("empty batch");
  if (token_ids.rows() != attention_mask.rows() || token_ids.cols() != attention_mask.cols()) {
    throw ValidationError(fmt::format("mask shape {}x{} does not match token ids {}x{}", attention_mask.rows(),
                                      attention_mask.cols(), token_ids.rows(), token_ids.cols()));
  }
  for (Eigen::Index r = 0; r < attention_mask.rows(); ++r) {
    bool any = false;
    for (Eigen::Index c = 0; c < attention_mask.cols(); ++c) {
      const TokenId m = attention_mask(r, c);
      if (m != 0 && m != 1) throw ValidationError("attention mask entries must be 0 or 1");
      any = any || m == 1;
    }
    if (!any) throw ValidationError(fmt::format("batch row {} has no unmasked position", r));
  }
  if (labels) {
    if (static_cast<Eigen::Index>(labels->size()) != token_ids.rows()) {
      throw ValidationError("label count does not match batch size");
    }
    for (const int y : *labels) {
      if (y != 0 && y != 1) throw ValidationError(fmt::format("label index {} outside {{0, 1}}", y));
    }
  }
}

std::vector<TokenId> encode_sequence(const Tokenizer& tokenizer, std::string_view text,
                                     std::size_t max_length) {
  if (max_length < 2) throw ValidationError("max_length must be at least 2");
  std::vector<TokenId> pieces = tokenizer.tokenize(text);
  if (pieces.empty()) throw ValidationError("text yields no tokens");
  if (pieces.size() > max_length - 2) pieces.resize(max_length - 2);
  std::vector<TokenId> ids;
  ids.reserve(pieces.size() + 2);
  ids.push_back(tokenizer.specials().bos);
  ids.insert(ids.end(), pieces.begin(), pieces.end());
  ids.push_back(tokenizer.specials().eos);
  return ids;
}

TokenBatch make_batch(std::span<const std::vector<TokenId>> sequences, TokenId pad_id,
                      std::optional<std::vector<int>> labels) {
  if (sequences.empty()) throw ValidationError("cannot batch zero sequences");
  std::size_t width = 0;
  for (const auto& s : sequences) width = std::max(width, s.size());
  const auto rows = static_cast<Eigen::Index>(sequences.size());
  const auto cols = static_cast<Eigen::Index>(width);
  TokenBatch batch;
  batch.token_ids = IdMatrix::Constant(rows, cols, pad_id);
  batch.attention_mask = IdMatrix::Zero(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& s = sequences[static_cast<std::size_t>(r)];
    for (std::size_t c = 0; c < s.size(); ++c) {
      batch.token_ids(r, static_cast<Eigen::Index>(c)) = s[c];
      batch.attention_mask(r, static_cast<Eigen::Index>(c)) = 1;
    }
  }
  batch.labels = std::move(labels);
  batch.validate();
  return batch;
}

TokenBatch encode_batch(const Tokenizer& tokenizer, std::span<const std::string> texts,
                        std::size_t max_length) {
  if (texts.empty()) throw ValidationError("encode_batch needs at least one text");
  std::vector<std::vector<TokenId>> sequences;
  sequences.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (text::trim(texts[i]).empty()) throw ValidationError(fmt::format("text {} is empty", i));
    try {
      sequences.push_back(encode_sequence(tokenizer, texts[i], max_length));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("text {}: {}", i, e.what()));
    }
  }
  return make_batch(sequences, tokenizer.specials().pad);
}

}  // namespace persuade
