#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace persuade {

using TokenId = std::int32_t;
using IdMatrix = Eigen::Matrix<TokenId, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SpecialTokens {
  TokenId bos = 0;
  TokenId pad = 1;
  TokenId eos = 2;
  TokenId unk = 3;
};

/// Subword segmentation bundled with an encoder checkpoint.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  /// Segments text into vocabulary ids, without boundary tokens.
  virtual std::vector<TokenId> tokenize(std::string_view text) const = 0;
  virtual std::size_t vocab_size() const = 0;
  virtual std::string kind() const = 0;
  /// Writes the vocabulary files this tokenizer is loaded from into dir.
  virtual void save(const std::filesystem::path& dir) const = 0;

  const SpecialTokens& specials() const { return specials_; }

 protected:
  SpecialTokens specials_;
};

/// Whitespace word split with a fixed word list; out-of-vocabulary words
/// fall back to one token per UTF-8 byte. Ids 0-3 are the special tokens,
/// 4-259 the bytes, and the rest whole words.
class WhitespaceByteTokenizer final : public Tokenizer {
 public:
  static constexpr TokenId kFirstByteId = 4;
  static constexpr TokenId kFirstWordId = kFirstByteId + 256;

  explicit WhitespaceByteTokenizer(std::vector<std::string> words);

  /// The 1,000-entry vocabulary of the "tiny-random" checkpoint: specials,
  /// bytes, and the words "w0" .. "w739".
  static WhitespaceByteTokenizer tiny();
  static WhitespaceByteTokenizer load(const std::filesystem::path& vocab_file);

  std::vector<TokenId> tokenize(std::string_view text) const override;
  std::size_t vocab_size() const override { return kFirstWordId + words_.size(); }
  std::string kind() const override { return "whitespace-byte"; }
  void save(const std::filesystem::path& dir) const override;

  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Unigram-LM segmentation read from a tokenizer.json (the format shipped
/// with XLM-RoBERTa checkpoints). Supports NFC/NFKC/Precompiled/Replace/
/// Lowercase/Strip normalizers and Metaspace/WhitespaceSplit pre-tokenizers.
class UnigramTokenizer final : public Tokenizer {
 public:
  static UnigramTokenizer load(const std::filesystem::path& tokenizer_json);

  std::vector<TokenId> tokenize(std::string_view text) const override;
  std::size_t vocab_size() const override { return pieces_.size(); }
  std::string kind() const override { return "unigram"; }
  void save(const std::filesystem::path& dir) const override;

 private:
  struct NormalizeStep {
    enum class Kind { Nfc, Nfkc, Lowercase, Strip, Replace } kind = Kind::Nfc;
    std::string pattern;
    std::string content;
    bool regex = false;
  };
  struct PreTokenizeStep {
    enum class Kind { Metaspace, WhitespaceSplit } kind;
    std::string replacement = "\xE2\x96\x81";
    std::string prepend_scheme = "always";
    bool split = true;
  };

  UnigramTokenizer() = default;
  std::string normalize(std::string_view text) const;
  std::vector<std::string> pre_tokenize(const std::string& text) const;
  void segment(const std::string& word, std::vector<TokenId>& out) const;

  std::string source_json_;
  std::vector<std::pair<std::string, double>> pieces_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t max_piece_bytes_ = 1;
  double unk_score_ = 0.0;
  bool fuse_unk_ = true;
  std::vector<NormalizeStep> normalizers_;
  std::vector<PreTokenizeStep> pre_tokenizers_;
};

/// Loads whichever tokenizer a checkpoint directory carries.
std::shared_ptr<const Tokenizer> load_tokenizer(const std::filesystem::path& dir);

/// Padded token ids plus attention mask. labels, when present, hold class
/// indices.
struct TokenBatch {
  IdMatrix token_ids;
  IdMatrix attention_mask;
  std::optional<std::vector<int>> labels;

  Eigen::Index batch_size() const { return token_ids.rows(); }
  Eigen::Index sequence_length() const { return token_ids.cols(); }

  /// Throws ValidationError if the batch breaks the shape/mask invariants.
  void validate() const;
};

/// bos + pieces + eos, truncating pieces so the result fits max_length.
std::vector<TokenId> encode_sequence(const Tokenizer& tokenizer, std::string_view text,
                                     std::size_t max_length);

/// Pads already-encoded sequences to the longest one.
TokenBatch make_batch(std::span<const std::vector<TokenId>> sequences, TokenId pad_id,
                      std::optional<std::vector<int>> labels = std::nullopt);

TokenBatch encode_batch(const Tokenizer& tokenizer, std::span<const std::string> texts,
                        std::size_t max_length);

}  // namespace persuade
