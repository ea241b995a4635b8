#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "persuade/encoder.hpp"
#include "persuade/labels.hpp"
#include "persuade/nn.hpp"
#include "persuade/rng.hpp"
#include "persuade/tokenizer.hpp"

namespace persuade {

inline constexpr const char* kTinyRandomCheckpoint = "tiny-random";
inline constexpr const char* kCacheDirVariable = "PERSUADE_CACHE_DIR";

/// Cached forward state for one batch.
struct ForwardCache {
  std::vector<SequenceCache> sequences;
  std::vector<Eigen::Index> row_lengths;
  Matrix pooled;
  Matrix pooled_dropout_mask;
  Matrix pooled_dropped;
};

/// Pretrained encoder, dropout on the first-token representation, and an
/// affine head producing two logits (index 0 = false, 1 = true).
class ClassifierModel {
 public:
  ClassifierModel(Encoder encoder, std::shared_ptr<const Tokenizer> tokenizer,
                  double dropout_rate, std::uint64_t seed);

  const EncoderConfig& encoder_config() const { return encoder_.config(); }
  const Tokenizer& tokenizer() const { return *tokenizer_; }
  std::shared_ptr<const Tokenizer> shared_tokenizer() const { return tokenizer_; }
  double dropout_rate() const { return dropout_rate_; }

  bool training() const { return training_; }
  void train() { training_ = true; }
  void eval() { training_ = false; }

  /// Deterministic evaluation-mode logits [B x 2].
  Matrix logits(const TokenBatch& batch) const;
  /// First-token hidden states [B x H] in evaluation mode.
  Matrix pooled(const TokenBatch& batch) const;

  /// Forward pass that records what backward() needs. Dropout draws from the
  /// model's seeded stream when training is set.
  Matrix forward(const TokenBatch& batch, bool training, ForwardCache& cache);
  void backward(const ForwardCache& cache, const Matrix& dlogits);

  void zero_grad();
  /// Canonical parameter order: encoder (embeddings, layers), then head.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  nn::Linear& head() { return head_; }
  const nn::Linear& head() const { return head_; }

  /// Re-initializes the head from the given seed.
  void reset_head(std::uint64_t seed);

 private:
  Matrix run(const TokenBatch& batch, bool training, Rng* rng, ForwardCache* cache) const;

  Encoder encoder_;
  std::shared_ptr<const Tokenizer> tokenizer_;
  double dropout_rate_ = 0.1;
  nn::Linear head_;
  Rng dropout_rng_;
  bool training_ = true;
};

/// Resolves a checkpoint identifier to a directory: an existing path, or a
/// child of $PERSUADE_CACHE_DIR (default ~/.cache/persuade) named after the
/// identifier, with '/' also tried as '--'. Throws ValidationError.
std::filesystem::path resolve_checkpoint(const std::string& checkpoint_id);

/// Encoder from checkpoint_id ("tiny-random" builds a seeded random one),
/// plus a freshly initialized head. The model starts in training mode.
ClassifierModel build_model(const std::string& checkpoint_id, double dropout_rate,
                            std::uint64_t seed);

Matrix forward(ClassifierModel& model, const TokenBatch& batch, bool training);

/// Argmax per row with ties going to index 0 ("false").
std::vector<Label> labels_from_logits(const Matrix& logits);
std::vector<Label> predict_labels(const ClassifierModel& model, const TokenBatch& batch);

}  // namespace persuade
