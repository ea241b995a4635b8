#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "persuade/nn.hpp"

namespace persuade {

class Rng;

/// Architecture of a RoBERTa-family (post-LayerNorm) transformer encoder.
struct EncoderConfig {
  int vocab_size = 1000;
  int hidden_size = 32;
  int num_layers = 2;
  int num_heads = 4;
  int intermediate_size = 128;
  int max_positions = 514;
  int type_vocab_size = 1;
  int pad_token_id = 1;
  double layer_norm_eps = 1e-5;
  double hidden_dropout = 0.1;
  double attention_dropout = 0.1;

  static EncoderConfig tiny();

  /// Reads a config.json in the Hugging Face layout.
  static EncoderConfig from_json(const nlohmann::json& json);
  nlohmann::json to_json() const;
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct LayerCache {
  Matrix input;
  Matrix query, key, value;
  std::vector<Matrix> probs;          // per head, after softmax
  std::vector<Matrix> probs_dropped;  // per head, after dropout
  std::vector<Matrix> probs_mask;
  Matrix context;
  Matrix attn_dropout_mask;
  nn::LayerNormCache attn_norm;
  Matrix attn_norm_out;
  Matrix ffn_pre;
  Matrix ffn_act;
  Matrix ffn_dropout_mask;
  nn::LayerNormCache ffn_norm;
};

/// Everything the backward pass needs for one sequence.
struct SequenceCache {
  std::vector<std::int32_t> ids;
  std::vector<std::int32_t> positions;
  std::vector<bool> key_mask;
  nn::LayerNormCache embed_norm;
  Matrix embed_dropout_mask;
  std::vector<LayerCache> layers;
};

class TransformerLayer {
 public:
  TransformerLayer() = default;
  TransformerLayer(const std::string& prefix, const EncoderConfig& config);

  Matrix forward(const Matrix& x, const std::vector<bool>& key_mask, bool training, Rng* rng,
                 LayerCache* cache) const;
  Matrix backward(const LayerCache& cache, const Matrix& dy);

  void collect(std::vector<Parameter*>& out);
  void init(Rng& rng, double stddev);

 private:
  int num_heads_ = 1;
  double hidden_dropout_ = 0.0;
  double attention_dropout_ = 0.0;
  nn::Linear query_, key_, value_, attn_out_;
  nn::LayerNorm attn_norm_;
  nn::Linear ffn_in_, ffn_out_;
  nn::LayerNorm ffn_norm_;
};

/// Token + learned position + segment embeddings followed by a stack of
/// self-attention layers. Operates on one sequence at a time.
class Encoder {
 public:
  Encoder() = default;
  Encoder(const EncoderConfig& config, Rng& init_rng);

  const EncoderConfig& config() const { return config_; }

  /// Hidden states [L x H]. key_mask marks attendable positions.
  Matrix forward(const std::vector<std::int32_t>& ids, const std::vector<bool>& key_mask,
                 bool training, Rng* rng, SequenceCache* cache) const;
  /// Accumulates parameter gradients from dL/d(hidden states).
  void backward(const SequenceCache& cache, const Matrix& dhidden);

  void collect(std::vector<Parameter*>& out);

 private:
  std::vector<std::int32_t> position_ids(const std::vector<std::int32_t>& ids) const;

  EncoderConfig config_;
  Parameter word_embeddings_;
  Parameter position_embeddings_;
  Parameter token_type_embeddings_;
  nn::LayerNorm embed_norm_;
  std::vector<TransformerLayer> layers_;
};

}  // namespace persuade
