#include "persuade/encoder.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "persuade/errors.hpp"
#include "persuade/rng.hpp"

namespace persuade {
namespace {

constexpr double kInitStddev = 0.02;
constexpr const char* kPrefix = "roberta.";

template <typename T>
T get_or(const nlohmann::json& json, const char* key, T fallback) {
  const auto it = json.find(key);
  if (it == json.end() || it->is_null()) return fallback;
  return it->get<T>();
}

void fill_normal(Matrix& m, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, kInitStddev);
}

}  // namespace

EncoderConfig EncoderConfig::tiny() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::from_json(const nlohmann::json& json) {
  EncoderConfig c;
  try {
    c.vocab_size = json.at("vocab_size").get<int>();
    c.hidden_size = json.at("hidden_size").get<int>();
    c.num_layers = json.at("num_hidden_layers").get<int>();
    c.num_heads = json.at("num_attention_heads").get<int>();
    c.intermediate_size = json.at("intermediate_size").get<int>();
    c.max_positions = json.at("max_position_embeddings").get<int>();
    c.type_vocab_size = get_or(json, "type_vocab_size", 1);
    c.pad_token_id = get_or(json, "pad_token_id", 1);
    c.layer_norm_eps = get_or(json, "layer_norm_eps", 1e-5);
    c.hidden_dropout = get_or(json, "hidden_dropout_prob", 0.1);
    c.attention_dropout = get_or(json, "attention_probs_dropout_prob", 0.1);
    const auto act = get_or<std::string>(json, "hidden_act", "gelu");
    if (act != "gelu") throw ValidationError(fmt::format("unsupported activation \"{}\"", act));
    const auto positions = get_or<std::string>(json, "position_embedding_type", "absolute");
    if (positions != "absolute") throw ValidationError(fmt::format("unsupported position embedding \"{}\"", positions));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("encoder config: {}", e.what()));
  }
  c.validate();
  return c;
}

nlohmann::json EncoderConfig::to_json() const {
  return {
      {"model_type", "xlm-roberta"},
      {"vocab_size", vocab_size},
      {"hidden_size", hidden_size},
      {"num_hidden_layers", num_layers},
      {"num_attention_heads", num_heads},
      {"intermediate_size", intermediate_size},
      {"max_position_embeddings", max_positions},
      {"type_vocab_size", type_vocab_size},
      {"pad_token_id", pad_token_id},
      {"layer_norm_eps", layer_norm_eps},
      {"hidden_dropout_prob", hidden_dropout},
      {"attention_probs_dropout_prob", attention_dropout},
      {"hidden_act", "gelu"},
      {"position_embedding_type", "absolute"},
  };
}

void EncoderConfig::validate() const {
  if (vocab_size <= 0 || hidden_size <= 0 || num_layers <= 0 || num_heads <= 0 || intermediate_size <= 0 ||
      type_vocab_size <= 0) {
    throw ValidationError("encoder config sizes must be positive");
  }
  if (hidden_size % num_heads != 0) {
    throw ValidationError(fmt::format("hidden size {} not divisible by {} heads", hidden_size, num_heads));
  }
  if (pad_token_id < 0 || pad_token_id >= vocab_size) throw ValidationError("pad_token_id outside the vocabulary");
  if (max_positions <= pad_token_id + 1) throw ValidationError("max_position_embeddings too small");
  if (!(hidden_dropout >= 0.0 && hidden_dropout < 1.0) || !(attention_dropout >= 0.0 && attention_dropout < 1.0)) {
    throw ValidationError("encoder dropout probabilities must lie in [0, 1)");
  }
}

// ---------------------------------------------------------------------------

TransformerLayer::TransformerLayer(const std::string& prefix, const EncoderConfig& c)
    : num_heads_(c.num_heads),
      hidden_dropout_(c.hidden_dropout),
      attention_dropout_(c.attention_dropout),
      query_(prefix + "attention.self.query", c.hidden_size, c.hidden_size),
      key_(prefix + "attention.self.key", c.hidden_size, c.hidden_size),
      value_(prefix + "attention.self.value", c.hidden_size, c.hidden_size),
      attn_out_(prefix + "attention.output.dense", c.hidden_size, c.hidden_size),
      attn_norm_(prefix + "attention.output.LayerNorm", c.hidden_size, c.layer_norm_eps),
      ffn_in_(prefix + "intermediate.dense", c.hidden_size, c.intermediate_size),
      ffn_out_(prefix + "output.dense", c.intermediate_size, c.hidden_size),
      ffn_norm_(prefix + "output.LayerNorm", c.hidden_size, c.layer_norm_eps) {}

void TransformerLayer::init(Rng& rng, double stddev) {
  for (nn::Linear* linear : {&query_, &key_, &value_, &attn_out_, &ffn_in_, &ffn_out_}) {
    linear->init_normal(rng, stddev);
  }
}

void TransformerLayer::collect(std::vector<Parameter*>& out) {
  for (nn::Linear* linear : {&query_, &key_, &value_, &attn_out_}) {
    out.push_back(&linear->weight);
    out.push_back(&linear->bias);
  }
  out.push_back(&attn_norm_.gamma);
  out.push_back(&attn_norm_.beta);
  for (nn::Linear* linear : {&ffn_in_, &ffn_out_}) {
    out.push_back(&linear->weight);
    out.push_back(&linear->bias);
  }
  out.push_back(&ffn_norm_.gamma);
  out.push_back(&ffn_norm_.beta);
}

Matrix TransformerLayer::forward(const Matrix& x, const std::vector<bool>& key_mask, bool training, Rng* rng,
                                 LayerCache* cache) const {
  const Eigen::Index length = x.rows();
  const Eigen::Index width = x.cols();
  const Eigen::Index head_dim = width / num_heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const bool drop = training && rng != nullptr;

  Matrix q = query_.forward(x);
  Matrix k = key_.forward(x);
  Matrix v = value_.forward(x);
  Matrix context(length, width);
  if (cache != nullptr) {
    cache->probs.clear();
    cache->probs_dropped.clear();
    cache->probs_mask.clear();
  }

  for (int h = 0; h < num_heads_; ++h) {
    const Eigen::Index off = h * head_dim;
    Matrix probs = (q.middleCols(off, head_dim) * k.middleCols(off, head_dim).transpose()) * scale;
    for (Eigen::Index r = 0; r < length; ++r) {
      double row_max = -std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < length; ++c) {
        if (key_mask[static_cast<std::size_t>(c)]) row_max = std::max(row_max, probs(r, c));
      }
      double total = 0.0;
      for (Eigen::Index c = 0; c < length; ++c) {
        const double e = key_mask[static_cast<std::size_t>(c)] ? std::exp(probs(r, c) - row_max) : 0.0;
        probs(r, c) = e;
        total += e;
      }
      probs.row(r) /= total;
    }
    Matrix mask;
    Matrix dropped;
    if (drop && attention_dropout_ > 0.0) {
      mask = nn::dropout_mask(length, length, attention_dropout_, *rng);
      dropped = probs.cwiseProduct(mask);
    } else {
      dropped = probs;
    }
    context.middleCols(off, head_dim).noalias() = dropped * v.middleCols(off, head_dim);
    if (cache != nullptr) {
      cache->probs.push_back(std::move(probs));
      cache->probs_dropped.push_back(std::move(dropped));
      cache->probs_mask.push_back(std::move(mask));
    }
  }

  Matrix attn = attn_out_.forward(context);
  Matrix attn_mask;
  if (drop && hidden_dropout_ > 0.0) {
    attn_mask = nn::dropout_mask(length, width, hidden_dropout_, *rng);
    attn.array() *= attn_mask.array();
  }
  Matrix h1 = attn_norm_.forward(attn + x, cache ? &cache->attn_norm : nullptr);

  Matrix ffn_pre = ffn_in_.forward(h1);
  Matrix ffn_act = nn::gelu(ffn_pre);
  Matrix ffn = ffn_out_.forward(ffn_act);
  Matrix ffn_mask;
  if (drop && hidden_dropout_ > 0.0) {
    ffn_mask = nn::dropout_mask(length, width, hidden_dropout_, *rng);
    ffn.array() *= ffn_mask.array();
  }
  Matrix out = ffn_norm_.forward(ffn + h1, cache ? &cache->ffn_norm : nullptr);

  if (cache != nullptr) {
    cache->input = x;
    cache->query = std::move(q);
    cache->key = std::move(k);
    cache->value = std::move(v);
    cache->context = std::move(context);
    cache->attn_dropout_mask = std::move(attn_mask);
    cache->attn_norm_out = std::move(h1);
    cache->ffn_pre = std::move(ffn_pre);
    cache->ffn_act = std::move(ffn_act);
    cache->ffn_dropout_mask = std::move(ffn_mask);
  }
  return out;
}

Matrix TransformerLayer::backward(const LayerCache& cache, const Matrix& dy) {
  const Eigen::Index width = cache.input.cols();
  const Eigen::Index head_dim = width / num_heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  // Feed-forward block with its residual.
  const Matrix dsum2 = ffn_norm_.backward(cache.ffn_norm, dy);
  Matrix dffn = dsum2;
  if (cache.ffn_dropout_mask.size() > 0) dffn.array() *= cache.ffn_dropout_mask.array();
  const Matrix dact = ffn_out_.backward(cache.ffn_act, dffn);
  const Matrix dpre = dact.cwiseProduct(nn::gelu_grad(cache.ffn_pre));
  const Matrix dh1 = dsum2 + ffn_in_.backward(cache.attn_norm_out, dpre);

  // Attention block with its residual.
  const Matrix dsum1 = attn_norm_.backward(cache.attn_norm, dh1);
  Matrix dattn = dsum1;
  if (cache.attn_dropout_mask.size() > 0) dattn.array() *= cache.attn_dropout_mask.array();
  const Matrix dcontext = attn_out_.backward(cache.context, dattn);

  Matrix dq = Matrix::Zero(cache.query.rows(), width);
  Matrix dk = Matrix::Zero(cache.key.rows(), width);
  Matrix dv = Matrix::Zero(cache.value.rows(), width);
  for (int h = 0; h < num_heads_; ++h) {
    const Eigen::Index off = h * head_dim;
    const auto hs = static_cast<std::size_t>(h);
    const Matrix& probs = cache.probs[hs];
    const auto dctx = dcontext.middleCols(off, head_dim);
    Matrix dprobs = dctx * cache.value.middleCols(off, head_dim).transpose();
    dv.middleCols(off, head_dim).noalias() = cache.probs_dropped[hs].transpose() * dctx;
    if (cache.probs_mask[hs].size() > 0) dprobs.array() *= cache.probs_mask[hs].array();
    const Eigen::VectorXd row_dot = (dprobs.array() * probs.array()).rowwise().sum();
    const Matrix dscores = (probs.array() * (dprobs.colwise() - row_dot).array()).matrix() * scale;
    dq.middleCols(off, head_dim).noalias() = dscores * cache.key.middleCols(off, head_dim);
    dk.middleCols(off, head_dim).noalias() = dscores.transpose() * cache.query.middleCols(off, head_dim);
  }

  Matrix dx = dsum1;
  dx += query_.backward(cache.input, dq);
  dx += key_.backward(cache.input, dk);
  dx += value_.backward(cache.input, dv);
  return dx;
}

// ---------------------------------------------------------------------------

Encoder::Encoder(const EncoderConfig& config, Rng& init_rng) : config_(config) {
  config_.validate();
  const Eigen::Index h = config_.hidden_size;
  const std::string emb = std::string(kPrefix) + "embeddings.";
  word_embeddings_ = Parameter(emb + "word_embeddings.weight", Matrix(config_.vocab_size, h));
  position_embeddings_ = Parameter(emb + "position_embeddings.weight", Matrix(config_.max_positions, h));
  token_type_embeddings_ = Parameter(emb + "token_type_embeddings.weight", Matrix(config_.type_vocab_size, h));
  embed_norm_ = nn::LayerNorm(emb + "LayerNorm", h, config_.layer_norm_eps);
  for (Parameter* p : {&word_embeddings_, &position_embeddings_, &token_type_embeddings_}) {
    fill_normal(p->value, init_rng);
  }
  word_embeddings_.value.row(config_.pad_token_id).setZero();
  position_embeddings_.value.row(config_.pad_token_id).setZero();
  for (int i = 0; i < config_.num_layers; ++i) {
    layers_.emplace_back(fmt::format("{}encoder.layer.{}.", kPrefix, i), config_);
    layers_.back().init(init_rng, kInitStddev);
  }
}

void Encoder::collect(std::vector<Parameter*>& out) {
  out.push_back(&word_embeddings_);
  out.push_back(&position_embeddings_);
  out.push_back(&token_type_embeddings_);
  out.push_back(&embed_norm_.gamma);
  out.push_back(&embed_norm_.beta);
  for (TransformerLayer& layer : layers_) layer.collect(out);
}

std::vector<std::int32_t> Encoder::position_ids(const std::vector<std::int32_t>& ids) const {
  // Non-padding tokens are numbered from pad_token_id + 1; padding keeps
  // pad_token_id.
  std::vector<std::int32_t> positions(ids.size());
  std::int32_t count = 0;
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] == config_.pad_token_id) {
      positions[t] = config_.pad_token_id;
    } else {
      positions[t] = ++count + config_.pad_token_id;
    }
    if (positions[t] >= config_.max_positions) {
      throw ValidationError(fmt::format("sequence longer than the encoder's {} positions",
                                        config_.max_positions - config_.pad_token_id - 1));
    }
  }
  return positions;
}

Matrix Encoder::forward(const std::vector<std::int32_t>& ids, const std::vector<bool>& key_mask, bool training,
                        Rng* rng, SequenceCache* cache) const {
  const auto length = static_cast<Eigen::Index>(ids.size());
  const std::vector<std::int32_t> positions = position_ids(ids);
  Matrix x(length, config_.hidden_size);
  for (Eigen::Index t = 0; t < length; ++t) {
    const std::int32_t id = ids[static_cast<std::size_t>(t)];
    if (id < 0 || id >= config_.vocab_size) {
      throw ValidationError(fmt::format("token id {} outside the vocabulary of {}", id, config_.vocab_size));
    }
    x.row(t) = word_embeddings_.value.row(id) + position_embeddings_.value.row(positions[static_cast<std::size_t>(t)]) +
               token_type_embeddings_.value.row(0);
  }
  x = embed_norm_.forward(x, cache ? &cache->embed_norm : nullptr);
  Matrix drop_mask;
  if (training && rng != nullptr && config_.hidden_dropout > 0.0) {
    drop_mask = nn::dropout_mask(length, config_.hidden_size, config_.hidden_dropout, *rng);
    x.array() *= drop_mask.array();
  }
  if (cache != nullptr) {
    cache->ids = ids;
    cache->positions = positions;
    cache->key_mask = key_mask;
    cache->embed_dropout_mask = std::move(drop_mask);
    cache->layers.assign(layers_.size(), LayerCache{});
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(x, key_mask, training, rng, cache ? &cache->layers[i] : nullptr);
  }
  return x;
}

void Encoder::backward(const SequenceCache& cache, const Matrix& dhidden) {
  Matrix dx = dhidden;
  for (std::size_t i = layers_.size(); i-- > 0;) dx = layers_[i].backward(cache.layers[i], dx);
  if (cache.embed_dropout_mask.size() > 0) dx.array() *= cache.embed_dropout_mask.array();
  const Matrix demb = embed_norm_.backward(cache.embed_norm, dx);
  for (Eigen::Index t = 0; t < demb.rows(); ++t) {
    const auto ts = static_cast<std::size_t>(t);
    // Padding rows of the embedding tables receive no gradient.
    if (cache.ids[ts] != config_.pad_token_id) word_embeddings_.grad.row(cache.ids[ts]) += demb.row(t);
    if (cache.positions[ts] != config_.pad_token_id) position_embeddings_.grad.row(cache.positions[ts]) += demb.row(t);
  }
  token_type_embeddings_.grad.row(0) += demb.colwise().sum();
}

}  // namespace persuade
