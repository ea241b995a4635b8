#include "persuade/classifier.hpp"

#include <cstdlib>

#include <fmt/format.h>

#include "persuade/checkpoint.hpp"
#include "persuade/errors.hpp"

namespace persuade {
namespace {

constexpr std::uint64_t kTinyEncoderSeed = 20231207;
constexpr std::uint64_t kDropoutStreamSalt = 0x9E3779B97F4A7C15ULL;
constexpr double kHeadInitStddev = 0.02;

void check_dropout(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ValidationError(fmt::format("dropout_rate must lie in [0, 1), got {}", rate));
}

}  // namespace

ClassifierModel::ClassifierModel(Encoder encoder, std::shared_ptr<const Tokenizer> tokenizer, double dropout_rate,
                                 std::uint64_t seed)
    : encoder_(std::move(encoder)),
      tokenizer_(std::move(tokenizer)),
      dropout_rate_(dropout_rate),
      head_("classifier", encoder_.config().hidden_size, kNumClasses),
      dropout_rng_(seed ^ kDropoutStreamSalt) {
  check_dropout(dropout_rate);
  if (!tokenizer_) throw ValidationError("classifier needs a tokenizer");
  if (tokenizer_->vocab_size() > static_cast<std::size_t>(encoder_.config().vocab_size)) {
    throw ValidationError(fmt::format("tokenizer vocabulary ({}) exceeds the encoder's ({})", tokenizer_->vocab_size(),
                                      encoder_.config().vocab_size));
  }
  reset_head(seed);
}

void ClassifierModel::reset_head(std::uint64_t seed) {
  Rng rng(seed);
  head_.init_normal(rng, kHeadInitStddev);
}

Matrix ClassifierModel::run(const TokenBatch& batch, bool training, Rng* rng, ForwardCache* cache) const {
  batch.validate();
  const Eigen::Index rows = batch.batch_size();
  const Eigen::Index cols = batch.sequence_length();
  Matrix pooled(rows, encoder_.config().hidden_size);
  if (cache != nullptr) {
    cache->sequences.assign(static_cast<std::size_t>(rows), SequenceCache{});
    cache->row_lengths.assign(static_cast<std::size_t>(rows), cols);
  }
  for (Eigen::Index r = 0; r < rows; ++r) {
    std::vector<std::int32_t> ids(static_cast<std::size_t>(cols));
    std::vector<bool> key_mask(static_cast<std::size_t>(cols));
    for (Eigen::Index c = 0; c < cols; ++c) {
      ids[static_cast<std::size_t>(c)] = batch.token_ids(r, c);
      key_mask[static_cast<std::size_t>(c)] = batch.attention_mask(r, c) != 0;
    }
    const Matrix hidden = encoder_.forward(ids, key_mask, training, rng,
                                           cache ? &cache->sequences[static_cast<std::size_t>(r)] : nullptr);
    pooled.row(r) = hidden.row(0);
  }
  Matrix dropped = pooled;
  Matrix mask;
  if (training && rng != nullptr && dropout_rate_ > 0.0) {
    mask = nn::dropout_mask(pooled.rows(), pooled.cols(), dropout_rate_, *rng);
    dropped.array() *= mask.array();
  }
  Matrix logits = head_.forward(dropped);
  if (cache != nullptr) {
    cache->pooled = std::move(pooled);
    cache->pooled_dropout_mask = std::move(mask);
    cache->pooled_dropped = std::move(dropped);
  }
  return logits;
}

Matrix ClassifierModel::logits(const TokenBatch& batch) const { return run(batch, false, nullptr, nullptr); }

Matrix ClassifierModel::pooled(const TokenBatch& batch) const {
  ForwardCache cache;
  run(batch, false, nullptr, &cache);
  return cache.pooled;
}

Matrix ClassifierModel::forward(const TokenBatch& batch, bool training, ForwardCache& cache) {
  return run(batch, training, training ? &dropout_rng_ : nullptr, &cache);
}

void ClassifierModel::backward(const ForwardCache& cache, const Matrix& dlogits) {
  Matrix dpooled = head_.backward(cache.pooled_dropped, dlogits);
  if (cache.pooled_dropout_mask.size() > 0) dpooled.array() *= cache.pooled_dropout_mask.array();
  for (std::size_t r = 0; r < cache.sequences.size(); ++r) {
    Matrix dhidden = Matrix::Zero(cache.row_lengths[r], dpooled.cols());
    dhidden.row(0) = dpooled.row(static_cast<Eigen::Index>(r));
    encoder_.backward(cache.sequences[r], dhidden);
  }
}

void ClassifierModel::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

std::vector<Parameter*> ClassifierModel::parameters() {
  std::vector<Parameter*> out;
  encoder_.collect(out);
  out.push_back(&head_.weight);
  out.push_back(&head_.bias);
  return out;
}

std::vector<const Parameter*> ClassifierModel::parameters() const {
  auto mutable_params = const_cast<ClassifierModel*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::filesystem::path resolve_checkpoint(const std::string& checkpoint_id) {
  if (checkpoint_id.empty()) throw ValidationError("empty checkpoint identifier");
  const std::filesystem::path direct(checkpoint_id);
  if (std::filesystem::is_directory(direct)) return direct;

  std::filesystem::path cache_dir;
  if (const char* env = std::getenv(kCacheDirVariable); env != nullptr && *env != '\0') {
    cache_dir = env;
  } else if (const char* home = std::getenv("HOME"); home != nullptr) {
    cache_dir = std::filesystem::path(home) / ".cache" / "persuade";
  }
  if (!cache_dir.empty()) {
    std::string flattened = checkpoint_id;
    for (std::size_t pos = 0; (pos = flattened.find('/', pos)) != std::string::npos; pos += 2) {
      flattened.replace(pos, 1, "--");
    }
    for (const auto& candidate : {cache_dir / checkpoint_id, cache_dir / flattened}) {
      if (std::filesystem::is_directory(candidate)) return candidate;
    }
  }
  throw ValidationError(fmt::format("cannot resolve checkpoint '{}': not a directory and not found under '{}' "
                                    "(set {} to the checkpoint cache)",
                                    checkpoint_id, cache_dir.string(), kCacheDirVariable));
}

ClassifierModel build_model(const std::string& checkpoint_id, double dropout_rate, std::uint64_t seed) {
  check_dropout(dropout_rate);
  if (checkpoint_id == kTinyRandomCheckpoint) {
    Rng init(kTinyEncoderSeed);
    return ClassifierModel(Encoder(EncoderConfig::tiny(), init),
                           std::make_shared<WhitespaceByteTokenizer>(WhitespaceByteTokenizer::tiny()), dropout_rate,
                           seed);
  }
  const std::filesystem::path dir = resolve_checkpoint(checkpoint_id);
  return ClassifierModel(load_encoder(dir), load_tokenizer(dir), dropout_rate, seed);
}

Matrix forward(ClassifierModel& model, const TokenBatch& batch, bool training) {
  if (!training) return model.logits(batch);
  ForwardCache cache;
  return model.forward(batch, true, cache);
}

std::vector<Label> labels_from_logits(const Matrix& logits) {
  if (logits.cols() != kNumClasses) throw ValidationError("logits must have two columns");
  std::vector<Label> labels;
  labels.reserve(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    labels.push_back(logits(r, 1) > logits(r, 0) ? Label::True : Label::False);
  }
  return labels;
}

std::vector<Label> predict_labels(const ClassifierModel& model, const TokenBatch& batch) {
  return labels_from_logits(model.logits(batch));
}

}  // namespace persuade
