#include "persuade/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "persuade/checkpoint.hpp"
#include "persuade/errors.hpp"
#include "persuade/loss.hpp"
#include "persuade/metrics.hpp"
#include "persuade/schedule.hpp"

namespace persuade {
namespace {

constexpr std::uint64_t kShuffleSalt = 0xD1B54A32D192ED03ULL;

std::vector<std::vector<TokenId>> encode_corpus(const Tokenizer& tokenizer, const LabeledCorpus& corpus,
                                                std::size_t max_length) {
  std::vector<std::vector<TokenId>> sequences;
  sequences.reserve(corpus.size());
  for (const Snippet& s : corpus) {
    try {
      sequences.push_back(encode_sequence(tokenizer, s.text, max_length));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("snippet \"{}\": {}", s.id, e.what()));
    }
  }
  return sequences;
}

Matrix corpus_logits(const ClassifierModel& model, const std::vector<std::vector<TokenId>>& sequences,
                     std::size_t batch_size) {
  Matrix logits(static_cast<Eigen::Index>(sequences.size()), kNumClasses);
  for (std::size_t start = 0; start < sequences.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, sequences.size() - start);
    const TokenBatch batch = make_batch(std::span(sequences).subspan(start, count), model.tokenizer().specials().pad);
    logits.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count)) = model.logits(batch);
  }
  return logits;
}

void ensure_labeled(const LabeledCorpus& corpus, std::string_view role) {
  if (corpus.empty()) throw ValidationError(fmt::format("{} corpus is empty", role));
  if (!corpus.fully_labeled()) throw ValidationError(fmt::format("{} corpus has unlabeled snippets", role));
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure(fmt::format("cannot write '{}'", path.string()));
  return out;
}

}  // namespace

nlohmann::json TrainReport::to_json() const {
  nlohmann::ordered_json j;
  j["epochs"] = nlohmann::ordered_json::array();
  for (const EpochRecord& e : epochs) {
    j["epochs"].push_back({{"epoch", e.epoch},
                           {"learning_rate", e.learning_rate},
                           {"train_loss", e.train_loss},
                           {"dev_loss", e.dev_loss},
                           {"dev_micro_f1", e.dev_micro_f1}});
  }
  j["best_epoch"] = best_epoch;
  j["stopped_early"] = stopped_early;
  j["checkpoint_path"] = checkpoint_path.string();
  j["class_weights"] = {{"true", class_weights.weight_true}, {"false", class_weights.weight_false}};
  return j;
}

double training_step(ClassifierModel& model, const TokenBatch& batch, const std::optional<ClassWeights>& weights,
                     Adam& optimizer) {
  if (!batch.labels) throw ValidationError("training batch carries no labels");
  model.zero_grad();
  ForwardCache cache;
  const Matrix logits = model.forward(batch, model.training(), cache);
  if (!logits.allFinite()) throw RuntimeFailure("non-finite logits during training; aborting run");
  LossAndGradient lg = weighted_cross_entropy_with_grad(logits, *batch.labels, weights.value_or(ClassWeights::unit()));
  if (!std::isfinite(lg.loss)) throw RuntimeFailure("non-finite training loss; aborting run");
  model.backward(cache, lg.dlogits);
  const std::vector<Parameter*> params = model.parameters();
  optimizer.step(params);
  return lg.loss;
}

std::vector<Label> predict_corpus(const ClassifierModel& model, const LabeledCorpus& corpus, std::size_t max_length,
                                  std::size_t batch_size) {
  if (corpus.empty()) return {};
  if (batch_size == 0) throw ValidationError("batch size must be positive");
  return labels_from_logits(corpus_logits(model, encode_corpus(model.tokenizer(), corpus, max_length), batch_size));
}

DevEvaluation evaluate(const ClassifierModel& model, const LabeledCorpus& corpus, const ClassWeights& weights,
                       std::size_t max_length, std::size_t batch_size) {
  ensure_labeled(corpus, "evaluation");
  if (batch_size == 0) throw ValidationError("batch size must be positive");
  const Matrix logits = corpus_logits(model, encode_corpus(model.tokenizer(), corpus, max_length), batch_size);
  const std::vector<int> gold_index = corpus.label_indices();
  std::vector<Label> gold;
  for (const int y : gold_index) gold.push_back(label_from_index(y));
  const std::vector<Label> predicted = labels_from_logits(logits);
  return {weighted_cross_entropy(logits, gold_index, weights), micro_f1(confusion(predicted, gold))};
}

TrainReport train(ClassifierModel& model, const LabeledCorpus& train_corpus, const LabeledCorpus& dev_corpus,
                  const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  ensure_labeled(train_corpus, "training");
  if (!options.dev_override) ensure_labeled(dev_corpus, "dev");
  const auto log = [&](const std::string& message) {
    if (options.log) options.log(message);
  };

  TrainReport report;
  report.class_weights = config.use_class_weights ? class_weights(train_corpus) : ClassWeights::unit();
  log(fmt::format("class weights: true={:.6f} false={:.6f}", report.class_weights.weight_true,
                  report.class_weights.weight_false));

  std::ofstream metrics;
  if (options.run_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*options.run_dir, ec);
    if (ec) throw RuntimeFailure(fmt::format("cannot create run directory '{}': {}", options.run_dir->string(), ec.message()));
    auto snapshot = open_output(*options.run_dir / "config.txt");
    snapshot << to_config_text(config);
    metrics = open_output(*options.run_dir / "metrics.tsv");
  }

  const std::vector<std::vector<TokenId>> sequences =
      encode_corpus(model.tokenizer(), train_corpus, config.max_length);
  const std::vector<int> labels = train_corpus.label_indices();
  const TokenId pad = model.tokenizer().specials().pad;

  Rng shuffle_rng(config.seed ^ kShuffleSalt);
  Adam optimizer(AdamOptions{.learning_rate = config.learning_rate});
  std::vector<double> dev_history;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_values;
  std::vector<std::size_t> order(sequences.size());

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double lr = lr_at_epoch(config.learning_rate, config.scheduler_factor, config.scheduler_step, epoch - 1);
    optimizer.set_learning_rate(lr);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    model.train();
    double loss_sum = 0.0;
    double weight_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      std::vector<std::vector<TokenId>> batch_seqs;
      std::vector<int> batch_labels;
      double batch_weight = 0.0;
      for (std::size_t k = start; k < start + count; ++k) {
        batch_seqs.push_back(sequences[order[k]]);
        batch_labels.push_back(labels[order[k]]);
        batch_weight += report.class_weights.of_index(labels[order[k]]);
      }
      const TokenBatch batch = make_batch(batch_seqs, pad, std::move(batch_labels));
      loss_sum += training_step(model, batch, report.class_weights, optimizer) * batch_weight;
      weight_sum += batch_weight;
    }

    model.eval();
    const DevEvaluation dev = options.dev_override
                                  ? options.dev_override(epoch, model)
                                  : evaluate(model, dev_corpus, report.class_weights, config.max_length);
    const EpochRecord record{epoch, lr, loss_sum / weight_sum, dev.loss, dev.micro_f1};
    report.epochs.push_back(record);
    log(fmt::format("epoch {}: lr={} train_loss={:.6f} dev_loss={:.6f} dev_micro_f1={:.4f}", epoch, lr,
                    record.train_loss, record.dev_loss, record.dev_micro_f1));
    if (metrics.is_open()) {
      metrics << fmt::format("{}\t{}\t{}\t{}\t{}\n", epoch, lr, record.train_loss, record.dev_loss, record.dev_micro_f1);
      if (!metrics.flush()) throw RuntimeFailure("failed writing metrics.tsv");
    }

    dev_history.push_back(dev.loss);
    if (dev.loss < best_loss) {
      best_loss = dev.loss;
      report.best_epoch = epoch;
      best_values.clear();
      for (const Parameter* p : std::as_const(model).parameters()) best_values.push_back(p->value);
      if (options.run_dir) {
        report.checkpoint_path = *options.run_dir / "best";
        save_checkpoint(model, config.max_length, report.checkpoint_path);
      }
    }
    if (early_stop_check(dev_history, config.patience)) {
      report.stopped_early = epoch < config.max_epochs;
      if (report.stopped_early) log(fmt::format("early stop after epoch {} (best epoch {})", epoch, report.best_epoch));
      break;
    }
  }

  if (!best_values.empty()) {
    const std::vector<Parameter*> params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  }
  model.eval();

  if (options.run_dir) {
    auto out = open_output(*options.run_dir / "report.json");
    out << report.to_json().dump(2) << '\n';
    if (!out.flush()) throw RuntimeFailure("failed writing report.json");
  }
  return report;
}

TrainReport train(const LabeledCorpus& train_corpus, const LabeledCorpus& dev_corpus, const TrainConfig& config,
                  const std::string& checkpoint_id, const TrainOptions& options) {
  TrainConfig resolved = config;
  resolved.checkpoint = checkpoint_id;
  resolved.validate();
  ClassifierModel model = build_model(checkpoint_id, resolved.dropout_rate, resolved.seed);
  return train(model, train_corpus, dev_corpus, resolved, options);
}

}  // namespace persuade
