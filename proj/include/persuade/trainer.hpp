#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "persuade/classifier.hpp"
#include "persuade/config.hpp"
#include "persuade/corpus.hpp"
#include "persuade/optim.hpp"

namespace persuade {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double dev_micro_f1 = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 before any epoch completes
  bool stopped_early = false;
  std::filesystem::path checkpoint_path;
  ClassWeights class_weights;

  nlohmann::json to_json() const;
};

struct DevEvaluation {
  double loss = 0.0;
  double micro_f1 = 0.0;
};

struct TrainOptions {
  /// Receives config.txt, metrics.tsv, best/ and report.json when set.
  std::optional<std::filesystem::path> run_dir;
  /// Substitutes the measured dev evaluation for an epoch.
  std::function<DevEvaluation(std::size_t epoch, const ClassifierModel& model)> dev_override;
  std::function<void(const std::string&)> log;
};

/// zero_grad -> forward -> weighted loss -> backward -> Adam update. Returns
/// the loss before the update. Throws RuntimeFailure on a non-finite loss.
double training_step(ClassifierModel& model, const TokenBatch& batch,
                     const std::optional<ClassWeights>& weights, Adam& optimizer);

/// Predictions in corpus order, evaluation mode.
std::vector<Label> predict_corpus(const ClassifierModel& model, const LabeledCorpus& corpus,
                                  std::size_t max_length, std::size_t batch_size = 16);

/// Weighted dev loss (example-weighted over the whole corpus) and micro-F1.
DevEvaluation evaluate(const ClassifierModel& model, const LabeledCorpus& corpus,
                       const ClassWeights& weights, std::size_t max_length,
                       std::size_t batch_size = 16);

/// Fine-tunes model in place. On return the model holds the parameters of
/// the epoch with the lowest dev loss and is in evaluation mode.
TrainReport train(ClassifierModel& model, const LabeledCorpus& train_corpus,
                  const LabeledCorpus& dev_corpus, const TrainConfig& config,
                  const TrainOptions& options = {});

/// Builds the model from checkpoint_id (seeded by config.seed) and trains it.
TrainReport train(const LabeledCorpus& train_corpus, const LabeledCorpus& dev_corpus,
                  const TrainConfig& config, const std::string& checkpoint_id,
                  const TrainOptions& options = {});

}  // namespace persuade
