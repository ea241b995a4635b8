#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "persuade/checkpoint.hpp"
#include "persuade/classifier.hpp"
#include "persuade/config.hpp"
#include "persuade/errors.hpp"
#include "persuade/loss.hpp"
#include "persuade/optim.hpp"
#include "persuade/rng.hpp"
#include "persuade/schedule.hpp"
#include "persuade/trainer.hpp"

using namespace persuade;

namespace {

// Straightforward log-sum-exp reference, one row at a time.
double reference_loss(const Matrix& logits, const std::vector<int>& labels, const ClassWeights& w) {
  double num = 0.0, den = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double a = logits(r, 0), b = logits(r, 1);
    const double m = std::max(a, b);
    const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
    const double weight = w.of_index(labels[static_cast<std::size_t>(r)]);
    num += weight * (lse - logits(r, labels[static_cast<std::size_t>(r)]));
    den += weight;
  }
  return num / den;
}

TokenBatch labeled_batch(const LabeledCorpus& corpus, std::size_t max_length) {
  const auto tok = WhitespaceByteTokenizer::tiny();
  const auto texts = corpus.texts();
  TokenBatch batch = encode_batch(tok, texts, max_length);
  batch.labels = corpus.label_indices();
  return batch;
}

TrainConfig small_config() {
  TrainConfig config;
  config.checkpoint = "tiny-random";
  config.learning_rate = 1e-3;
  config.batch_size = 8;
  config.max_epochs = 3;
  config.max_length = 32;
  return config;
}

}  // namespace

TEST_CASE("lr_at_epoch closed form") {
  CHECK(lr_at_epoch(5e-5, 0.85, 2, 0) == 5e-5);
  CHECK(lr_at_epoch(5e-5, 0.85, 2, 1) == 5e-5);
  CHECK(lr_at_epoch(5e-5, 0.85, 2, 2) == 4.25e-5);
  CHECK(lr_at_epoch(5e-5, 0.85, 2, 3) == 4.25e-5);
  CHECK(lr_at_epoch(5e-5, 0.85, 2, 5) == 3.6125e-5);
  for (std::size_t e = 0; e < 50; ++e) {
    CHECK(lr_at_epoch(0.3, 1.0, 3, e) == 0.3);
    CHECK(lr_at_epoch(1e-3, 0.5, 4, e) == 1e-3 * std::pow(0.5, static_cast<double>(e / 4)));
  }
}

TEST_CASE("early_stop_check") {
  CHECK_FALSE(early_stop_check(std::vector<double>{0.9, 0.8, 0.7}, 2));
  CHECK(early_stop_check(std::vector<double>{0.9, 0.8, 0.85, 0.83}, 2));
  CHECK_FALSE(early_stop_check(std::vector<double>{0.9, 0.8, 0.85}, 2));
  CHECK_FALSE(early_stop_check(std::vector<double>{0.9}, 1));
  CHECK_FALSE(early_stop_check(std::vector<double>{0.9}, 5));
  // Equal values do not count as improvement.
  CHECK(early_stop_check(std::vector<double>{0.5, 0.5}, 1));
  CHECK_THROWS(early_stop_check(std::vector<double>{}, 2));
}

TEST_CASE("weighted_cross_entropy worked examples") {
  Matrix uniform = Matrix::Zero(1, 2);
  CHECK(weighted_cross_entropy(uniform, std::vector<int>{1}, ClassWeights{0.3, 9.0}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // Each example puts ln 3 on its own class for the first row.
  Matrix two(2, 2);
  two << 0.0, std::log(3.0), 0.0, 0.0;
  const double value = weighted_cross_entropy(two, std::vector<int>{1, 0}, ClassWeights{0.5, 2.0});
  CHECK(std::abs(value - (0.5 * std::log(4.0 / 3.0) + 2.0 * std::log(2.0)) / 2.5) <= 1e-12);
  CHECK(std::abs(value - 0.6120542) <= 1e-6);

  // Literal column order (ln 3 on index 0 with label 1).
  Matrix literal(2, 2);
  literal << std::log(3.0), 0.0, 0.0, 0.0;
  CHECK(std::abs(weighted_cross_entropy(literal, std::vector<int>{1, 0}, ClassWeights{0.5, 2.0}) -
                 (0.5 * std::log(4.0) + 2.0 * std::log(2.0)) / 2.5) <= 1e-12);

  Matrix confident(1, 2);
  confident << -30.0, 30.0;
  CHECK(weighted_cross_entropy(confident, std::vector<int>{1}) < 1e-9);

  Matrix bad(1, 2);
  bad << std::nan(""), 0.0;
  CHECK_THROWS_AS(weighted_cross_entropy(bad, std::vector<int>{1}), ValidationError);
  CHECK_THROWS_AS(weighted_cross_entropy(uniform, std::vector<int>{2}), ValidationError);
  CHECK_THROWS_AS(weighted_cross_entropy(Matrix(0, 2), std::vector<int>{}), ValidationError);
}

TEST_CASE("weighted_cross_entropy matches a reference and its gradient") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto rows = static_cast<Eigen::Index>(1 + rng.below(16));
    Matrix logits(rows, 2);
    std::vector<int> labels;
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = rng.normal(0.0, 3.0);
    for (Eigen::Index r = 0; r < rows; ++r) labels.push_back(static_cast<int>(rng.below(2)));
    const ClassWeights w{0.1 + rng.uniform() * 3, 0.1 + rng.uniform() * 3};

    CHECK(std::abs(weighted_cross_entropy(logits, labels) - reference_loss(logits, labels, ClassWeights::unit())) <= 1e-9);
    CHECK(weighted_cross_entropy(logits, labels, ClassWeights{1.0, 1.0}) == weighted_cross_entropy(logits, labels));
    const auto with_grad = weighted_cross_entropy_with_grad(logits, labels, w);
    CHECK(std::abs(with_grad.loss - reference_loss(logits, labels, w)) <= 1e-9);

    for (Eigen::Index i = 0; i < logits.size(); ++i) {
      Matrix plus = logits, minus = logits;
      plus.data()[i] += 1e-5;
      minus.data()[i] -= 1e-5;
      const double numeric = (reference_loss(plus, labels, w) - reference_loss(minus, labels, w)) / 2e-5;
      CHECK(std::abs(numeric - with_grad.dlogits.data()[i]) <= 1e-6);
    }
  }
}

TEST_CASE("Adam matches a hand-rolled update") {
  Parameter p("p", Matrix::Constant(1, 2, 1.0), 1);
  p.grad = Matrix(1, 2);
  p.grad << 0.5, -2.0;
  Adam adam(AdamOptions{});
  adam.set_learning_rate(0.1);
  std::vector<Parameter*> params{&p};
  adam.step(params);
  // After one step with bias correction the update is lr * sign(g) (up to eps).
  CHECK(p.value(0, 0) == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
  CHECK(p.value(0, 1) == doctest::Approx(1.0 + 0.1).epsilon(1e-6));
  CHECK(adam.steps() == 1);

  // Second step with the same gradient: m_hat = g, v_hat = g^2.
  adam.step(params);
  CHECK(p.value(0, 0) == doctest::Approx(1.0 - 0.2).epsilon(1e-6));
}

TEST_CASE("training_step lowers the loss on a fixed batch") {
  auto model = build_model("tiny-random", 0.1, 9);
  const auto corpus = testing::separable_corpus(4, 9);
  const auto batch = labeled_batch(corpus, 32);
  Adam adam(AdamOptions{});
  adam.set_learning_rate(1e-3);
  std::vector<double> losses;
  for (int step = 0; step < 30; ++step) losses.push_back(training_step(model, batch, ClassWeights{}, adam));
  CHECK(losses.back() < losses.front());

  auto again = build_model("tiny-random", 0.1, 9);
  Adam adam2(AdamOptions{});
  adam2.set_learning_rate(1e-3);
  for (int step = 0; step < 30; ++step) CHECK(training_step(again, batch, ClassWeights{}, adam2) == losses[static_cast<std::size_t>(step)]);

  auto unit_a = build_model("tiny-random", 0.1, 9);
  auto unit_b = build_model("tiny-random", 0.1, 9);
  Adam a(AdamOptions{}), b(AdamOptions{});
  CHECK(training_step(unit_a, batch, ClassWeights{1.0, 1.0}, a) == training_step(unit_b, batch, std::nullopt, b));

  auto unlabeled = batch;
  unlabeled.labels.reset();
  CHECK_THROWS_AS(training_step(model, unlabeled, std::nullopt, adam), ValidationError);
}

TEST_CASE("train records the closed-form schedule and restores the best epoch") {
  const auto corpus = testing::separable_corpus(12, 4);
  const auto split = stratified_split(corpus, 0.25, 4);
  auto config = small_config();
  config.max_epochs = 6;
  config.patience = 10;
  config.learning_rate = 5e-5;
  const auto dir = testing::fresh_dir("train-schedule");
  TrainOptions options;
  options.run_dir = dir;
  auto model = build_model("tiny-random", config.dropout_rate, config.seed);
  const auto report = train(model, split.train, split.dev, config, options);
  REQUIRE(report.epochs.size() == 6);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(report.epochs[k].epoch == k + 1);
    CHECK(report.epochs[k].learning_rate == lr_at_epoch(5e-5, 0.85, 2, k));
  }
  std::size_t argmin = 0;
  for (std::size_t k = 1; k < 6; ++k)
    if (report.epochs[k].dev_loss < report.epochs[argmin].dev_loss) argmin = k;
  CHECK(report.best_epoch == argmin + 1);
  CHECK_FALSE(report.stopped_early);
  CHECK(report.checkpoint_path == dir / "best");

  // The returned model is the best one, and so is the saved checkpoint.
  const auto best = evaluate(model, split.dev, report.class_weights, config.max_length);
  CHECK(best.loss == doctest::Approx(report.epochs[argmin].dev_loss).epsilon(1e-12));
  const auto loaded = load_checkpoint(dir / "best");
  const auto dev_batch = labeled_batch(split.dev, config.max_length);
  CHECK(loaded.model.logits(dev_batch) == model.logits(dev_batch));

  CHECK(std::filesystem::exists(dir / "config.txt"));
  CHECK(std::filesystem::exists(dir / "report.json"));
  const auto metrics = testing::read_file(dir / "metrics.tsv");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 6);
  TrainConfig snapshot;
  for (const auto& entry : read_config_file(dir / "config.txt")) set_config_value(snapshot, entry.key, entry.value);
  CHECK(snapshot == config);
}

TEST_CASE("train stops early on a worsening dev loss") {
  const auto corpus = testing::separable_corpus(8, 5);
  const auto split = stratified_split(corpus, 0.25, 5);
  auto config = small_config();
  config.max_epochs = 6;
  config.patience = 2;
  TrainOptions options;
  options.dev_override = [](std::size_t epoch, const ClassifierModel&) {
    return DevEvaluation{1.0 + 0.1 * static_cast<double>(epoch), 0.5};
  };
  const auto report = train(split.train, split.dev, config, "tiny-random", options);
  CHECK(report.stopped_early);
  CHECK(report.best_epoch == 1);
  CHECK(report.epochs.size() == 3);
}

TEST_CASE("train is deterministic") {
  const auto corpus = testing::separable_corpus(8, 6);
  const auto split = stratified_split(corpus, 0.25, 6);
  const auto config = small_config();
  const auto a = train(split.train, split.dev, config, "tiny-random");
  const auto b = train(split.train, split.dev, config, "tiny-random");
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (std::size_t k = 0; k < a.epochs.size(); ++k) {
    CHECK(a.epochs[k].train_loss == b.epochs[k].train_loss);
    CHECK(a.epochs[k].dev_loss == b.epochs[k].dev_loss);
  }
}

TEST_CASE("train reports unit weights when class weighting is off") {
  const auto corpus = testing::imbalanced_corpus(36, 4, 3);
  const auto split = stratified_split(corpus, 0.25, 3);
  auto config = small_config();
  config.max_epochs = 1;
  config.use_class_weights = false;
  auto report = train(split.train, split.dev, config, "tiny-random");
  CHECK(report.class_weights.weight_true == 1.0);
  CHECK(report.class_weights.weight_false == 1.0);
  config.use_class_weights = true;
  report = train(split.train, split.dev, config, "tiny-random");
  CHECK(report.class_weights.weight_false == doctest::Approx(class_weights(split.train).weight_false));
}

TEST_CASE("train rejects unlabeled corpora and invalid configs") {
  const auto corpus = testing::separable_corpus(4, 1);
  auto config = small_config();
  config.batch_size = 0;
  CHECK_THROWS_AS(train(corpus, corpus, config, "tiny-random"), ValidationError);
  std::vector<Snippet> bare{{"a", "w1 w2", std::nullopt, std::nullopt}};
  CHECK_THROWS_AS(train(LabeledCorpus(bare), corpus, small_config(), "tiny-random"), ValidationError);
}
