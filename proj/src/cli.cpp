#include "persuade/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <unordered_map>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "persuade/checkpoint.hpp"
#include "persuade/corpus.hpp"
#include "persuade/errors.hpp"
#include "persuade/predictions.hpp"

namespace persuade::cli {
namespace {

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

std::shared_ptr<const Tokenizer> tokenizer_for(const std::string& checkpoint_id) {
  if (checkpoint_id == kTinyRandomCheckpoint) return std::make_shared<WhitespaceByteTokenizer>(WhitespaceByteTokenizer::tiny());
  return load_tokenizer(resolve_checkpoint(checkpoint_id));
}

std::size_t nearest_rank(const std::vector<std::size_t>& sorted, double percent) {
  const auto rank = static_cast<std::size_t>(std::ceil(percent / 100.0 * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

std::string join_ids(const std::vector<std::string>& ids) {
  constexpr std::size_t kShown = 10;
  std::string out;
  for (std::size_t i = 0; i < std::min(ids.size(), kShown); ++i) out += (i ? ", " : "") + ids[i];
  if (ids.size() > kShown) out += fmt::format(", ... ({} total)", ids.size());
  return out;
}

std::vector<PredictionRow> read_gold(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open gold file '{}'", path.string()));
  std::string first;
  std::getline(in, first);
  if (!first.empty() && first.back() == '\r') first.pop_back();
  if (first == kPredictionHeader) return read_predictions(path);
  std::vector<PredictionRow> rows;
  for (const Snippet& s : load_corpus(path, true)) rows.push_back({s.id, *s.label});
  return rows;
}

}  // namespace

TrainConfig resolve_config(const std::optional<std::filesystem::path>& config_path,
                           const std::vector<std::pair<std::string, std::string>>& overrides, std::ostream& log) {
  TrainConfig config;
  std::map<std::string, std::string> from_file;
  if (config_path) {
    for (const ConfigEntry& entry : read_config_file(*config_path)) {
      try {
        set_config_value(config, entry.key, entry.value);
      } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{}:{}: {}", config_path->string(), entry.line, e.what()));
      }
      from_file[entry.key] = entry.value;
    }
  }
  for (const auto& [key, value] : overrides) {
    set_config_value(config, key, value);
    if (const auto it = from_file.find(key); it != from_file.end()) {
      log << fmt::format("notice: {} {} overrides config file value {} = {}\n", flag_name(key), value, key, it->second);
    }
  }
  config.validate();
  return config;
}

TrainReport cmd_train(const TrainCommand& command, std::ostream& out, std::ostream& log) {
  const TrainConfig config = resolve_config(command.config_path, command.overrides, log);
  const LabeledCorpus corpus = load_corpus(command.train_path, true);
  const CorpusSplit split = stratified_split(corpus, config.dev_fraction, config.seed);
  log << fmt::format("train: {} snippets, dev: {} snippets (seed {})\n", split.train.size(), split.dev.size(),
                     config.seed);

  TrainOptions options;
  options.run_dir = command.out_dir;
  options.log = [&log](const std::string& line) { log << line << '\n'; };
  TrainReport report = train(split.train, split.dev, config, config.checkpoint, options);

  const EpochRecord& best = report.epochs.at(report.best_epoch - 1);
  out << fmt::format("best epoch {} of {}{}; dev micro-F1 {:.4f}; checkpoint {}\n", report.best_epoch,
                     report.epochs.size(), report.stopped_early ? " (stopped early)" : "", best.dev_micro_f1,
                     report.checkpoint_path.string());
  return report;
}

void cmd_predict(const std::filesystem::path& checkpoint_dir, const std::filesystem::path& input,
                 const std::filesystem::path& output, std::size_t batch_size, std::ostream& log) {
  const LoadedClassifier loaded = load_checkpoint(checkpoint_dir);
  const LabeledCorpus corpus = load_corpus(input, false);
  const std::vector<Label> labels = predict_corpus(loaded.model, corpus, loaded.max_length, batch_size);
  std::vector<PredictionRow> rows;
  rows.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) rows.push_back({corpus[i].id, labels[i]});
  write_predictions(output, rows);
  log << fmt::format("wrote {} predictions to {}\n", rows.size(), output.string());
}

ScoreReport cmd_score(const std::filesystem::path& predictions, const std::filesystem::path& gold_path,
                      std::ostream& out) {
  const std::vector<PredictionRow> predicted = read_predictions(predictions);
  const std::vector<PredictionRow> gold = read_gold(gold_path);

  std::unordered_map<std::string, Label> by_id;
  for (const PredictionRow& row : predicted) by_id.emplace(row.id, row.label);
  std::set<std::string> gold_ids;
  std::vector<std::string> missing;
  for (const PredictionRow& row : gold) {
    if (!gold_ids.insert(row.id).second) throw ValidationError(fmt::format("duplicate gold id \"{}\"", row.id));
    if (!by_id.contains(row.id)) missing.push_back(row.id);
  }
  std::vector<std::string> extra;
  for (const PredictionRow& row : predicted) {
    if (!gold_ids.contains(row.id)) extra.push_back(row.id);
  }
  if (!missing.empty() || !extra.empty()) {
    std::string message = "prediction and gold id sets differ";
    if (!missing.empty()) message += fmt::format("; missing predictions for: {}", join_ids(missing));
    if (!extra.empty()) message += fmt::format("; ids absent from gold: {}", join_ids(extra));
    throw ValidationError(message);
  }

  std::vector<Label> pred_labels, gold_labels;
  for (const PredictionRow& row : gold) {
    gold_labels.push_back(row.label);
    pred_labels.push_back(by_id.at(row.id));
  }
  ScoreReport report;
  report.counts = confusion(pred_labels, gold_labels);
  report.micro_f1 = micro_f1(report.counts);
  report.per_class = per_class_f1(report.counts);
  report.binary_f1_true = report.per_class.of(Label::True).f1;

  const ClassTally& t = report.counts.of(Label::True);
  const ClassTally& f = report.counts.of(Label::False);
  out << fmt::format("examples: {}\n", report.counts.n);
  out << fmt::format("micro-F1 (both classes): {:.4f}\n", report.micro_f1);
  out << fmt::format("binary F1 (positive class \"true\"): {:.4f}\n", report.binary_f1_true);
  out << fmt::format("macro-F1: {:.4f}\n", report.per_class.macro_f1);
  out << "class  precision  recall  f1\n";
  for (const Label label : {Label::True, Label::False}) {
    const ClassScores& s = report.per_class.of(label);
    out << fmt::format("{:<5}  {:.4f}     {:.4f}  {:.4f}\n", to_string(label), s.precision, s.recall, s.f1);
  }
  out << "confusion (rows: gold, columns: predicted)\n";
  out << "            pred:true  pred:false\n";
  out << fmt::format("gold:true   {:>9}  {:>10}\n", t.tp, t.fn);
  out << fmt::format("gold:false  {:>9}  {:>10}\n", f.fn, f.tp);
  return report;
}

void cmd_inspect(const std::filesystem::path& corpus_path, const std::string& checkpoint_id, std::ostream& out) {
  const LabeledCorpus corpus = load_corpus(corpus_path, false);
  const LabelDistribution dist = label_distribution(corpus);
  if (!dist.defined) {
    out << fmt::format("{} snippets; no labels present\n", corpus.size());
    out << "class weights: n/a (no labels present)\n";
  } else {
    out << fmt::format("{} snippets; true: {} ({:.1f}%); false: {} ({:.1f}%)", corpus.size(), dist.counts.n_true,
                       100.0 * dist.fraction_true, dist.counts.n_false, 100.0 * dist.fraction_false);
    if (!corpus.fully_labeled()) out << fmt::format("; unlabeled: {}", corpus.size() - dist.counts.total());
    out << '\n';
    if (dist.counts.n_true > 0 && dist.counts.n_false > 0) {
      const ClassWeights w = class_weights(corpus);
      out << fmt::format("class weights (true / false): {:.4f} / {:.4f}\n", w.weight_true, w.weight_false);
    } else {
      out << "class weights: undefined (one class has no examples)\n";
    }
  }

  std::map<std::string, std::size_t> genres;
  for (const Snippet& s : corpus) {
    if (s.genre) ++genres[*s.genre];
  }
  if (!genres.empty()) {
    out << "genres:";
    for (const auto& [genre, count] : genres) out << fmt::format(" {}: {}", genre, count);
    out << '\n';
  }

  if (corpus.empty()) {
    out << "subword lengths: n/a (empty corpus)\n";
    return;
  }
  const auto tokenizer = tokenizer_for(checkpoint_id);
  std::vector<std::size_t> lengths;
  for (const Snippet& s : corpus) lengths.push_back(tokenizer->tokenize(s.text).size() + 2);
  std::sort(lengths.begin(), lengths.end());
  out << fmt::format("subword lengths ({} tokenizer, boundary tokens included): p50 {} p90 {} p95 {} p99 {} max {}\n",
                     checkpoint_id, nearest_rank(lengths, 50), nearest_rank(lengths, 90), nearest_rank(lengths, 95),
                     nearest_rank(lengths, 99), lengths.back());
}

void cmd_baseline(const std::filesystem::path& train_path, const std::filesystem::path& input,
                  const std::filesystem::path& output, std::ostream& log) {
  const LabeledCorpus train_corpus = load_corpus(train_path, true);
  const LabelCounts& counts = train_corpus.counts();
  const Label majority = counts.n_true > counts.n_false ? Label::True : Label::False;
  const LabeledCorpus corpus = load_corpus(input, false);
  std::vector<PredictionRow> rows;
  rows.reserve(corpus.size());
  for (const Snippet& s : corpus) rows.push_back({s.id, majority});
  write_predictions(output, rows);
  log << fmt::format("majority label \"{}\" written for {} snippets to {}\n", to_string(majority), rows.size(),
                     output.string());
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fine-tune and apply a binary persuasion-technique classifier"};
  app.name("persuade");
  app.require_subcommand(1);

  struct Shared {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> config;
    bool quiet = false;
  };
  Shared shared;
  const auto add_shared = [&shared](CLI::App* sub) {
    sub->add_option("--seed", shared.seed, "Random seed");
    sub->add_option("--config", shared.config, "Config file (key = value lines)")->check(CLI::ExistingFile);
    sub->add_flag("--quiet", shared.quiet, "Suppress progress messages");
  };

  TrainCommand train_cmd;
  std::vector<std::optional<std::string>> train_flags(config_keys().size());
  CLI::App* train_app = app.add_subcommand("train", "Split, weight and fine-tune on a labeled corpus");
  train_app->add_option("--train", train_cmd.train_path, "Labeled corpus (JSON lines)")->required();
  train_app->add_option("--out", train_cmd.out_dir, "Run directory to create")->required();
  for (std::size_t i = 0; i < config_keys().size(); ++i) {
    if (config_keys()[i] == "seed") continue;
    train_app->add_option(flag_name(config_keys()[i]), train_flags[i],
                          fmt::format("Sets {} (default {})", config_keys()[i], get_config_value(TrainConfig{}, config_keys()[i])));
  }
  add_shared(train_app);

  std::filesystem::path checkpoint_dir, input, output, predictions_path, gold_path, corpus_path, train_path;
  std::optional<std::size_t> batch_size;
  std::optional<std::string> inspect_checkpoint;

  CLI::App* predict_app = app.add_subcommand("predict", "Label a corpus with a fine-tuned checkpoint");
  predict_app->add_option("--checkpoint", checkpoint_dir, "Fine-tuned checkpoint directory")->required();
  predict_app->add_option("--input", input, "Corpus to label")->required();
  predict_app->add_option("--output", output, "Prediction file to write")->required();
  predict_app->add_option("--batch-size", batch_size);
  add_shared(predict_app);

  CLI::App* score_app = app.add_subcommand("score", "Score predictions against gold labels");
  score_app->add_option("--predictions", predictions_path)->required();
  score_app->add_option("--gold", gold_path, "Prediction-format file or labeled corpus")->required();
  add_shared(score_app);

  CLI::App* inspect_app = app.add_subcommand("inspect", "Summarize a corpus");
  inspect_app->add_option("--corpus", corpus_path)->required();
  inspect_app->add_option("--checkpoint", inspect_checkpoint, "Tokenizer used for length statistics");
  add_shared(inspect_app);

  CLI::App* baseline_app = app.add_subcommand("baseline", "Predict the training-majority label everywhere");
  baseline_app->add_option("--train", train_path)->required();
  baseline_app->add_option("--input", input)->required();
  baseline_app->add_option("--output", output)->required();
  add_shared(baseline_app);

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  std::ostream null_stream(nullptr);
  std::ostream& log = shared.quiet ? null_stream : err;
  try {
    if (app.got_subcommand(train_app)) {
      train_cmd.config_path = shared.config;
      for (std::size_t i = 0; i < config_keys().size(); ++i) {
        if (train_flags[i]) train_cmd.overrides.emplace_back(config_keys()[i], *train_flags[i]);
      }
      if (shared.seed) train_cmd.overrides.emplace_back("seed", std::to_string(*shared.seed));
      cmd_train(train_cmd, out, log);
    } else if (app.got_subcommand(predict_app)) {
      std::size_t size = 16;
      if (shared.config) size = resolve_config(shared.config, {}, log).batch_size;
      if (batch_size) size = *batch_size;
      cmd_predict(checkpoint_dir, input, output, size, log);
    } else if (app.got_subcommand(score_app)) {
      cmd_score(predictions_path, gold_path, out);
    } else if (app.got_subcommand(inspect_app)) {
      std::string checkpoint = kTinyRandomCheckpoint;
      if (shared.config) checkpoint = resolve_config(shared.config, {}, log).checkpoint;
      if (inspect_checkpoint) checkpoint = *inspect_checkpoint;
      cmd_inspect(corpus_path, checkpoint, out);
    } else if (app.got_subcommand(baseline_app)) {
      cmd_baseline(train_path, input, output, log);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const RuntimeFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace persuade::cli
