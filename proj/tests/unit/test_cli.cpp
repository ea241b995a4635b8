#include <doctest.h>

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "persuade/cli.hpp"
#include "persuade/config.hpp"
#include "persuade/corpus.hpp"
#include "persuade/errors.hpp"
#include "persuade/predictions.hpp"

using namespace persuade;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

void write_corpus_file(const fs::path& path, const LabeledCorpus& corpus) { write_corpus(path, corpus); }

std::vector<std::string> tiny_train_args(const fs::path& train, const fs::path& out) {
  return {"train", "--train", train.string(), "--out", out.string(), "--checkpoint", "tiny-random",
          "--max-epochs", "2", "--batch-size", "8", "--max-length", "32", "--learning-rate", "1e-3", "--quiet"};
}

}  // namespace

TEST_CASE("config text round trip and validation") {
  TrainConfig config;
  config.learning_rate = 3.3e-5;
  config.use_class_weights = false;
  config.checkpoint = "some/model";
  TrainConfig parsed;
  for (const auto& e : parse_config_text(to_config_text(config))) set_config_value(parsed, e.key, e.value);
  CHECK(parsed == config);

  const auto entries = parse_config_text("# comment\n\nbatch_size = 4  # trailing\n  seed=9\n");
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].key == "batch_size");
  CHECK(entries[0].value == "4");
  CHECK(entries[0].line == 3);
  CHECK(entries[1].value == "9");

  CHECK_THROWS_AS(parse_config_text("no equals sign\n"), ValidationError);
  TrainConfig c;
  CHECK_THROWS_AS(set_config_value(c, "unknown_key", "1"), ValidationError);
  CHECK_THROWS_AS(set_config_value(c, "batch_size", "four"), ValidationError);
  for (const char* v : {"yes", "on", "1", "true"}) {
    set_config_value(c, "use_class_weights", v);
    CHECK(c.use_class_weights);
  }
  set_config_value(c, "use_class_weights", "off");
  CHECK_FALSE(c.use_class_weights);
  c.scheduler_factor = 1.5;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("config precedence is flag over file over default for every key") {
  const auto dir = testing::fresh_dir("cli-precedence");
  for (const std::string& key : config_keys()) {
    // Pick two distinct valid values per field.
    TrainConfig base;
    std::string file_value, flag_value;
    if (key == "use_class_weights") { file_value = "false"; flag_value = "true"; }
    else if (key == "checkpoint") { file_value = "a"; flag_value = "b"; }
    else if (key == "scheduler_factor" || key == "dropout_rate" || key == "dev_fraction") { file_value = "0.25"; flag_value = "0.5"; }
    else if (key == "learning_rate") { file_value = "0.001"; flag_value = "0.002"; }
    else { file_value = "3"; flag_value = "5"; }

    testing::write_file(dir / "c.txt", key + " = " + file_value + "\n");
    std::ostringstream log;
    const auto from_default = cli::resolve_config(std::nullopt, {}, log);
    const auto from_file = cli::resolve_config(dir / "c.txt", {}, log);
    CHECK(log.str().empty());
    const auto from_flag = cli::resolve_config(dir / "c.txt", {{key, flag_value}}, log);
    CHECK(get_config_value(from_default, key) == get_config_value(base, key));
    CHECK(get_config_value(from_file, key) == get_config_value([&] { TrainConfig t; set_config_value(t, key, file_value); return t; }(), key));
    CHECK(get_config_value(from_flag, key) == get_config_value([&] { TrainConfig t; set_config_value(t, key, flag_value); return t; }(), key));
    CHECK(contains(log.str(), "overrides config file value " + key));
  }
}

TEST_CASE("prediction file format") {
  const auto dir = testing::fresh_dir("cli-predictions");
  const std::vector<PredictionRow> rows{{"b", Label::True}, {"a", Label::False}};
  write_predictions(dir / "p.tsv", rows);
  CHECK(testing::read_file(dir / "p.tsv") == "id\tlabel\nb\ttrue\na\tfalse\n");
  CHECK(read_predictions(dir / "p.tsv") == rows);

  testing::write_file(dir / "dup.tsv", "id\tlabel\nx\ttrue\nx\tfalse\n");
  CHECK_THROWS_AS(read_predictions(dir / "dup.tsv"), ValidationError);
  testing::write_file(dir / "header.tsv", "id,label\nx\ttrue\n");
  CHECK_THROWS_AS(read_predictions(dir / "header.tsv"), ValidationError);
  testing::write_file(dir / "label.tsv", "id\tlabel\nx\tTrue\n");
  CHECK_THROWS_AS(read_predictions(dir / "label.tsv"), ValidationError);
}

TEST_CASE("score joins on id") {
  const auto dir = testing::fresh_dir("cli-score");
  testing::write_file(dir / "pred.tsv", "id\tlabel\na\ttrue\nb\ttrue\nc\tfalse\n");
  testing::write_file(dir / "gold.tsv", "id\tlabel\na\ttrue\nb\tfalse\nc\tfalse\n");
  testing::write_file(dir / "shuffled.tsv", "id\tlabel\nc\tfalse\na\ttrue\nb\ttrue\n");
  testing::write_file(dir / "gold.jsonl",
                      "{\"id\":\"a\",\"text\":\"x\",\"label\":\"true\"}\n{\"id\":\"b\",\"text\":\"x\",\"label\":\"false\"}\n"
                      "{\"id\":\"c\",\"text\":\"x\",\"label\":\"false\"}\n");

  const auto r = run_cli({"score", "--predictions", (dir / "pred.tsv").string(), "--gold", (dir / "gold.tsv").string()});
  CHECK(r.code == 0);
  CHECK(contains(r.out, "micro-F1 (both classes): 0.6667"));
  CHECK(contains(r.out, "binary F1 (positive class \"true\"): 0.6667"));

  const auto shuffled = run_cli({"score", "--predictions", (dir / "shuffled.tsv").string(), "--gold", (dir / "gold.jsonl").string()});
  CHECK(shuffled.out == r.out);

  const auto self = run_cli({"score", "--predictions", (dir / "gold.tsv").string(), "--gold", (dir / "gold.tsv").string()});
  CHECK(contains(self.out, "micro-F1 (both classes): 1.0000"));

  testing::write_file(dir / "short.tsv", "id\tlabel\na\ttrue\nz\tfalse\n");
  const auto mismatch = run_cli({"score", "--predictions", (dir / "short.tsv").string(), "--gold", (dir / "gold.tsv").string()});
  CHECK(mismatch.code == cli::kExitValidation);
  CHECK(contains(mismatch.err, "b"));
  CHECK(contains(mismatch.err, "z"));
}

TEST_CASE("inspect reports distribution, weights and lengths") {
  const auto dir = testing::fresh_dir("cli-inspect");
  std::vector<Snippet> snippets;
  for (int i = 0; i < 2427; ++i) {
    snippets.push_back({"s" + std::to_string(i), "w1 w2 w3", i < 1918 ? Label::True : Label::False, std::nullopt});
  }
  write_corpus_file(dir / "official-shape.jsonl", LabeledCorpus(snippets));
  const auto r = run_cli({"inspect", "--corpus", (dir / "official-shape.jsonl").string()});
  CHECK(r.code == 0);
  CHECK(contains(r.out, "2427 snippets; true: 1918 (79.0%); false: 509 (21.0%)"));
  CHECK(contains(r.out, "class weights (true / false): 0.6327 / 2.3841"));
  CHECK(contains(r.out, "p50 5"));

  testing::write_file(dir / "balanced.jsonl",
                      "{\"id\":\"1\",\"text\":\"a\",\"label\":\"true\"}\n{\"id\":\"2\",\"text\":\"b\",\"label\":\"false\"}\n"
                      "{\"id\":\"3\",\"text\":\"c\",\"label\":\"true\"}\n{\"id\":\"4\",\"text\":\"d\",\"label\":\"false\"}\n");
  CHECK(contains(run_cli({"inspect", "--corpus", (dir / "balanced.jsonl").string()}).out, "1.0000 / 1.0000"));

  testing::write_file(dir / "unlabeled.jsonl", "{\"id\":\"1\",\"text\":\"a\"}\n");
  CHECK(contains(run_cli({"inspect", "--corpus", (dir / "unlabeled.jsonl").string()}).out, "no labels present"));
}

TEST_CASE("baseline predicts the majority label") {
  const auto dir = testing::fresh_dir("cli-baseline");
  write_corpus_file(dir / "train.jsonl", testing::imbalanced_corpus(9, 3, 1));
  write_corpus_file(dir / "tied.jsonl", testing::separable_corpus(3, 1));
  testing::write_file(dir / "input.jsonl", "{\"id\":\"q\",\"text\":\"x\"}\n{\"id\":\"p\",\"text\":\"y\"}\n");
  testing::write_file(dir / "empty.jsonl", "");

  CHECK(run_cli({"baseline", "--train", (dir / "train.jsonl").string(), "--input", (dir / "input.jsonl").string(),
                 "--output", (dir / "out.tsv").string(), "--quiet"}).code == 0);
  CHECK(testing::read_file(dir / "out.tsv") == "id\tlabel\nq\ttrue\np\ttrue\n");

  CHECK(run_cli({"baseline", "--train", (dir / "tied.jsonl").string(), "--input", (dir / "input.jsonl").string(),
                 "--output", (dir / "tied.tsv").string()}).code == 0);
  CHECK(testing::read_file(dir / "tied.tsv") == "id\tlabel\nq\tfalse\np\tfalse\n");

  CHECK(run_cli({"baseline", "--train", (dir / "train.jsonl").string(), "--input", (dir / "empty.jsonl").string(),
                 "--output", (dir / "empty.tsv").string()}).code == 0);
  CHECK(testing::read_file(dir / "empty.tsv") == "id\tlabel\n");
}

TEST_CASE("train and predict end to end") {
  const auto dir = testing::fresh_dir("cli-train");
  write_corpus_file(dir / "train.jsonl", testing::separable_corpus(10, 2));

  const auto r = run_cli(tiny_train_args(dir / "train.jsonl", dir / "run"));
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "dev micro-F1"));
  const auto metrics = testing::read_file(dir / "run" / "metrics.tsv");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') <= 2);
  CHECK(fs::exists(dir / "run" / "best" / "metadata.json"));

  // 503 unlabeled rows, ids kept in input order.
  std::string input;
  for (int i = 0; i < 503; ++i) input += "{\"id\":\"t" + std::to_string(502 - i) + "\",\"text\":\"w" + std::to_string(i % 30) + " w101\"}\n";
  testing::write_file(dir / "test.jsonl", input);
  const auto best = (dir / "run" / "best").string();
  REQUIRE(run_cli({"predict", "--checkpoint", best, "--input", (dir / "test.jsonl").string(), "--output",
                   (dir / "p1.tsv").string(), "--quiet"}).code == 0);
  REQUIRE(run_cli({"predict", "--checkpoint", best, "--input", (dir / "test.jsonl").string(), "--output",
                   (dir / "p2.tsv").string(), "--batch-size", "7", "--quiet"}).code == 0);
  const auto rows = read_predictions(dir / "p1.tsv");
  REQUIRE(rows.size() == 503);
  CHECK(rows.front().id == "t502");
  CHECK(rows.back().id == "t0");
  CHECK(testing::read_file(dir / "p1.tsv") == testing::read_file(dir / "p2.tsv"));

  const auto self = run_cli({"score", "--predictions", (dir / "p1.tsv").string(), "--gold", (dir / "p2.tsv").string()});
  CHECK(contains(self.out, "micro-F1 (both classes): 1.0000"));
}

TEST_CASE("train logs unit weights when weighting is disabled") {
  const auto dir = testing::fresh_dir("cli-weights");
  write_corpus_file(dir / "imbalanced.jsonl", testing::imbalanced_corpus(180, 20, 7));
  auto args = tiny_train_args(dir / "imbalanced.jsonl", dir / "run");
  args.erase(std::find(args.begin(), args.end(), "--quiet"));
  args[std::find(args.begin(), args.end(), "--max-epochs") - args.begin() + 1] = "1";
  args.push_back("--use-class-weights=false");
  const auto r = run_cli(args);
  CHECK(r.code == 0);
  CHECK(contains(r.err, "class weights: true=1.000000 false=1.000000"));
}

TEST_CASE("flag overrides of a config file are logged") {
  const auto dir = testing::fresh_dir("cli-notice");
  write_corpus_file(dir / "train.jsonl", testing::separable_corpus(6, 2));
  testing::write_file(dir / "c.txt", "max_epochs = 4\ncheckpoint = tiny-random\n");
  auto args = tiny_train_args(dir / "train.jsonl", dir / "run");
  args.erase(std::find(args.begin(), args.end(), "--quiet"));
  args.push_back("--config");
  args.push_back((dir / "c.txt").string());
  const auto r = run_cli(args);
  CHECK(r.code == 0);
  CHECK(contains(r.err, "notice: --max-epochs 2 overrides config file value max_epochs = 4"));
}

TEST_CASE("errors map to exit codes and name the problem") {
  const auto dir = testing::fresh_dir("cli-errors");
  const auto missing = run_cli(tiny_train_args(dir / "absent.jsonl", dir / "run"));
  CHECK(missing.code == cli::kExitValidation);
  CHECK(contains(missing.err, (dir / "absent.jsonl").string()));

  testing::write_file(dir / "gap.jsonl", "{\"id\":\"1\",\"text\":\"a\"}\n{\"id\":\"2\",\"text\":\"\"}\n");
  write_corpus_file(dir / "train.jsonl", testing::separable_corpus(4, 1));
  CHECK(run_cli({"baseline", "--train", (dir / "train.jsonl").string(), "--input", (dir / "gap.jsonl").string(),
                 "--output", (dir / "o.tsv").string()}).code == cli::kExitValidation);
  const auto gap = run_cli({"predict", "--checkpoint", (dir / "nowhere").string(), "--input",
                            (dir / "gap.jsonl").string(), "--output", (dir / "o.tsv").string()});
  CHECK(gap.code == cli::kExitValidation);

  CHECK(run_cli({}).code == cli::kExitValidation);
  CHECK(run_cli({"frobnicate"}).code == cli::kExitValidation);
  CHECK(run_cli({"score", "--predictions"}).code == cli::kExitValidation);
}

TEST_CASE("predict names the line of an empty text") {
  const auto dir = testing::fresh_dir("cli-predict-line");
  write_corpus_file(dir / "train.jsonl", testing::separable_corpus(6, 2));
  REQUIRE(run_cli(tiny_train_args(dir / "train.jsonl", dir / "run")).code == 0);
  testing::write_file(dir / "gap.jsonl", "{\"id\":\"1\",\"text\":\"a\"}\n{\"id\":\"2\",\"text\":\"  \"}\n");
  const auto r = run_cli({"predict", "--checkpoint", (dir / "run" / "best").string(), "--input",
                          (dir / "gap.jsonl").string(), "--output", (dir / "o.tsv").string()});
  CHECK(r.code == cli::kExitValidation);
  CHECK(contains(r.err, "gap.jsonl:2"));
}
