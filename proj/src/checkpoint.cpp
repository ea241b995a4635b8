#include "persuade/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "persuade/errors.hpp"
#include "persuade/safetensors.hpp"

namespace persuade {
namespace {

constexpr const char* kFormat = "persuade-classifier";
constexpr int kFormatVersion = 1;
constexpr const char* kEncoderPrefix = "roberta.";

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text) || !out.flush()) throw RuntimeFailure(fmt::format("cannot write '{}'", path.string()));
}

safetensors::Tensor to_tensor(const Parameter& p) {
  std::vector<std::int64_t> shape;
  if (p.rank == 1) {
    shape = {p.value.size()};
  } else {
    shape = {p.value.rows(), p.value.cols()};
  }
  return {shape, p.value};
}

void assign(Parameter& p, const safetensors::Tensor& t, const std::string& key) {
  if (t.data.rows() != p.value.rows() || t.data.cols() != p.value.cols()) {
    throw ValidationError(fmt::format("tensor '{}' has shape {}x{}, expected {}x{}", key, t.data.rows(),
                                      t.data.cols(), p.value.rows(), p.value.cols()));
  }
  p.value = t.data;
}

std::map<std::string, safetensors::Tensor> read_weights(const std::filesystem::path& dir) {
  const auto file = dir / "model.safetensors";
  if (!std::filesystem::exists(file)) {
    throw ValidationError(fmt::format("'{}' has no model.safetensors (other weight formats are not supported)",
                                      dir.string()));
  }
  return safetensors::read(file);
}

Encoder encoder_from(const EncoderConfig& config, const std::map<std::string, safetensors::Tensor>& tensors,
                     const std::filesystem::path& dir) {
  // Pretrained exports may omit the "roberta." prefix.
  std::string prefix = kEncoderPrefix;
  if (!tensors.contains(prefix + "embeddings.word_embeddings.weight")) {
    if (!tensors.contains("embeddings.word_embeddings.weight")) {
      throw ValidationError(fmt::format("'{}' holds no encoder embedding tensors", dir.string()));
    }
    prefix.clear();
  }
  Rng scratch(0);
  Encoder encoder(config, scratch);
  std::vector<Parameter*> params;
  encoder.collect(params);
  for (Parameter* p : params) {
    const std::string key = prefix + p->name.substr(std::string(kEncoderPrefix).size());
    const auto it = tensors.find(key);
    if (it == tensors.end()) throw ValidationError(fmt::format("'{}' lacks tensor '{}'", dir.string(), key));
    assign(*p, it->second, key);
  }
  return encoder;
}

}  // namespace

void save_checkpoint(const ClassifierModel& model, std::size_t max_length, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw RuntimeFailure(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));

  std::map<std::string, safetensors::Tensor> tensors;
  for (const Parameter* p : model.parameters()) tensors.emplace(p->name, to_tensor(*p));
  safetensors::write(dir / "model.safetensors", tensors, {{"format", "pt"}});

  write_text(dir / "config.json", model.encoder_config().to_json().dump(2) + "\n");
  model.tokenizer().save(dir);

  nlohmann::ordered_json meta;
  meta["format"] = kFormat;
  meta["format_version"] = kFormatVersion;
  meta["label_encoding_version"] = kLabelEncodingVersion;
  meta["label_encoding"] = {{"false", 0}, {"true", 1}};
  meta["max_length"] = max_length;
  meta["dropout_rate"] = model.dropout_rate();
  meta["tokenizer"] = model.tokenizer().kind();
  write_text(dir / "metadata.json", meta.dump(2) + "\n");
}

Encoder load_encoder(const std::filesystem::path& dir) {
  const EncoderConfig config = EncoderConfig::from_json(read_json(dir / "config.json"));
  return encoder_from(config, read_weights(dir), dir);
}

LoadedClassifier load_checkpoint(const std::filesystem::path& dir, std::uint64_t seed) {
  if (!std::filesystem::is_directory(dir)) {
    throw ValidationError(fmt::format("checkpoint directory '{}' does not exist", dir.string()));
  }
  const nlohmann::json meta = read_json(dir / "metadata.json");
  const auto mismatch = [&](const std::string& what) {
    return ValidationError(fmt::format("checkpoint/metadata mismatch in '{}': {}", dir.string(), what));
  };
  if (meta.value("format", "") != kFormat) throw mismatch("not a fine-tuned classifier checkpoint");
  if (meta.value("label_encoding_version", -1) != kLabelEncodingVersion) {
    throw mismatch(fmt::format("unknown label encoding version {}", meta.value("label_encoding_version", -1)));
  }
  const nlohmann::json expected_encoding = {{"false", 0}, {"true", 1}};
  if (meta.value("label_encoding", nlohmann::json()) != expected_encoding) throw mismatch("unexpected label encoding");

  std::size_t max_length = 0;
  double dropout_rate = 0.0;
  try {
    max_length = meta.at("max_length").get<std::size_t>();
    dropout_rate = meta.at("dropout_rate").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw mismatch(e.what());
  }

  const EncoderConfig config = EncoderConfig::from_json(read_json(dir / "config.json"));
  const auto tensors = read_weights(dir);
  ClassifierModel model(encoder_from(config, tensors, dir), load_tokenizer(dir), dropout_rate, seed);
  for (Parameter* p : {&model.head().weight, &model.head().bias}) {
    const auto it = tensors.find(p->name);
    if (it == tensors.end()) throw mismatch(fmt::format("missing head tensor '{}'", p->name));
    assign(*p, it->second, p->name);
  }
  model.eval();
  return {std::move(model), max_length};
}

void copy_parameters(const ClassifierModel& source, ClassifierModel& target) {
  const auto from = source.parameters();
  const auto to = target.parameters();
  if (from.size() != to.size()) throw ValidationError("parameter sets differ in size");
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i]->name != to[i]->name || from[i]->value.rows() != to[i]->value.rows() ||
        from[i]->value.cols() != to[i]->value.cols()) {
      throw ValidationError(fmt::format("parameter '{}' does not match '{}'", from[i]->name, to[i]->name));
    }
    to[i]->value = from[i]->value;
  }
}

}  // namespace persuade
