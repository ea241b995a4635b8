#pragma once

#include <cstddef>
#include <filesystem>

#include "persuade/classifier.hpp"

namespace persuade {

inline constexpr int kLabelEncodingVersion = 1;

struct LoadedClassifier {
  ClassifierModel model;
  std::size_t max_length;
};

/// Writes config.json, model.safetensors (encoder + head), the tokenizer
/// vocabulary and metadata.json into dir.
void save_checkpoint(const ClassifierModel& model, std::size_t max_length,
                     const std::filesystem::path& dir);

/// Loads a directory written by save_checkpoint, head included. Throws
/// ValidationError on missing files or an unknown label encoding.
LoadedClassifier load_checkpoint(const std::filesystem::path& dir, std::uint64_t seed = 0);

/// Loads the encoder weights of a checkpoint directory: either one written by
/// save_checkpoint or a pretrained Hugging Face style directory
/// (config.json, model.safetensors, tokenizer.json).
Encoder load_encoder(const std::filesystem::path& dir);

/// Overwrites the parameters of model with those of source (same
/// architecture).
void copy_parameters(const ClassifierModel& source, ClassifierModel& target);

}  // namespace persuade
