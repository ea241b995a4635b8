#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace persuade {

/// Training hyperparameters: Adam at 5e-5, batch 16, 6 epochs, step decay
/// by 0.85 every 2 epochs unless overridden.
struct TrainConfig {
  double learning_rate = 5e-5;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 6;
  double scheduler_factor = 0.85;
  std::size_t scheduler_step = 2;
  std::size_t patience = 2;
  double dropout_rate = 0.1;
  std::size_t max_length = 128;
  double dev_fraction = 0.1;
  std::uint64_t seed = 42;
  bool use_class_weights = true;
  std::string checkpoint = "xlm-roberta-base";

  /// Throws ValidationError naming the offending field.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Every key accepted in config files (and as --key-with-dashes flags).
const std::vector<std::string>& config_keys();

/// Sets one field from its textual value; throws ValidationError on an
/// unknown key or unparsable value.
void set_config_value(TrainConfig& config, std::string_view key, std::string_view value);
std::string get_config_value(const TrainConfig& config, std::string_view key);

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Parses "key = value" lines; '#' starts a comment, blank lines are skipped.
std::vector<ConfigEntry> parse_config_text(std::string_view text, std::string_view source = "<config>");
std::vector<ConfigEntry> read_config_file(const std::filesystem::path& path);

/// Canonical "key = value" rendering of every field, in config_keys() order.
std::string to_config_text(const TrainConfig& config);

}  // namespace persuade
