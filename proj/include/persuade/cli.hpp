#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "persuade/config.hpp"
#include "persuade/metrics.hpp"
#include "persuade/trainer.hpp"

namespace persuade::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

struct TrainCommand {
  std::filesystem::path train_path;
  std::optional<std::filesystem::path> config_path;
  /// (key, value) pairs from command-line flags; they win over the file.
  std::vector<std::pair<std::string, std::string>> overrides;
  std::filesystem::path out_dir;
};

struct ScoreReport {
  ConfusionCounts counts;
  double micro_f1 = 0.0;
  double binary_f1_true = 0.0;
  PerClassReport per_class;
};

/// Defaults, then the config file, then flags. Each flag that replaces a
/// file value is reported through log.
TrainConfig resolve_config(const std::optional<std::filesystem::path>& config_path,
                           const std::vector<std::pair<std::string, std::string>>& overrides,
                           std::ostream& log);

TrainReport cmd_train(const TrainCommand& command, std::ostream& out, std::ostream& log);
void cmd_predict(const std::filesystem::path& checkpoint_dir, const std::filesystem::path& input,
                 const std::filesystem::path& output, std::size_t batch_size, std::ostream& log);
ScoreReport cmd_score(const std::filesystem::path& predictions, const std::filesystem::path& gold,
                      std::ostream& out);
void cmd_inspect(const std::filesystem::path& corpus_path, const std::string& checkpoint_id,
                 std::ostream& out);
void cmd_baseline(const std::filesystem::path& train_path, const std::filesystem::path& input,
                  const std::filesystem::path& output, std::ostream& log);

/// Parses argv-style arguments (without the program name), runs the command
/// and returns the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace persuade::cli
