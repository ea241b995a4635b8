#include "persuade/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "persuade/errors.hpp"

namespace persuade {
namespace {

std::string_view strip(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ValidationError(fmt::format("config '{}': cannot parse \"{}\"", key, value));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ValidationError(fmt::format("config '{}': expected a boolean, got \"{}\"", key, value));
}

}  // namespace

void TrainConfig::validate() const {
  const auto bad = [](std::string_view field, const std::string& why) {
    return ValidationError(fmt::format("invalid {}: {}", field, why));
  };
  if (!(learning_rate > 0.0)) throw bad("learning_rate", "must be positive");
  if (batch_size == 0) throw bad("batch_size", "must be positive");
  if (max_epochs == 0) throw bad("max_epochs", "must be positive");
  if (!(scheduler_factor > 0.0 && scheduler_factor <= 1.0)) throw bad("scheduler_factor", "must lie in (0, 1]");
  if (scheduler_step == 0) throw bad("scheduler_step", "must be positive");
  if (patience == 0) throw bad("patience", "must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw bad("dropout_rate", "must lie in [0, 1)");
  if (max_length < 2) throw bad("max_length", "must be at least 2");
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) throw bad("dev_fraction", "must lie in (0, 1)");
  if (checkpoint.empty()) throw bad("checkpoint", "must not be empty");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "learning_rate", "batch_size", "max_epochs", "scheduler_factor", "scheduler_step",    "patience",
      "dropout_rate",  "max_length", "dev_fraction", "seed",           "use_class_weights", "checkpoint"};
  return keys;
}

void set_config_value(TrainConfig& c, std::string_view key, std::string_view raw) {
  const std::string_view value = strip(raw);
  if (key == "learning_rate") c.learning_rate = parse_number<double>(key, value);
  else if (key == "batch_size") c.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "max_epochs") c.max_epochs = parse_number<std::size_t>(key, value);
  else if (key == "scheduler_factor") c.scheduler_factor = parse_number<double>(key, value);
  else if (key == "scheduler_step") c.scheduler_step = parse_number<std::size_t>(key, value);
  else if (key == "patience") c.patience = parse_number<std::size_t>(key, value);
  else if (key == "dropout_rate") c.dropout_rate = parse_number<double>(key, value);
  else if (key == "max_length") c.max_length = parse_number<std::size_t>(key, value);
  else if (key == "dev_fraction") c.dev_fraction = parse_number<double>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "use_class_weights") c.use_class_weights = parse_bool(key, value);
  else if (key == "checkpoint") c.checkpoint = std::string(value);
  else throw ValidationError(fmt::format("unknown config key '{}'", key));
}

std::string get_config_value(const TrainConfig& c, std::string_view key) {
  if (key == "learning_rate") return fmt::format("{}", c.learning_rate);
  if (key == "batch_size") return fmt::format("{}", c.batch_size);
  if (key == "max_epochs") return fmt::format("{}", c.max_epochs);
  if (key == "scheduler_factor") return fmt::format("{}", c.scheduler_factor);
  if (key == "scheduler_step") return fmt::format("{}", c.scheduler_step);
  if (key == "patience") return fmt::format("{}", c.patience);
  if (key == "dropout_rate") return fmt::format("{}", c.dropout_rate);
  if (key == "max_length") return fmt::format("{}", c.max_length);
  if (key == "dev_fraction") return fmt::format("{}", c.dev_fraction);
  if (key == "seed") return fmt::format("{}", c.seed);
  if (key == "use_class_weights") return c.use_class_weights ? "true" : "false";
  if (key == "checkpoint") return c.checkpoint;
  throw ValidationError(fmt::format("unknown config key '{}'", key));
}

std::vector<ConfigEntry> parse_config_text(std::string_view text, std::string_view source) {
  std::vector<ConfigEntry> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError(fmt::format("{}:{}: expected \"key = value\"", source, line_no));
    }
    ConfigEntry entry{std::string(strip(line.substr(0, eq))), std::string(strip(line.substr(eq + 1))), line_no};
    if (entry.key.empty()) throw ValidationError(fmt::format("{}:{}: missing key", source, line_no));
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::vector<ConfigEntry> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open config file '{}'", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path.string());
}

std::string to_config_text(const TrainConfig& config) {
  std::string out;
  for (const std::string& key : config_keys()) out += fmt::format("{} = {}\n", key, get_config_value(config, key));
  return out;
}

}  // namespace persuade
