#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace tgmc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

/// Fully resolved run description: defaults, then the config file, then
/// command-line overrides. Unknown keys are rejected when resolving.
class ExperimentConfig {
public:
  static ExperimentConfig resolve(const std::string& command, const std::string& file_text,
                                  const std::vector<std::pair<std::string, std::string>>& overrides,
                                  std::filesystem::path out_dir);

  const std::string& command() const { return command_; }
  const std::filesystem::path& out_dir() const { return out_dir_; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get(const std::string& key) const;
  double get_double(const std::string& key) const;
  long get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::vector<double> get_list(const std::string& key) const;

private:
  std::string command_;
  std::map<std::string, std::string> values_;
  std::filesystem::path out_dir_;
};

const std::vector<std::string>& known_commands();

/// Defaults for every key accepted by `command`. Throws InvalidArgument for
/// an unknown command.
std::map<std::string, std::string> default_config(const std::string& command);

/// Flat "key = value" text; '#' starts a comment. Throws InvalidArgument
/// on malformed lines or repeated keys.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);

/// Executes the command and writes <command>.csv and summary.json into the
/// output directory. Returns an exit code; error messages go to `err`.
int run(const ExperimentConfig& config, std::ostream& err);

/// `tgmc <command> [--config FILE] [--key value ...] --out DIR`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tgmc
