#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "polard/engine.hpp"

namespace polard {

/// Invalid configuration. `path` is the dotted JSON path of the offending field
/// (for example "noise.c_p" or "space.dims[1].step").
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string path, const std::string& message);
  const std::string& path() const { return path_; }
  /// 1-based line in the source text, when known.
  std::optional<int> line;

 private:
  std::string path_;
};

/// Strict parse: unknown keys and type mismatches are errors. The result is validated.
SessionConfig session_config_from_json(const Json& j,
                                       const std::filesystem::path& base_dir = {});
Json session_config_to_json(const SessionConfig& cfg);

/// Throws ConfigError on the first invalid field; returns non-fatal warnings.
std::vector<std::string> validate_session_config(const SessionConfig& cfg);

struct ConfigFile {
  SessionConfig session;
  std::vector<std::uint64_t> seeds;
  std::optional<std::string> output_dir;
  std::vector<Condition> conditions;
  unsigned workers = 0;
  std::vector<std::string> warnings;
};

/// `base_dir` resolves relative paths such as grid_table files.
ConfigFile config_file_from_json(const Json& j, const std::filesystem::path& base_dir = {});

/// Reads and parses a config file; ConfigError carries the line of the failing field.
ConfigFile load_config_file(const std::filesystem::path& path);

/// Line of the key addressed by a dotted JSON path, found by scanning the text.
std::optional<int> line_of_path(std::string_view text, std::string_view path);

BenchmarkFunction load_grid_table(const std::filesystem::path& path);

}  // namespace polard
