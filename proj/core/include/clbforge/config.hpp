#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace clbforge {

/// Which byte range AT digest regions are carved from.
enum class RegionScope {
  Text,  // the .text section file range
  File,  // the whole executable file
};

struct Config {
  /// Placeholders: {inputs} {output} {flags}. Must contain {inputs} and {output}.
  std::string compiler = "cc {flags} -o {output} {inputs}";
  std::string flags = "-O0 -g";
  std::uint64_t seed = 0;
  unsigned min_key_bits = 0;
  std::size_t min_region_bytes = 16;
  std::size_t min_string_len = 8;
  int detection_status = 42;
  double timeout_seconds = 10.0;
  RegionScope region_scope = RegionScope::Text;
  std::vector<std::string> include_globs = {"*.c"};
  std::vector<std::string> exclude_globs;
  /// Project headers whose integer macros are visible to files that include them directly.
  std::vector<std::string> macro_headers;

  /// Throws Error{InvalidConfig}.
  void validate() const;
};

Config load_config(const std::filesystem::path& path);
std::string config_to_json(const Config& cfg);
Config config_from_json(const std::string& text);

/// Applies CLBFORGE_CC when set.
void apply_environment(Config& cfg);

std::string_view to_string(RegionScope scope) noexcept;

}  // namespace clbforge
