#include "clbforge/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "clbforge/error.hpp"

namespace clbforge {

using nlohmann::json;

std::string_view to_string(RegionScope scope) noexcept {
  return scope == RegionScope::File ? "file" : "text";
}

void Config::validate() const {
  if (compiler.find("{inputs}") == std::string::npos || compiler.find("{output}") == std::string::npos)
    throw Error(ErrorCode::InvalidConfig, "compiler template needs {inputs} and {output}");
  if (detection_status < 0 || detection_status > 255)
    throw Error(ErrorCode::InvalidConfig, "detection_status must be in [0,255]");
  if (!(timeout_seconds >= 0.0))
    throw Error(ErrorCode::InvalidConfig, "timeout_seconds must be non-negative");
  if (min_key_bits > 32) throw Error(ErrorCode::InvalidConfig, "min_key_bits must be <= 32");
}

std::string config_to_json(const Config& cfg) {
  json j = {
      {"compiler", cfg.compiler},
      {"flags", cfg.flags},
      {"seed", cfg.seed},
      {"min_key_bits", cfg.min_key_bits},
      {"min_region_bytes", cfg.min_region_bytes},
      {"min_string_len", cfg.min_string_len},
      {"detection_status", cfg.detection_status},
      {"timeout_seconds", cfg.timeout_seconds},
      {"region_scope", std::string(to_string(cfg.region_scope))},
      {"include_globs", cfg.include_globs},
      {"exclude_globs", cfg.exclude_globs},
      {"macro_headers", cfg.macro_headers},
  };
  return j.dump(2);
}

Config config_from_json(const std::string& text) {
  Config cfg;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    auto get_unsigned = [&](const char* key, auto& field) {
      if (!j.contains(key)) return;
      const auto& v = j.at(key);
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw Error(ErrorCode::InvalidConfig, std::string(key) + " must be a non-negative integer");
      field = v.get<std::remove_reference_t<decltype(field)>>();
    };
    get("compiler", cfg.compiler);
    get("flags", cfg.flags);
    get_unsigned("seed", cfg.seed);
    get_unsigned("min_key_bits", cfg.min_key_bits);
    get_unsigned("min_region_bytes", cfg.min_region_bytes);
    get_unsigned("min_string_len", cfg.min_string_len);
    get("detection_status", cfg.detection_status);
    get("timeout_seconds", cfg.timeout_seconds);
    get("include_globs", cfg.include_globs);
    get("exclude_globs", cfg.exclude_globs);
    get("macro_headers", cfg.macro_headers);
    if (j.contains("region_scope")) {
      const auto scope = j.at("region_scope").get<std::string>();
      if (scope == "text") cfg.region_scope = RegionScope::Text;
      else if (scope == "file") cfg.region_scope = RegionScope::File;
      else throw Error(ErrorCode::InvalidConfig, "region_scope must be \"text\" or \"file\"");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  cfg.validate();
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void apply_environment(Config& cfg) {
  if (const char* cc = std::getenv("CLBFORGE_CC"); cc != nullptr && *cc != '\0') {
    cfg.compiler = cc;
    cfg.validate();
  }
}

}  // namespace clbforge
