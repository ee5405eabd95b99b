#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "clbforge/crypto.hpp"

namespace clbforge {

inline constexpr std::uint32_t kOffsetMagic = 0x0ff53701u;
inline constexpr std::uint32_t kCountMagic = 0xb17e5010u;
inline constexpr std::uint32_t kControlMagic = 0x89abcdefu;
inline constexpr std::uint32_t kLenMagicBase = 0xc0de0000u;
inline constexpr std::uint32_t kMaxClbs = 65536;

inline constexpr const char* kToolchainVersion = "clbforge 0.3.0";
inline constexpr const char* kKeymapFormat = "clbforge-keymap/1";

/// Per-CLB secret material.
struct ClbRecord {
  std::uint32_t clb_id = 0;
  std::string file;  // path relative to the source root, '/'-separated
  std::size_t offset = 0;
  std::string caller_symbol;
  std::string ext_symbol;
  Key32 key;
  Salt4 salt;
  Digest32 hconst;
  std::uint32_t len_magic = 0;

  friend bool operator==(const ClbRecord&, const ClbRecord&) = default;
};

std::string ext_symbol_name(std::uint32_t clb_id, std::string_view caller);
std::uint32_t len_magic_for(std::uint32_t clb_id);

struct Keymap {
  std::string version = kToolchainVersion;
  std::string hash = "fnv1a32";
  std::string cipher = "xor32";
  std::uint64_t seed = 0;
  std::vector<ClbRecord> records;

  friend bool operator==(const Keymap&, const Keymap&) = default;
};

std::string keymap_to_json(const Keymap& km);
/// Throws Error{InvalidKeymap} on schema violations or when a record's hconst
/// does not match cond_hash(key, salt).
Keymap keymap_from_json(const std::string& text);

Keymap load_keymap(const std::filesystem::path& path);
void save_keymap(const Keymap& km, const std::filesystem::path& path);

std::string hex32(std::uint32_t v);
std::uint32_t parse_hex32(const std::string& s);

}  // namespace clbforge
