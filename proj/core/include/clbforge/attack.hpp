#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clbforge/elf_image.hpp"

namespace clbforge {

inline constexpr std::string_view kDefaultReplacement = "RIOT has been repackaged!";

struct StringSite {
  std::uint64_t offset = 0;
  std::string text;

  std::uint64_t length() const noexcept { return text.size(); }
  friend bool operator==(const StringSite&, const StringSite&) = default;
};

/// Maximal runs of bytes in [0x20, 0x7e] of at least `min_len` bytes, in
/// offset order, restricted to `within` when given.
std::vector<StringSite> find_strings(std::span<const std::uint8_t> bytes, std::size_t min_len,
                                     std::optional<FileRange> within = std::nullopt);

struct TamperEntry {
  std::uint64_t offset = 0;
  std::vector<std::uint8_t> original;
  std::vector<std::uint8_t> replacement;

  friend bool operator==(const TamperEntry&, const TamperEntry&) = default;
};

struct TamperReport {
  std::string mode;  // "strings" or "bytes"
  std::uint64_t seed = 0;
  std::vector<TamperEntry> entries;  // offset order, non-overlapping

  friend bool operator==(const TamperReport&, const TamperReport&) = default;
};

struct TamperResult {
  std::vector<std::uint8_t> bytes;
  TamperReport report;
};

/// `replacement` is space-padded or truncated to each site's length.
/// Throws Error{NotEnoughStrings}.
TamperResult tamper_strings(std::span<const std::uint8_t> bytes, std::uint64_t seed, std::size_t n,
                            std::size_t min_len, std::optional<FileRange> within = std::nullopt,
                            std::string_view replacement = kDefaultReplacement);

/// Flips n distinct bytes (xor 0xff) of the named section, skipping `exclude`.
/// Throws Error{UnknownSection|NotEnoughBytes}.
TamperResult tamper_bytes(const ExecutableImage& image, std::uint64_t seed, std::size_t n,
                          std::string_view section, std::span<const FileRange> exclude = {});

/// Writes every entry's original bytes back.
void restore(std::span<std::uint8_t> bytes, const TamperReport& report);

std::string tamper_report_to_json(const TamperReport& report);
/// Throws Error{InvalidReport}.
TamperReport tamper_report_from_json(const std::string& text);

}  // namespace clbforge
