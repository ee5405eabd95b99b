#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clbforge {

struct SectionInfo {
  std::string name;
  std::uint32_t type = 0;
  std::uint64_t flags = 0;
  std::uint64_t vaddr = 0;
  std::uint64_t file_offset = 0;
  std::uint64_t size = 0;
  bool executable = false;

  bool occupies_file() const noexcept;
};

struct SymbolInfo {
  std::string name;
  std::uint64_t vaddr = 0;
  std::uint64_t size = 0;
  std::uint16_t section_index = 0;
  std::uint8_t type = 0;  // STT_*
  std::uint8_t bind = 0;  // STB_*
};

/// File-offset range of a section or function.
struct FileRange {
  std::uint64_t offset = 0;
  std::uint64_t size = 0;

  std::uint64_t end() const noexcept { return offset + size; }
  friend bool operator==(const FileRange&, const FileRange&) = default;
};

/// A parsed 64-bit little-endian ELF executable. Owns its bytes; patching
/// mutates bytes() in place and never changes the file size.
class ExecutableImage {
 public:
  /// Throws Error{NotElf|UnsupportedClassOrEndianness|MalformedElf|SymbolsRequired}.
  static ExecutableImage load(std::vector<std::uint8_t> bytes);
  static ExecutableImage load_file(const std::filesystem::path& path);

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
  std::vector<std::uint8_t>& bytes() noexcept { return bytes_; }
  const std::vector<SectionInfo>& sections() const noexcept { return sections_; }
  const std::vector<SymbolInfo>& symbols() const noexcept { return symbols_; }
  std::size_t text_index() const noexcept { return text_index_; }
  const SectionInfo& text() const { return sections_.at(text_index_); }
  FileRange text_range() const;

  const SectionInfo* find_section(std::string_view name) const;
  std::vector<const SymbolInfo*> find_symbols(std::string_view name) const;
  std::optional<std::uint64_t> vaddr_to_offset(std::uint64_t vaddr) const;

 private:
  std::vector<std::uint8_t> bytes_;
  std::vector<SectionInfo> sections_;
  std::vector<SymbolInfo> symbols_;
  std::size_t text_index_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames, preserving `mode_from`'s permissions when given.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes,
                       const std::filesystem::path* mode_from = nullptr);

}  // namespace clbforge
