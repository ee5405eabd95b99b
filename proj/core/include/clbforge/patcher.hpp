#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clbforge/config.hpp"
#include "clbforge/elf_image.hpp"
#include "clbforge/keymap.hpp"

namespace clbforge {

struct FunctionSpan {
  const ClbRecord* record = nullptr;
  std::uint64_t offset = 0;
  std::uint64_t size = 0;

  FileRange range() const noexcept { return {offset, size}; }
};

/// Throws Error{MissingSymbol|DuplicateSymbol|ZeroSizeSymbol|SymbolOutsideText|OverlappingSpans}.
/// Result is in keymap order.
std::vector<FunctionSpan> locate_ext_functions(const ExecutableImage& image, const Keymap& keymap);

struct PlaceholderSites {
  std::uint64_t offset_site = 0;
  std::uint64_t count_site = 0;
  std::uint64_t control_site = 0;
  std::uint64_t len_site = 0;  // inside the caller

  friend bool operator==(const PlaceholderSites&, const PlaceholderSites&) = default;
};

/// Each magic must occur exactly once: the three AT magics in the ext_fun
/// span, len_magic across every symbol named like the caller.
/// Throws Error{MissingPlaceholder|AmbiguousPlaceholder|MissingSymbol|OverlappingSpans}.
PlaceholderSites locate_placeholders(const ExecutableImage& image, const FunctionSpan& span);

/// Phase A: writes each ext_fun's size over its len_magic site.
void patch_lengths(ExecutableImage& image, std::span<const FunctionSpan> spans,
                   std::span<const PlaceholderSites> sites);

enum class Direction { Forward, Backward };
std::string_view to_string(Direction d) noexcept;

/// Unprocessed ext_fun spans of the pipeline, bounded by the scope range.
class FrontierState {
 public:
  FrontierState(FileRange scope, std::vector<FileRange> unprocessed);

  /// Min start of the unprocessed spans, or the scope end when none remain.
  std::uint64_t low() const noexcept;
  /// Max end of the unprocessed spans, or the scope start when none remain.
  std::uint64_t high() const noexcept;
  bool empty() const noexcept { return spans_.empty(); }
  const std::vector<FileRange>& unprocessed() const noexcept { return spans_; }
  FileRange scope() const noexcept { return scope_; }

  FileRange pop_lowest();
  FileRange pop_highest();

 private:
  FileRange scope_;
  std::vector<FileRange> spans_;  // sorted by offset
};

struct RegionChoice {
  FileRange region;
  Direction direction = Direction::Forward;
  bool fell_back = false;   // the other direction was used
  bool undersized = false;  // both directions were below the threshold
};

RegionChoice select_region(const FrontierState& frontier, Direction direction, std::size_t min_region_bytes);

struct PatchEntry {
  std::uint32_t clb_id = 0;
  std::string symbol;
  FileRange span;
  PlaceholderSites sites;
  FileRange region;
  Digest32 digest;
  Direction direction = Direction::Forward;
  std::size_t step = 0;
  double coverage_after = 0.0;

  friend bool operator==(const PatchEntry&, const PatchEntry&) = default;
};

struct PatchReport {
  RegionScope scope = RegionScope::Text;
  FileRange text;
  FileRange scope_range;
  std::uint64_t file_size = 0;
  std::vector<PatchEntry> entries;  // keymap order
  double coverage = 0.0;            // |union of regions within .text| / .text size
  std::vector<std::string> warnings;

  friend bool operator==(const PatchReport&, const PatchReport&) = default;
};

/// Locates everything, runs Phase A, then the frontier pass. Works on a copy
/// and assigns it to `image` only on success.
PatchReport run_pipeline(ExecutableImage& image, const Keymap& keymap, const Config& cfg);

/// Union length of `regions` clipped to `bound`.
std::uint64_t covered_bytes(std::span<const FileRange> regions, FileRange bound);

struct VerifyEntry {
  std::uint32_t clb_id = 0;
  std::string symbol;
  bool pass = false;
  std::string detail;
  Digest32 stored;
  Digest32 recomputed;
};

struct VerifyReport {
  std::vector<VerifyEntry> entries;
  bool all_pass() const noexcept;
};

/// Decrypts each ext_fun with its key, reads the AT values from the sites the
/// patch report recorded and recomputes the digests over the file bytes.
VerifyReport verify(const ExecutableImage& image, const Keymap& keymap, const PatchReport& report);

std::string patch_report_to_json(const PatchReport& report);
/// Throws Error{InvalidReport}.
PatchReport patch_report_from_json(const std::string& text);
std::string verify_report_to_json(const VerifyReport& report);

}  // namespace clbforge
