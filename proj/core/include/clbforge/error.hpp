#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace clbforge {

enum class ErrorCode {
  // lexing / parsing
  UnterminatedLiteral,
  UnterminatedComment,
  UnbalancedBraces,
  // transformation
  TooManyClbs,
  RewriteAmbiguity,
  OverlappingEdits,
  AlreadyProtected,
  NameCollision,
  // executable image
  NotElf,
  UnsupportedClassOrEndianness,
  MalformedElf,
  SymbolsRequired,
  MissingSymbol,
  DuplicateSymbol,
  ZeroSizeSymbol,
  SymbolOutsideText,
  OverlappingSpans,
  MissingPlaceholder,
  AmbiguousPlaceholder,
  // attack simulation
  NotEnoughStrings,
  NotEnoughBytes,
  UnknownSection,
  // harness
  InvalidConfig,
  InvalidKeymap,
  InvalidReport,
  CompilerFailed,
  ExecFailure,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library. `offset` is a byte offset into the
/// input when the error is positional, npos otherwise.
class Error : public std::runtime_error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  Error(ErrorCode code, const std::string& message, std::size_t offset = npos);

  ErrorCode code() const noexcept { return code_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  ErrorCode code_;
  std::size_t offset_;
};

}  // namespace clbforge
