#include "clbforge/error.hpp"

namespace clbforge {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnterminatedLiteral: return "UnterminatedLiteral";
    case ErrorCode::UnterminatedComment: return "UnterminatedComment";
    case ErrorCode::UnbalancedBraces: return "UnbalancedBraces";
    case ErrorCode::TooManyClbs: return "TooManyClbs";
    case ErrorCode::RewriteAmbiguity: return "RewriteAmbiguity";
    case ErrorCode::OverlappingEdits: return "OverlappingEdits";
    case ErrorCode::AlreadyProtected: return "AlreadyProtected";
    case ErrorCode::NameCollision: return "NameCollision";
    case ErrorCode::NotElf: return "NotElf";
    case ErrorCode::UnsupportedClassOrEndianness: return "UnsupportedClassOrEndianness";
    case ErrorCode::MalformedElf: return "MalformedElf";
    case ErrorCode::SymbolsRequired: return "SymbolsRequired";
    case ErrorCode::MissingSymbol: return "MissingSymbol";
    case ErrorCode::DuplicateSymbol: return "DuplicateSymbol";
    case ErrorCode::ZeroSizeSymbol: return "ZeroSizeSymbol";
    case ErrorCode::SymbolOutsideText: return "SymbolOutsideText";
    case ErrorCode::OverlappingSpans: return "OverlappingSpans";
    case ErrorCode::MissingPlaceholder: return "MissingPlaceholder";
    case ErrorCode::AmbiguousPlaceholder: return "AmbiguousPlaceholder";
    case ErrorCode::NotEnoughStrings: return "NotEnoughStrings";
    case ErrorCode::NotEnoughBytes: return "NotEnoughBytes";
    case ErrorCode::UnknownSection: return "UnknownSection";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidKeymap: return "InvalidKeymap";
    case ErrorCode::InvalidReport: return "InvalidReport";
    case ErrorCode::CompilerFailed: return "CompilerFailed";
    case ErrorCode::ExecFailure: return "ExecFailure";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::size_t offset)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      offset_(offset) {}

}  // namespace clbforge
