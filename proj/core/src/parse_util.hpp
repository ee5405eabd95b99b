#pragma once

// Helpers shared by the translation-unit parser and the QC scanner. All
// indices are code indices (see TranslationUnit::code).

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "clbforge/source_model.hpp"

namespace clbforge::detail {

inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

bool is_type_keyword(std::string_view w) noexcept;
bool is_storage_or_qualifier(std::string_view w) noexcept;
bool is_builtin_typedef(std::string_view w) noexcept;

/// Index of the first `needle` at bracket depth 0 in [from, to), or `to`.
std::size_t find_at_depth0(const TranslationUnit& tu, std::size_t from, std::size_t to,
                           std::string_view needle);

/// One past the last code index of the statement starting at `ci`, clamped to `limit`.
std::size_t statement_end(const TranslationUnit& tu, std::size_t ci, std::size_t limit);

struct ParsedDeclaration {
  bool is_typedef = false;
  bool defines_aggregate = false;  // struct/union/enum body present
  std::vector<VarDecl> vars;       // declarators (typedef names when is_typedef)
  std::vector<std::string> tags_and_enumerators;
};

/// Classifies [b, e) as a declaration. Returns nullopt when the range does not
/// start like one. Function declarators are dropped from `vars`.
std::optional<ParsedDeclaration> parse_declaration(const TranslationUnit& tu, std::size_t b,
                                                   std::size_t e, bool is_param);

/// Heuristic used inside function bodies where expressions and declarations mix.
bool looks_like_declaration(const TranslationUnit& tu, std::size_t ci, std::size_t limit);

}  // namespace clbforge::detail
