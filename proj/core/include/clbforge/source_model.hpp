#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "clbforge/config.hpp"
#include "clbforge/lexer.hpp"

namespace clbforge {

enum class VarKind { ScalarInt, AddressValued, Other };

/// Coarse value class of a declaration, tracked even when `kind` is Other so
/// the QC operand can be checked for width.
enum class ValueClass { Narrow, Wide, Floating, Pointer, Unknown };

struct VarDecl {
  std::string name;
  ByteRange decl_span;
  ByteRange name_span;
  VarKind kind = VarKind::Other;
  ValueClass value_class = ValueClass::Unknown;
  /// Type with storage-class specifiers removed, e.g. "unsigned char" or "const char *".
  std::string type_text;
  /// Bytes where the name is visible: from the declarator to the end of the
  /// enclosing block. Parameters see the whole body.
  ByteRange scope;
  bool is_param = false;
};

std::string_view to_string(VarKind kind) noexcept;

struct FunctionDef {
  std::string name;
  ByteRange span;
  ByteRange body_span;  // includes the braces
  std::vector<VarDecl> params;
  std::vector<VarDecl> locals;
  /// Block-scope typedef names, tags and enumerators; only name and decl_span are set.
  std::vector<VarDecl> local_types;
};

using MacroTable = std::map<std::string, std::int32_t, std::less<>>;

/// Parsed source file. `code` indexes the tokens that are neither comments
/// nor preprocessor lines; `match` pairs brackets over code indices.
struct TranslationUnit {
  std::filesystem::path path;
  TokenStream tokens;
  std::vector<FunctionDef> functions;
  MacroTable macros;
  std::vector<VarDecl> globals;
  std::set<std::string, std::less<>> defined_macros;  // every #define'd name
  std::map<std::string, VarDecl, std::less<>> typedefs;

  std::vector<std::size_t> code;
  std::vector<std::size_t> match;

  const std::string& bytes() const noexcept { return tokens.source(); }
  std::string_view code_text(std::size_t ci) const { return tokens.text(code[ci]); }
  const Token& code_token(std::size_t ci) const { return tokens[code[ci]]; }
  std::size_t code_size() const noexcept { return code.size(); }
  /// First code index whose token starts at or after `offset`.
  std::size_t code_index_at(std::size_t offset) const;
};

/// Throws Error{UnbalancedBraces}. Never fails on constructs it does not model.
TranslationUnit parse_translation_unit(TokenStream tokens, std::filesystem::path path = {});

/// Object-like macros whose replacement is an integer constant expression of
/// literals. Redefinition or #undef removes the entry.
MacroTable collect_macros(const TranslationUnit& tu);

/// Evaluates an integer constant expression of literals (+ - * / % << >> & | ^ ~ unary -,
/// parentheses). Nullopt when not a constant or not representable in 32 bits.
std::optional<std::int32_t> evaluate_integer_expression(std::string_view text);

enum class ConstOrigin { Literal, Macro };

struct FreeVarUse {
  ByteRange span;
  std::size_t var;  // index into QualifiedCondition::free_vars
};

struct QualifiedCondition {
  std::uint32_t qc_id = 0;
  std::size_t function_index = 0;
  std::size_t if_offset = 0;
  ByteRange cond_span;  // between the parentheses of the if
  std::string var_expr;
  ByteRange var_span;
  std::int32_t const_value = 0;
  ConstOrigin const_origin = ConstOrigin::Literal;
  std::string const_text;
  ByteRange body_span;  // the then-branch statement
  bool body_braced = false;
  bool has_else = false;

  // Populated by check_eligibility.
  std::vector<VarDecl> free_vars;
  std::vector<FreeVarUse> free_var_uses;
  std::vector<ByteRange> ambiguous_uses;
};

std::vector<QualifiedCondition> find_qualified_conditions(const TranslationUnit& tu,
                                                          const MacroTable& macros,
                                                          const Config& cfg);

enum class SkipReason {
  ControlFlowEscape,
  UnsupportedVariable,
  ExternalLabelTarget,
  UnsupportedOperand,
  PreprocessorDirective,
  RewriteAmbiguity,
};

std::string_view to_string(SkipReason reason) noexcept;

struct Eligibility {
  bool eligible = false;
  SkipReason reason = SkipReason::ControlFlowEscape;
  std::string detail;

  static Eligibility ok() { return {true, SkipReason::ControlFlowEscape, {}}; }
  static Eligibility skip(SkipReason r, std::string d) { return {false, r, std::move(d)}; }
};

/// Populates qc.free_vars / free_var_uses / ambiguous_uses when eligible.
Eligibility check_eligibility(const TranslationUnit& tu, QualifiedCondition& qc);

/// tokenize + parse + collect_macros for one file's bytes.
TranslationUnit load_translation_unit(std::string_view bytes, std::filesystem::path path = {});

}  // namespace clbforge
