#include "clbforge/source_model.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <limits>

#include "clbforge/error.hpp"
#include "parse_util.hpp"

namespace clbforge {

std::string_view to_string(VarKind kind) noexcept {
  switch (kind) {
    case VarKind::ScalarInt: return "scalar-int";
    case VarKind::AddressValued: return "address-valued";
    case VarKind::Other: return "other";
  }
  return "other";
}

std::size_t TranslationUnit::code_index_at(std::size_t offset) const {
  auto it = std::lower_bound(code.begin(), code.end(), offset, [&](std::size_t ti, std::size_t off) {
    return tokens[ti].span.begin < off;
  });
  return static_cast<std::size_t>(it - code.begin());
}

namespace detail {
namespace {

constexpr std::array<std::string_view, 12> kTypeKeywords = {
    "void", "char", "short", "int", "long", "signed", "unsigned", "_Bool", "bool", "float",
    "double", "_Complex"};

constexpr std::array<std::string_view, 14> kStorageQualifiers = {
    "static",   "extern",   "register", "auto",     "typedef",      "inline",    "__inline__",
    "_Noreturn", "_Thread_local", "const", "volatile", "restrict", "__extension__", "_Atomic"};

constexpr std::array<std::string_view, 12> kNarrowTypedefs = {
    "int8_t",        "uint8_t",       "int16_t",      "uint16_t",     "int32_t",       "uint32_t",
    "int_least8_t",  "uint_least8_t", "int_least16_t", "uint_least16_t", "int_least32_t",
    "uint_least32_t"};

constexpr std::array<std::string_view, 20> kWideTypedefs = {
    "int64_t",       "uint64_t",      "size_t",        "ssize_t",       "off_t",
    "intptr_t",      "uintptr_t",     "ptrdiff_t",     "time_t",        "intmax_t",
    "uintmax_t",     "int_least64_t", "uint_least64_t", "int_fast16_t", "uint_fast16_t",
    "int_fast32_t",  "uint_fast32_t", "int_fast64_t",  "uint_fast64_t", "off64_t"};

template <std::size_t N>
bool in(const std::array<std::string_view, N>& set, std::string_view w) {
  return std::find(set.begin(), set.end(), w) != set.end();
}

bool is_identifier(const TranslationUnit& tu, std::size_t ci) {
  return ci < tu.code_size() && tu.code_token(ci).kind == TokenKind::Identifier;
}

bool is_plain_identifier(const TranslationUnit& tu, std::size_t ci) {
  return is_identifier(tu, ci) && !is_c_keyword(tu.code_text(ci));
}

std::string_view text_at(const TranslationUnit& tu, std::size_t ci) {
  return ci < tu.code_size() ? tu.code_text(ci) : std::string_view{};
}

std::size_t skip_attribute(const TranslationUnit& tu, std::size_t ci, std::size_t e) {
  // __attribute__((...)) / __declspec(...) / __asm__("...")
  const auto w = text_at(tu, ci);
  if ((w == "__attribute__" || w == "__asm__" || w == "asm" || w == "__declspec") && ci + 1 < e &&
      text_at(tu, ci + 1) == "(" && tu.match[ci + 1] != npos && tu.match[ci + 1] < e)
    return tu.match[ci + 1] + 1;
  return ci;
}

std::string join_tokens(const TranslationUnit& tu, const std::vector<std::size_t>& idx) {
  std::string out;
  for (auto ci : idx) {
    if (!out.empty()) out += ' ';
    out += tu.code_text(ci);
  }
  return out;
}

}  // namespace

bool is_type_keyword(std::string_view w) noexcept { return in(kTypeKeywords, w); }
bool is_storage_or_qualifier(std::string_view w) noexcept { return in(kStorageQualifiers, w); }
bool is_builtin_typedef(std::string_view w) noexcept {
  return in(kNarrowTypedefs, w) || in(kWideTypedefs, w) || w == "int_fast8_t" ||
         w == "uint_fast8_t";
}

std::size_t find_at_depth0(const TranslationUnit& tu, std::size_t from, std::size_t to,
                           std::string_view needle) {
  std::size_t ci = from;
  while (ci < to) {
    const auto t = tu.code_text(ci);
    if (t == needle) return ci;
    if ((t == "(" || t == "[" || t == "{") && tu.match[ci] != npos && tu.match[ci] < to) {
      ci = tu.match[ci] + 1;
      continue;
    }
    ++ci;
  }
  return to;
}

std::size_t statement_end(const TranslationUnit& tu, std::size_t ci, std::size_t limit) {
  if (ci >= limit) return limit;
  const auto t = tu.code_text(ci);
  auto after_parens = [&](std::size_t open) -> std::size_t {
    if (open < limit && tu.code_text(open) == "(" && tu.match[open] != npos && tu.match[open] < limit)
      return tu.match[open] + 1;
    return limit;
  };
  if (t == "{") {
    const auto m = tu.match[ci];
    return (m == npos || m >= limit) ? limit : m + 1;
  }
  if (t == ";") return ci + 1;
  if (t == "if") {
    const auto then_begin = after_parens(ci + 1);
    const auto then_end = statement_end(tu, then_begin, limit);
    if (then_end < limit && tu.code_text(then_end) == "else")
      return statement_end(tu, then_end + 1, limit);
    return then_end;
  }
  if (t == "for" || t == "while" || t == "switch") return statement_end(tu, after_parens(ci + 1), limit);
  if (t == "do") {
    const auto body_end = statement_end(tu, ci + 1, limit);
    if (body_end < limit && tu.code_text(body_end) == "while") {
      const auto cond_end = after_parens(body_end + 1);
      if (cond_end < limit && tu.code_text(cond_end) == ";") return cond_end + 1;
      return cond_end;
    }
    return body_end;
  }
  if (t == "case") {
    const auto colon = find_at_depth0(tu, ci + 1, limit, ":");
    return colon < limit ? statement_end(tu, colon + 1, limit) : limit;
  }
  if (t == "default" && text_at(tu, ci + 1) == ":") return statement_end(tu, ci + 2, limit);
  if (is_plain_identifier(tu, ci) && text_at(tu, ci + 1) == ":" && ci + 1 < limit)
    return statement_end(tu, ci + 2, limit);
  const auto semi = find_at_depth0(tu, ci, limit, ";");
  return semi < limit ? semi + 1 : limit;
}

bool looks_like_declaration(const TranslationUnit& tu, std::size_t ci, std::size_t limit) {
  const auto w = text_at(tu, ci);
  if (is_type_keyword(w) || is_storage_or_qualifier(w) || w == "struct" || w == "union" ||
      w == "enum" || w == "__attribute__")
    return true;
  if (!is_plain_identifier(tu, ci)) return false;
  if (is_builtin_typedef(w) || tu.typedefs.count(w) != 0) {
    // `size_t n` but not `size_t(...)`-like expressions.
    return ci + 1 < limit && (is_identifier(tu, ci + 1) || text_at(tu, ci + 1) == "*");
  }
  if (ci + 1 >= limit) return false;
  const auto next = text_at(tu, ci + 1);
  if (is_plain_identifier(tu, ci + 1) || next == "const" || next == "volatile") return true;
  if (next == "*") {
    std::size_t k = ci + 1;
    while (k < limit && (text_at(tu, k) == "*" || text_at(tu, k) == "const")) ++k;
    if (!is_plain_identifier(tu, k)) return false;
    const auto after = text_at(tu, k + 1);
    return after == ";" || after == "=" || after == "," || after == "[";
  }
  return false;
}

std::optional<ParsedDeclaration> parse_declaration(const TranslationUnit& tu, std::size_t b,
                                                   std::size_t e, bool is_param) {
  ParsedDeclaration out;
  std::vector<std::size_t> base;  // type tokens kept in type_text
  bool has_base = false;
  bool is_register = false;
  bool is_float = false;
  bool is_long = false;
  bool is_void = false;
  bool is_aggregate = false;
  bool is_enum = false;
  std::optional<VarDecl> typedef_base;
  bool builtin_wide = false;
  bool builtin_narrow = false;
  bool unknown_typedef = false;

  std::size_t ci = b;
  while (ci < e) {
    const auto skipped = skip_attribute(tu, ci, e);
    if (skipped != ci) {
      ci = skipped;
      continue;
    }
    const auto w = tu.code_text(ci);
    if (w == "typedef") {
      out.is_typedef = true;
      ++ci;
    } else if (w == "register") {
      is_register = true;
      ++ci;
    } else if (w == "static" || w == "extern" || w == "auto" || w == "inline" || w == "__inline__" ||
               w == "_Noreturn" || w == "_Thread_local" || w == "__extension__") {
      ++ci;
    } else if (w == "const" || w == "volatile" || w == "restrict" || w == "_Atomic") {
      base.push_back(ci++);
    } else if (is_type_keyword(w)) {
      has_base = true;
      if (w == "float" || w == "double" || w == "_Complex") is_float = true;
      if (w == "long") is_long = true;
      if (w == "void") is_void = true;
      base.push_back(ci++);
    } else if (w == "struct" || w == "union" || w == "enum") {
      has_base = true;
      (w == "enum" ? is_enum : is_aggregate) = true;
      base.push_back(ci++);
      if (ci < e && is_plain_identifier(tu, ci)) {
        out.tags_and_enumerators.emplace_back(tu.code_text(ci));
        base.push_back(ci++);
      } else {
        out.tags_and_enumerators.clear();
      }
      if (ci < e && tu.code_text(ci) == "{" && tu.match[ci] != npos && tu.match[ci] < e) {
        out.defines_aggregate = true;
        if (is_enum) {
          // enumerators: identifiers directly after `{` or `,`
          for (std::size_t k = ci + 1; k < tu.match[ci]; ++k) {
            const auto prev = tu.code_text(k - 1);
            if ((prev == "{" || prev == ",") && is_plain_identifier(tu, k))
              out.tags_and_enumerators.emplace_back(tu.code_text(k));
          }
        }
        ci = tu.match[ci] + 1;
      }
    } else if (!has_base && is_plain_identifier(tu, ci)) {
      // A typedef name only when a declarator follows (or an unnamed parameter).
      const bool declarator_follows =
          ci + 1 < e && (is_plain_identifier(tu, ci + 1) || tu.code_text(ci + 1) == "*" ||
                         tu.code_text(ci + 1) == "const" || tu.code_text(ci + 1) == "volatile" ||
                         tu.code_text(ci + 1) == "(" || tu.code_text(ci + 1) == "__attribute__");
      if (!declarator_follows && !(is_param && ci + 1 == e)) break;
      has_base = true;
      if (in(kWideTypedefs, w) || w == "int_fast8_t" || w == "uint_fast8_t") {
        builtin_wide = !(w == "int_fast8_t" || w == "uint_fast8_t");
        builtin_narrow = !builtin_wide;
      } else if (in(kNarrowTypedefs, w)) {
        builtin_narrow = true;
      } else if (auto it = tu.typedefs.find(w); it != tu.typedefs.end()) {
        typedef_base = it->second;
      } else {
        unknown_typedef = true;
      }
      base.push_back(ci++);
    } else {
      break;
    }
  }
  if (!has_base) {
    // `const x` / `unsigned` alone are still base types.
    if (base.empty()) return std::nullopt;
  }

  const std::string base_text = join_tokens(tu, base);
  if (ci >= e) {
    // Declaration without declarators, e.g. `struct s { ... };` or an unnamed parameter.
    return out;
  }

  // Split declarators by top-level commas.
  std::vector<std::pair<std::size_t, std::size_t>> parts;
  std::size_t start = ci;
  while (start < e) {
    const auto comma = find_at_depth0(tu, start, e, ",");
    parts.emplace_back(start, comma);
    start = comma + 1;
  }
  const bool multi = parts.size() > 1;

  for (auto [db, de] : parts) {
    VarDecl v;
    v.is_param = is_param;
    std::size_t k = db;
    int stars = 0;
    std::string ptr_text;
    while (k < de) {
      const auto skipped = skip_attribute(tu, k, de);
      if (skipped != k) {
        k = skipped;
        continue;
      }
      const auto w = tu.code_text(k);
      if (w == "*") {
        ++stars;
        ptr_text += " *";
        ++k;
      } else if (w == "const" || w == "volatile" || w == "restrict" || w == "__restrict" ||
                 w == "__restrict__") {
        if (stars > 0) {
          ptr_text += ' ';
          ptr_text += w;
        }
        ++k;
      } else {
        break;
      }
    }
    bool complex_declarator = false;
    std::size_t name_ci = npos;
    if (k < de && tu.code_text(k) == "(") {
      // Parenthesized declarator (function pointer, pointer to array).
      complex_declarator = true;
      for (std::size_t q = k + 1; q < de && q < tu.match[k]; ++q)
        if (is_plain_identifier(tu, q)) {
          name_ci = q;
          break;
        }
      if (tu.match[k] != npos) k = tu.match[k] + 1;
    } else if (k < de && is_plain_identifier(tu, k)) {
      name_ci = k++;
    }
    if (name_ci == npos) continue;  // abstract declarator

    bool is_array = false;
    bool is_function = false;
    while (k < de) {
      const auto skipped = skip_attribute(tu, k, de);
      if (skipped != k) {
        k = skipped;
        continue;
      }
      const auto w = tu.code_text(k);
      if (w == "[") {
        is_array = true;
        k = tu.match[k] == npos ? de : tu.match[k] + 1;
      } else if (w == "(") {
        if (!complex_declarator) is_function = true;
        k = tu.match[k] == npos ? de : tu.match[k] + 1;
      } else {
        break;
      }
    }
    if (is_function && !out.is_typedef) continue;  // prototype, not an object

    v.name = std::string(tu.code_text(name_ci));
    v.name_span = tu.code_token(name_ci).span;
    v.decl_span = {tu.code_token(b).span.begin, tu.code_token(e - 1).span.end};
    v.type_text = base_text + ptr_text;

    if (complex_declarator || is_function) {
      v.kind = VarKind::Other;
      v.value_class = ValueClass::Unknown;
    } else if (is_array && is_param && stars == 0) {
      v.kind = VarKind::AddressValued;
      v.value_class = ValueClass::Pointer;
      v.type_text = base_text + " *";
    } else if (is_array) {
      v.kind = VarKind::Other;
      v.value_class = ValueClass::Unknown;
    } else if (stars > 0) {
      v.kind = VarKind::AddressValued;
      v.value_class = ValueClass::Pointer;
    } else if (typedef_base) {
      v.kind = typedef_base->kind;
      v.value_class = typedef_base->value_class;
    } else if (builtin_wide) {
      v.kind = VarKind::ScalarInt;
      v.value_class = ValueClass::Wide;
    } else if (builtin_narrow) {
      v.kind = VarKind::ScalarInt;
      v.value_class = ValueClass::Narrow;
    } else if (unknown_typedef || is_aggregate) {
      v.kind = VarKind::Other;
      v.value_class = ValueClass::Unknown;
    } else if (is_float) {
      v.kind = VarKind::Other;
      v.value_class = ValueClass::Floating;
    } else if (is_void) {
      continue;
    } else {
      v.kind = VarKind::ScalarInt;
      v.value_class = is_long ? ValueClass::Wide : ValueClass::Narrow;
    }
    // Only 32-bit-or-narrower integers and pointers are passed by address.
    if (v.kind == VarKind::ScalarInt && v.value_class == ValueClass::Wide) {
      // Wide integers stay scalar-int; the QC operand check rejects them separately.
    }
    if (is_register || multi) v.kind = VarKind::Other;
    out.vars.push_back(std::move(v));
  }
  return out;
}

}  // namespace detail

namespace {

using detail::npos;

std::vector<std::size_t> build_code_index(const TokenStream& ts) {
  std::vector<std::size_t> code;
  code.reserve(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto k = ts[i].kind;
    if (k != TokenKind::Comment && k != TokenKind::Directive) code.push_back(i);
  }
  return code;
}

std::vector<std::size_t> build_matches(const TranslationUnit& tu) {
  std::vector<std::size_t> match(tu.code_size(), npos);
  std::vector<std::size_t> braces, parens, brackets;
  for (std::size_t ci = 0; ci < tu.code_size(); ++ci) {
    if (tu.code_token(ci).kind != TokenKind::Punct) continue;
    const auto t = tu.code_text(ci);
    auto close = [&](std::vector<std::size_t>& stack) {
      if (stack.empty()) return false;
      match[ci] = stack.back();
      match[stack.back()] = ci;
      stack.pop_back();
      return true;
    };
    if (t == "{") braces.push_back(ci);
    else if (t == "(") parens.push_back(ci);
    else if (t == "[") brackets.push_back(ci);
    else if (t == "}") {
      if (!close(braces))
        throw Error(ErrorCode::UnbalancedBraces, "unmatched '}'", tu.code_token(ci).span.begin);
    } else if (t == ")") close(parens);
    else if (t == "]") close(brackets);
  }
  if (!braces.empty())
    throw Error(ErrorCode::UnbalancedBraces, "unclosed '{'", tu.code_token(braces.back()).span.begin);
  return match;
}

class BodyScanner {
 public:
  BodyScanner(const TranslationUnit& tu, FunctionDef& fn) : tu_(tu), fn_(fn) {}

  void scan(std::size_t open, std::size_t close) {
    std::vector<std::size_t> block_ends{tu_.code_token(close).span.end};
    bool stmt_start = true;
    std::size_t ci = open + 1;
    while (ci < close) {
      const auto t = tu_.code_text(ci);
      if (t == "{") {
        block_ends.push_back(tu_.code_token(tu_.match[ci]).span.end);
        stmt_start = true;
        ++ci;
        continue;
      }
      if (t == "}") {
        if (block_ends.size() > 1) block_ends.pop_back();
        stmt_start = true;
        ++ci;
        continue;
      }
      if (t == ";") {
        stmt_start = true;
        ++ci;
        continue;
      }
      if (stmt_start) {
        if (t == "case") {
          ci = detail::find_at_depth0(tu_, ci + 1, close, ":") + 1;
          continue;
        }
        if (t == "default" && tu_.code_text(ci + 1) == ":") {
          ci += 2;
          continue;
        }
        if (tu_.code_token(ci).kind == TokenKind::Identifier && !is_c_keyword(t) &&
            tu_.code_text(ci + 1) == ":") {
          ci += 2;
          continue;
        }
        if (t == "for" && tu_.code_text(ci + 1) == "(" && tu_.match[ci + 1] != npos) {
          const auto lp = ci + 1;
          const auto rp = tu_.match[lp];
          const auto semi = detail::find_at_depth0(tu_, lp + 1, rp, ";");
          if (semi < rp && detail::looks_like_declaration(tu_, lp + 1, semi)) {
            const auto stmt_end = detail::statement_end(tu_, ci, close);
            const auto scope_end = tu_.code_token(stmt_end - 1).span.end;
            record(lp + 1, semi, scope_end);
          }
          ci = rp + 1;
          stmt_start = true;
          continue;
        }
        if ((t == "if" || t == "while" || t == "switch") && tu_.code_text(ci + 1) == "(" &&
            tu_.match[ci + 1] != npos) {
          ci = tu_.match[ci + 1] + 1;
          stmt_start = true;
          continue;
        }
        if (t == "else" || t == "do") {
          ++ci;
          stmt_start = true;
          continue;
        }
        if (detail::looks_like_declaration(tu_, ci, close)) {
          const auto semi = detail::find_at_depth0(tu_, ci, close, ";");
          if (record(ci, semi, block_ends.back())) {
            ci = semi + 1;
            stmt_start = true;
            continue;
          }
        }
        stmt_start = false;
      }
      if ((t == "(" || t == "[") && tu_.match[ci] != npos && tu_.match[ci] < close) {
        ci = tu_.match[ci] + 1;
        continue;
      }
      ++ci;
    }
  }

 private:
  bool record(std::size_t b, std::size_t e, std::size_t scope_end) {
    if (b >= e) return false;
    auto decl = detail::parse_declaration(tu_, b, e, false);
    if (!decl) return false;
    const ByteRange span{tu_.code_token(b).span.begin, tu_.code_token(e - 1).span.end};
    for (auto& v : decl->vars) {
      if (decl->is_typedef) {
        VarDecl t;
        t.name = v.name;
        t.decl_span = span;
        fn_.local_types.push_back(std::move(t));
        continue;
      }
      v.scope = {v.name_span.begin, scope_end};
      fn_.locals.push_back(std::move(v));
    }
    if (decl->defines_aggregate)
      for (auto& name : decl->tags_and_enumerators)
      {
        VarDecl t;
        t.name = name;
        t.decl_span = span;
        fn_.local_types.push_back(std::move(t));
      }
    return true;
  }

  const TranslationUnit& tu_;
  FunctionDef& fn_;
};

std::size_t attribute_start_before(const TranslationUnit& tu, std::size_t ci) {
  // Walks back over `__attribute__((...))` groups ending at ci.
  while (ci != npos && ci > 0 && tu.code_text(ci) == ")" && tu.match[ci] != npos) {
    const auto open = tu.match[ci];
    if (open == 0 || tu.code_text(open - 1) != "__attribute__") break;
    ci = open - 2;
  }
  return ci;
}

}  // namespace

namespace {
void scan_defines(const TokenStream& ts, MacroTable* table_out,
                  std::set<std::string, std::less<>>* names_out);
}  // namespace

TranslationUnit parse_translation_unit(TokenStream tokens, std::filesystem::path path) {
  TranslationUnit tu;
  tu.path = std::move(path);
  tu.tokens = std::move(tokens);
  tu.code = build_code_index(tu.tokens);
  tu.match = build_matches(tu);
  scan_defines(tu.tokens, &tu.macros, &tu.defined_macros);

  std::size_t ci = 0;
  std::size_t stmt_start = 0;
  const std::size_t n = tu.code_size();
  while (ci < n) {
    const auto t = tu.code_text(ci);
    if (t == "{") {
      const std::size_t close = tu.match[ci];
      std::size_t prev = ci > stmt_start ? attribute_start_before(tu, ci - 1) : npos;
      bool is_function = false;
      std::size_t lparen = npos;
      if (prev != npos && prev >= stmt_start && tu.code_text(prev) == ")" && tu.match[prev] != npos) {
        lparen = tu.match[prev];
        is_function = lparen > stmt_start && detail::is_identifier(tu, lparen - 1) &&
                      !is_c_keyword(tu.code_text(lparen - 1)) &&
                      detail::find_at_depth0(tu, stmt_start, lparen, "=") == lparen;
      }
      if (is_function) {
        FunctionDef fn;
        fn.name = std::string(tu.code_text(lparen - 1));
        fn.span = {tu.code_token(stmt_start).span.begin, tu.code_token(close).span.end};
        fn.body_span = {tu.code_token(ci).span.begin, tu.code_token(close).span.end};
        const std::size_t rparen = tu.match[lparen];
        std::size_t pb = lparen + 1;
        while (pb < rparen) {
          const auto comma = detail::find_at_depth0(tu, pb, rparen, ",");
          if (auto decl = detail::parse_declaration(tu, pb, comma, true)) {
            for (auto& v : decl->vars) {
              v.scope = fn.body_span;
              fn.params.push_back(std::move(v));
            }
          }
          pb = comma + 1;
        }
        BodyScanner(tu, fn).scan(ci, close);
        tu.functions.push_back(std::move(fn));
        ci = close + 1;
        stmt_start = ci;
        continue;
      }
      ci = close + 1;
      continue;
    }
    if (t == ";") {
      if (ci > stmt_start) {
        if (auto decl = detail::parse_declaration(tu, stmt_start, ci, false)) {
          for (auto& v : decl->vars) {
            if (decl->is_typedef) {
              tu.typedefs[v.name] = v;
            } else {
              v.scope = {v.name_span.begin, tu.bytes().size()};
              tu.globals.push_back(std::move(v));
            }
          }
        }
      }
      stmt_start = ci + 1;
    } else if ((t == "(" || t == "[") && tu.match[ci] != npos) {
      ci = tu.match[ci];
    }
    ++ci;
  }
  return tu;
}

namespace {

// Recursive-descent evaluator over a tiny expression grammar with 64-bit
// intermediates. Any unsupported token aborts.
class ConstEval {
 public:
  explicit ConstEval(std::string_view s) : s_(s) {}

  std::optional<std::int64_t> run() {
    auto v = parse_or();
    skip_ws();
    if (!v || pos_ != s_.size()) return std::nullopt;
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(std::string_view op) {
    skip_ws();
    if (s_.substr(pos_, op.size()) != op) return false;
    // Do not split `<<` into `<` or `||` into `|`.
    if (op.size() == 1 && pos_ + 1 < s_.size() && (s_[pos_ + 1] == op[0] || s_[pos_ + 1] == '=') &&
        (op[0] == '<' || op[0] == '>' || op[0] == '|' || op[0] == '&'))
      return false;
    pos_ += op.size();
    return true;
  }
  static bool ok(std::int64_t v) {
    return v >= -(std::int64_t{1} << 32) && v <= (std::int64_t{1} << 33);
  }

  std::optional<std::int64_t> parse_or() {
    auto l = parse_xor();
    while (l && eat("|")) {
      auto r = parse_xor();
      if (!r) return std::nullopt;
      l = *l | *r;
    }
    return l;
  }
  std::optional<std::int64_t> parse_xor() {
    auto l = parse_and();
    while (l && eat("^")) {
      auto r = parse_and();
      if (!r) return std::nullopt;
      l = *l ^ *r;
    }
    return l;
  }
  std::optional<std::int64_t> parse_and() {
    auto l = parse_shift();
    while (l && eat("&")) {
      auto r = parse_shift();
      if (!r) return std::nullopt;
      l = *l & *r;
    }
    return l;
  }
  std::optional<std::int64_t> parse_shift() {
    auto l = parse_add();
    while (l) {
      bool left;
      if (eat("<<")) left = true;
      else if (eat(">>")) left = false;
      else break;
      auto r = parse_add();
      if (!r || *r < 0 || *r > 32) return std::nullopt;
      l = left ? (*l << *r) : (*l >> *r);
      if (!ok(*l)) return std::nullopt;
    }
    return l;
  }
  std::optional<std::int64_t> parse_add() {
    auto l = parse_mul();
    while (l) {
      if (eat("+")) {
        auto r = parse_mul();
        if (!r) return std::nullopt;
        l = *l + *r;
      } else if (eat("-")) {
        auto r = parse_mul();
        if (!r) return std::nullopt;
        l = *l - *r;
      } else {
        break;
      }
      if (!ok(*l)) return std::nullopt;
    }
    return l;
  }
  std::optional<std::int64_t> parse_mul() {
    auto l = parse_unary();
    while (l) {
      char op;
      if (eat("*")) op = '*';
      else if (eat("/")) op = '/';
      else if (eat("%")) op = '%';
      else break;
      auto r = parse_unary();
      if (!r) return std::nullopt;
      if (op == '*') l = *l * *r;
      else if (*r == 0) return std::nullopt;
      else l = op == '/' ? *l / *r : *l % *r;
      if (!ok(*l)) return std::nullopt;
    }
    return l;
  }
  std::optional<std::int64_t> parse_unary() {
    if (eat("-")) {
      auto v = parse_unary();
      return v ? std::optional(-*v) : std::nullopt;
    }
    if (eat("+")) return parse_unary();
    if (eat("~")) {
      auto v = parse_unary();
      // ~ on a 32-bit int; keep the two's-complement 32-bit result.
      return v ? std::optional<std::int64_t>(static_cast<std::int32_t>(~static_cast<std::uint32_t>(*v)))
               : std::nullopt;
    }
    return parse_primary();
  }
  std::optional<std::int64_t> parse_primary() {
    skip_ws();
    if (eat("(")) {
      auto v = parse_or();
      if (!v || !eat(")")) return std::nullopt;
      return v;
    }
    if (pos_ < s_.size() && s_[pos_] == '\'') return parse_char();
    return parse_number();
  }
  std::optional<std::int64_t> parse_char() {
    // 'x' or simple escapes only.
    const auto rest = s_.substr(pos_);
    if (rest.size() >= 3 && rest[1] != '\\' && rest[2] == '\'') {
      pos_ += 3;
      return static_cast<unsigned char>(rest[1]);
    }
    if (rest.size() >= 4 && rest[1] == '\\' && rest[3] == '\'') {
      char c;
      switch (rest[2]) {
        case 'n': c = '\n'; break;
        case 't': c = '\t'; break;
        case 'r': c = '\r'; break;
        case '0': c = '\0'; break;
        case '\\': c = '\\'; break;
        case '\'': c = '\''; break;
        default: return std::nullopt;
      }
      pos_ += 4;
      return static_cast<unsigned char>(c);
    }
    return std::nullopt;
  }
  std::optional<std::int64_t> parse_number() {
    std::size_t p = pos_;
    if (p >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[p]))) return std::nullopt;
    int base = 10;
    if (s_[p] == '0' && p + 1 < s_.size() && (s_[p + 1] == 'x' || s_[p + 1] == 'X')) {
      base = 16;
      p += 2;
    } else if (s_[p] == '0' && p + 1 < s_.size() && (s_[p + 1] == 'b' || s_[p + 1] == 'B')) {
      base = 2;
      p += 2;
    } else if (s_[p] == '0') {
      base = 8;
    }
    std::uint64_t value = 0;
    const auto* first = s_.data() + p;
    const auto* last = s_.data() + s_.size();
    auto [ptr, ec] = std::from_chars(first, last, value, base);
    if (ec != std::errc{}) {
      if (base == 8 && ptr == first && s_[p] == '0') {
        value = 0;
        ptr = first + 1;
      } else {
        return std::nullopt;
      }
    }
    p = static_cast<std::size_t>(ptr - s_.data());
    while (p < s_.size() && (s_[p] == 'u' || s_[p] == 'U' || s_[p] == 'l' || s_[p] == 'L')) ++p;
    if (p < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[p])) || s_[p] == '.' || s_[p] == '_'))
      return std::nullopt;
    if (value > 0xffffffffull) return std::nullopt;
    pos_ = p;
    return static_cast<std::int64_t>(value);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::optional<std::int32_t> evaluate_integer_expression(std::string_view text) {
  auto v = ConstEval(text).run();
  if (!v) return std::nullopt;
  if (*v < std::numeric_limits<std::int32_t>::min() || *v > 0xffffffffll) return std::nullopt;
  return static_cast<std::int32_t>(static_cast<std::uint32_t>(*v));
}

namespace {

// Walks #define / #undef lines, filling the integer table and the set of all
// defined names.
void scan_defines(const TokenStream& ts, MacroTable* table_out,
                  std::set<std::string, std::less<>>* names_out) {
  MacroTable table;
  std::set<std::string, std::less<>> dropped;
  for (const auto& tok : ts.tokens()) {
    if (tok.kind != TokenKind::Directive) continue;
    // Strip line splices and comments so the body can be read as one line.
    const auto raw = ts.text(tok);
    std::string line;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '\\' && i + 1 < raw.size() && raw[i + 1] == '\n') {
        ++i;
        continue;
      }
      if (raw.compare(i, 2, "/*") == 0) {
        const auto end = raw.find("*/", i + 2);
        line += ' ';
        i = end == std::string_view::npos ? raw.size() : end + 1;
        continue;
      }
      if (raw.compare(i, 2, "//") == 0) break;
      line += raw[i];
    }
    std::size_t p = line.find('#') + 1;
    auto skip_ws = [&] {
      while (p < line.size() && (line[p] == ' ' || line[p] == '\t')) ++p;
    };
    auto read_ident = [&] {
      const auto b = p;
      while (p < line.size() && (std::isalnum(static_cast<unsigned char>(line[p])) || line[p] == '_')) ++p;
      return line.substr(b, p - b);
    };
    skip_ws();
    const auto directive = read_ident();
    if (directive != "define" && directive != "undef") continue;
    skip_ws();
    const auto name = read_ident();
    if (name.empty()) continue;
    if (directive == "undef") {
      table.erase(name);
      continue;
    }
    if (names_out != nullptr) names_out->insert(name);
    if (dropped.count(name) != 0) continue;
    if (table.count(name) != 0) {
      table.erase(name);
      dropped.insert(name);
      continue;
    }
    if (p < line.size() && line[p] == '(') {
      dropped.insert(name);  // function-like
      continue;
    }
    if (auto v = evaluate_integer_expression(std::string_view(line).substr(p))) {
      table.emplace(name, *v);
    } else {
      dropped.insert(name);
    }
  }
  if (table_out != nullptr) *table_out = std::move(table);
}

}  // namespace

MacroTable collect_macros(const TranslationUnit& tu) {
  MacroTable table;
  scan_defines(tu.tokens, &table, nullptr);
  return table;
}

TranslationUnit load_translation_unit(std::string_view bytes, std::filesystem::path path) {
  auto tu = parse_translation_unit(tokenize(bytes), std::move(path));
  return tu;
}

}  // namespace clbforge
