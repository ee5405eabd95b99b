#include <algorithm>
#include <bit>
#include <set>

#include "clbforge/source_model.hpp"
#include "parse_util.hpp"

namespace clbforge {

std::string_view to_string(SkipReason reason) noexcept {
  switch (reason) {
    case SkipReason::ControlFlowEscape: return "ControlFlowEscape";
    case SkipReason::UnsupportedVariable: return "UnsupportedVariable";
    case SkipReason::ExternalLabelTarget: return "ExternalLabelTarget";
    case SkipReason::UnsupportedOperand: return "UnsupportedOperand";
    case SkipReason::PreprocessorDirective: return "PreprocessorDirective";
    case SkipReason::RewriteAmbiguity: return "RewriteAmbiguity";
  }
  return "Unknown";
}

namespace {

using detail::npos;

struct ConstOperand {
  std::int32_t value;
  ConstOrigin origin;
};

bool is_ident(const TranslationUnit& tu, std::size_t ci) {
  return tu.code_token(ci).kind == TokenKind::Identifier && !is_c_keyword(tu.code_text(ci));
}

// [b, e) with redundant outer parentheses removed.
std::pair<std::size_t, std::size_t> strip_parens(const TranslationUnit& tu, std::size_t b,
                                                 std::size_t e) {
  while (e - b >= 2 && tu.code_text(b) == "(" && tu.match[b] == e - 1) {
    ++b;
    --e;
  }
  return {b, e};
}

std::optional<ConstOperand> parse_constant(const TranslationUnit& tu, const MacroTable& macros,
                                           std::size_t b, std::size_t e) {
  std::tie(b, e) = strip_parens(tu, b, e);
  if (b >= e) return std::nullopt;
  bool negate = false;
  if (tu.code_text(b) == "-" || tu.code_text(b) == "+") {
    negate = tu.code_text(b) == "-";
    std::tie(b, e) = strip_parens(tu, b + 1, e);
    if (b >= e) return std::nullopt;
  }
  if (e - b != 1) return std::nullopt;
  const auto& tok = tu.code_token(b);
  std::int64_t value;
  ConstOrigin origin;
  if (tok.kind == TokenKind::Number || tok.kind == TokenKind::CharLiteral) {
    auto v = evaluate_integer_expression(tu.code_text(b));
    if (!v) return std::nullopt;
    // Literals above INT32_MAX are unsigned in C; keep their magnitude.
    value = tok.kind == TokenKind::Number && *v < 0 ? static_cast<std::uint32_t>(*v) : *v;
    origin = ConstOrigin::Literal;
  } else if (tok.kind == TokenKind::Identifier) {
    auto it = macros.find(tu.code_text(b));
    if (it == macros.end()) return std::nullopt;
    value = it->second;
    origin = ConstOrigin::Macro;
  } else {
    return std::nullopt;
  }
  if (negate) value = -value;
  if (value < INT32_MIN || value > static_cast<std::int64_t>(UINT32_MAX)) return std::nullopt;
  return ConstOperand{static_cast<std::int32_t>(static_cast<std::uint32_t>(value)), origin};
}

// Accepts `*`* ident ( . ident | -> ident | [ side-effect-free ] )*.
bool is_lvalue_expression(const TranslationUnit& tu, std::size_t b, std::size_t e) {
  std::tie(b, e) = strip_parens(tu, b, e);
  while (b < e && tu.code_text(b) == "*") ++b;
  if (b >= e || !is_ident(tu, b)) return false;
  const auto root = tu.code_text(b);
  if (tu.defined_macros.count(root) != 0) return false;
  std::size_t ci = b + 1;
  while (ci < e) {
    const auto t = tu.code_text(ci);
    if ((t == "." || t == "->") && ci + 1 < e && is_ident(tu, ci + 1)) {
      ci += 2;
    } else if (t == "[" && tu.match[ci] != npos && tu.match[ci] < e) {
      for (std::size_t k = ci + 1; k < tu.match[ci]; ++k) {
        const auto w = tu.code_text(k);
        if (w == "++" || w == "--" || w == "(" || (w.size() >= 1 && w.back() == '=' && w != "==" &&
                                                   w != "!=" && w != "<=" && w != ">="))
          return false;
      }
      ci = tu.match[ci] + 1;
    } else {
      return false;
    }
  }
  return true;
}

std::string source_text(const TranslationUnit& tu, std::size_t b, std::size_t e) {
  const auto begin = tu.code_token(b).span.begin;
  const auto end = tu.code_token(e - 1).span.end;
  return tu.bytes().substr(begin, end - begin);
}

struct Candidate {
  QualifiedCondition qc;
  std::size_t if_ci;
};

std::optional<Candidate> match_qc(const TranslationUnit& tu, const MacroTable& macros,
                                  std::size_t fn_index, std::size_t if_ci, std::size_t body_close) {
  const auto lp = if_ci + 1;
  if (lp >= body_close || tu.code_text(lp) != "(" || tu.match[lp] == npos) return std::nullopt;
  const auto rp = tu.match[lp];
  if (rp + 1 >= body_close || rp == lp + 1) return std::nullopt;

  // Exactly one depth-0 `==` and nothing that would bind looser.
  std::size_t eq = npos;
  for (std::size_t ci = lp + 1; ci < rp; ++ci) {
    const auto t = tu.code_text(ci);
    if ((t == "(" || t == "[" || t == "{") && tu.match[ci] != npos) {
      ci = tu.match[ci];
      continue;
    }
    if (t == "==") {
      if (eq != npos) return std::nullopt;
      eq = ci;
    } else if (t == "&&" || t == "||" || t == "?" || t == "," || t == "!=" || t == "<" ||
               t == ">" || t == "<=" || t == ">=" || t == "=" ||
               (t.size() >= 2 && t.back() == '=' && t != "==")) {
      return std::nullopt;
    }
  }
  if (eq == npos || eq == lp + 1 || eq + 1 == rp) return std::nullopt;

  std::size_t var_b, var_e, const_b, const_e;
  std::optional<ConstOperand> c;
  if (auto rc = parse_constant(tu, macros, eq + 1, rp); rc && is_lvalue_expression(tu, lp + 1, eq)) {
    c = rc;
    std::tie(var_b, var_e) = strip_parens(tu, lp + 1, eq);
    std::tie(const_b, const_e) = std::pair(eq + 1, rp);
  } else if (auto lc = parse_constant(tu, macros, lp + 1, eq); lc && is_lvalue_expression(tu, eq + 1, rp)) {
    c = lc;
    std::tie(var_b, var_e) = strip_parens(tu, eq + 1, rp);
    std::tie(const_b, const_e) = std::pair(lp + 1, eq);
  } else {
    return std::nullopt;
  }

  Candidate cand;
  cand.if_ci = if_ci;
  auto& qc = cand.qc;
  qc.function_index = fn_index;
  qc.if_offset = tu.code_token(if_ci).span.begin;
  qc.cond_span = {tu.code_token(lp + 1).span.begin, tu.code_token(rp - 1).span.end};
  qc.var_expr = source_text(tu, var_b, var_e);
  qc.var_span = {tu.code_token(var_b).span.begin, tu.code_token(var_e - 1).span.end};
  qc.const_value = c->value;
  qc.const_origin = c->origin;
  qc.const_text = source_text(tu, const_b, const_e);

  const auto body_b = rp + 1;
  const auto body_e = detail::statement_end(tu, body_b, body_close);
  if (body_e <= body_b) return std::nullopt;
  qc.body_braced = tu.code_text(body_b) == "{";
  qc.body_span = {tu.code_token(body_b).span.begin, tu.code_token(body_e - 1).span.end};
  qc.has_else = body_e < body_close && tu.code_text(body_e) == "else";
  return cand;
}

bool is_conditional_directive(std::string_view text) {
  auto p = text.find('#');
  if (p == std::string_view::npos) return false;
  ++p;
  while (p < text.size() && (text[p] == ' ' || text[p] == '\t')) ++p;
  const auto rest = text.substr(p);
  return rest.starts_with("if") || rest.starts_with("el") || rest.starts_with("endif");
}

// Directive tokens whose start lies in `range`.
std::vector<std::size_t> directives_in(const TranslationUnit& tu, const ByteRange& range) {
  std::vector<std::size_t> out;
  const auto& toks = tu.tokens.tokens();
  auto it = std::lower_bound(toks.begin(), toks.end(), range.begin,
                             [](const Token& t, std::size_t off) { return t.span.begin < off; });
  for (; it != toks.end() && range.contains(it->span.begin); ++it)
    if (it->kind == TokenKind::Directive) out.push_back(static_cast<std::size_t>(it - toks.begin()));
  return out;
}

}  // namespace

std::vector<QualifiedCondition> find_qualified_conditions(const TranslationUnit& tu,
                                                          const MacroTable& macros,
                                                          const Config& cfg) {
  std::vector<QualifiedCondition> out;
  for (std::size_t fi = 0; fi < tu.functions.size(); ++fi) {
    const auto& fn = tu.functions[fi];
    const auto open = tu.code_index_at(fn.body_span.begin);
    const auto close = tu.match[open];
    std::vector<Candidate> accepted;
    for (std::size_t ci = open + 1; ci < close; ++ci) {
      if (tu.code_text(ci) != "if") continue;
      auto cand = match_qc(tu, macros, fi, ci, close);
      if (!cand) continue;
      const auto& qc = cand->qc;
      bool conditional = false;
      for (auto di : directives_in(tu, {qc.cond_span.begin, qc.body_span.end}))
        conditional = conditional || is_conditional_directive(tu.tokens.text(di));
      if (conditional) continue;
      if (static_cast<unsigned>(std::bit_width(static_cast<std::uint32_t>(qc.const_value))) <
          cfg.min_key_bits)
        continue;
      const bool nested = std::any_of(accepted.begin(), accepted.end(), [&](const Candidate& outer) {
        return outer.qc.body_span.contains(qc.if_offset);
      });
      if (nested) continue;
      accepted.push_back(std::move(*cand));
    }
    for (auto& c : accepted) out.push_back(std::move(c.qc));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.if_offset < b.if_offset; });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].qc_id = static_cast<std::uint32_t>(i);
  return out;
}

namespace {

// Declaration of `name` visible at `offset`: innermost block-scope local
// first, then parameters.
const VarDecl* resolve(const FunctionDef& fn, std::string_view name, std::size_t offset) {
  const VarDecl* best = nullptr;
  for (const auto& v : fn.locals) {
    if (v.name != name || !v.scope.contains(offset) || v.name_span.begin > offset) continue;
    if (best == nullptr || v.scope.begin >= best->scope.begin) best = &v;
  }
  if (best != nullptr) return best;
  for (const auto& v : fn.params)
    if (v.name == name) return &v;
  return nullptr;
}

const VarDecl* resolve_global(const TranslationUnit& tu, std::string_view name, std::size_t offset) {
  const VarDecl* best = nullptr;
  for (const auto& v : tu.globals)
    if (v.name == name && v.name_span.begin < offset) best = &v;
  return best;
}

}  // namespace

Eligibility check_eligibility(const TranslationUnit& tu, QualifiedCondition& qc) {
  qc.free_vars.clear();
  qc.free_var_uses.clear();
  qc.ambiguous_uses.clear();
  const auto& fn = tu.functions.at(qc.function_index);

  if (!directives_in(tu, qc.body_span).empty())
    return Eligibility::skip(SkipReason::PreprocessorDirective, "directive inside branch body");

  // Operand width: hashing truncates to 32 bits, so wider or non-integer
  // operands would change the branch semantics.
  {
    const auto vb = tu.code_index_at(qc.var_span.begin);
    const auto ve = tu.code_index_at(qc.var_span.end);
    if (ve == vb + 1) {
      const auto name = tu.code_text(vb);
      const VarDecl* d = resolve(fn, name, qc.if_offset);
      if (d == nullptr) d = resolve_global(tu, name, qc.if_offset);
      if (d != nullptr && (d->value_class == ValueClass::Wide || d->value_class == ValueClass::Floating ||
                           d->value_class == ValueClass::Pointer))
        return Eligibility::skip(SkipReason::UnsupportedOperand,
                                 "operand '" + std::string(name) + "' is not a <=32-bit integer");
    }
  }

  const auto fn_open = tu.code_index_at(fn.body_span.begin);
  const auto fn_close = tu.match[fn_open];
  const auto bb = tu.code_index_at(qc.body_span.begin);
  const auto be = tu.code_index_at(qc.body_span.end);

  // Loop and switch extents nested in the body bind break/continue.
  std::vector<std::pair<std::size_t, std::size_t>> loops, switches;
  for (std::size_t ci = bb; ci < be; ++ci) {
    const auto t = tu.code_text(ci);
    if (t == "for" || t == "while" || t == "do")
      loops.emplace_back(ci, detail::statement_end(tu, ci, be));
    else if (t == "switch")
      switches.emplace_back(ci, detail::statement_end(tu, ci, be));
  }
  auto inside = [](const auto& regions, std::size_t ci) {
    return std::any_of(regions.begin(), regions.end(),
                       [&](const auto& r) { return ci > r.first && ci < r.second; });
  };

  // Labels defined in the body, gotos anywhere in the function.
  std::set<std::string, std::less<>> body_labels;
  std::set<std::size_t> label_positions;
  for (std::size_t ci = bb; ci + 1 < be; ++ci) {
    if (!is_ident(tu, ci) || tu.code_text(ci + 1) != ":") continue;
    const auto prev = tu.code_text(ci - 1);
    if (prev == ";" || prev == "{" || prev == "}" || prev == ")" || prev == ":" || prev == "else") {
      body_labels.emplace(tu.code_text(ci));
      label_positions.insert(ci);
    }
  }
  for (std::size_t ci = fn_open + 1; ci + 1 < fn_close; ++ci) {
    if (tu.code_text(ci) != "goto" || !is_ident(tu, ci + 1)) continue;
    const auto label = tu.code_text(ci + 1);
    const bool from_body = ci >= bb && ci < be;
    if (from_body && body_labels.count(label) == 0)
      return Eligibility::skip(SkipReason::ControlFlowEscape,
                               "goto " + std::string(label) + " leaves the branch body");
    if (!from_body && body_labels.count(label) != 0)
      return Eligibility::skip(SkipReason::ExternalLabelTarget,
                               "label " + std::string(label) + " is targeted from outside");
  }

  for (std::size_t ci = bb; ci < be; ++ci) {
    const auto t = tu.code_text(ci);
    if (t == "return")
      return Eligibility::skip(SkipReason::ControlFlowEscape, "return inside branch body");
    if (t == "break" && !inside(loops, ci) && !inside(switches, ci))
      return Eligibility::skip(SkipReason::ControlFlowEscape, "break escapes branch body");
    if (t == "continue" && !inside(loops, ci))
      return Eligibility::skip(SkipReason::ControlFlowEscape, "continue escapes branch body");
  }

  // Regions where identifiers are member names or aggregate-local names.
  std::vector<std::pair<std::size_t, std::size_t>> opaque;
  for (std::size_t ci = bb; ci < be; ++ci) {
    const auto t = tu.code_text(ci);
    if (t == "struct" || t == "union" || t == "enum") {
      std::size_t k = ci + 1;
      if (k < be && is_ident(tu, k)) ++k;
      if (k < be && tu.code_text(k) == "{" && tu.match[k] != npos) opaque.emplace_back(k, tu.match[k]);
    } else if ((t == "offsetof" || t == "__builtin_offsetof") && ci + 1 < be &&
               tu.code_text(ci + 1) == "(" && tu.match[ci + 1] != npos) {
      opaque.emplace_back(ci + 1, tu.match[ci + 1]);
    }
  }

  for (std::size_t ci = bb; ci < be; ++ci) {
    if (!is_ident(tu, ci)) continue;
    const auto name = tu.code_text(ci);
    const auto prev = ci > 0 ? tu.code_text(ci - 1) : std::string_view{};
    if (prev == "." || prev == "->" || prev == "goto" || prev == "struct" || prev == "union" ||
        prev == "enum")
      continue;
    if (label_positions.count(ci) != 0) continue;
    const auto offset = tu.code_token(ci).span.begin;

    const VarDecl* decl = resolve(fn, name, offset);
    if (decl != nullptr && qc.body_span.contains(decl->name_span.begin)) continue;  // body-local
    // Names the block introduced outside the body (local typedefs, tags,
    // enumerators) would not be visible at file scope.
    for (const auto& lt : fn.local_types)
      if (lt.name == name && !qc.body_span.contains(lt.decl_span.begin) && lt.decl_span.begin < qc.if_offset)
        return Eligibility::skip(SkipReason::UnsupportedVariable,
                                 "block-scope type or enumerator '" + std::string(name) + "'");

    const VarDecl* outer = resolve(fn, name, qc.if_offset);
    if (outer == nullptr) continue;  // file-scope or external symbol, left untouched
    if (outer->kind != VarKind::ScalarInt && outer->kind != VarKind::AddressValued)
      return Eligibility::skip(SkipReason::UnsupportedVariable,
                               "variable '" + std::string(name) + "' has kind " +
                                   std::string(to_string(outer->kind)));
    const bool ambiguous = std::any_of(opaque.begin(), opaque.end(), [&](const auto& r) {
      return ci > r.first && ci < r.second;
    });
    if (ambiguous) {
      qc.ambiguous_uses.push_back(tu.code_token(ci).span);
      continue;
    }
    std::size_t index = qc.free_vars.size();
    for (std::size_t k = 0; k < qc.free_vars.size(); ++k)
      if (qc.free_vars[k].name == outer->name && qc.free_vars[k].name_span == outer->name_span) index = k;
    if (index == qc.free_vars.size()) qc.free_vars.push_back(*outer);
    qc.free_var_uses.push_back({tu.code_token(ci).span, index});
  }
  return Eligibility::ok();
}

}  // namespace clbforge
