#include "clbforge/transformer.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "clbforge/error.hpp"
#include "clbforge/runtime_template.hpp"

namespace clbforge {

Keymap plan_clbs(std::span<const EligibleQc> eligible, std::uint64_t seed) {
  if (eligible.size() >= kMaxClbs)
    throw Error(ErrorCode::TooManyClbs, fmt::format("{} CLBs exceed the 16-bit id space", eligible.size()));
  std::vector<std::size_t> order(eligible.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = eligible[a];
    const auto& y = eligible[b];
    if (x.rel_path != y.rel_path) return x.rel_path < y.rel_path;
    return x.qc->if_offset < y.qc->if_offset;
  });

  Keymap km;
  km.seed = seed;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& e = eligible[order[i]];
    const auto id = static_cast<std::uint32_t>(i);
    const auto& caller = e.tu->functions.at(e.qc->function_index).name;
    ClbRecord r;
    r.clb_id = id;
    r.file = e.rel_path;
    r.offset = e.qc->if_offset;
    r.caller_symbol = caller;
    r.ext_symbol = ext_symbol_name(id, caller);
    r.key = Key32{e.qc->const_value};
    r.salt = derive_salt(seed, id);
    r.hconst = cond_hash(r.key.value, r.salt);
    r.len_magic = len_magic_for(id);
    km.records.push_back(std::move(r));
  }
  return km;
}

SourceEdit rewrite_condition(const QualifiedCondition& qc, const ClbRecord& record) {
  return SourceEdit{record.file, qc.cond_span,
                    fmt::format("clb_hash({}, {}u) == {}u", qc.var_expr, hex32(record.salt.as_u32()),
                                hex32(record.hconst.value))};
}

namespace {

std::string line_indent(std::string_view src, std::size_t offset) {
  auto line_start = src.rfind('\n', offset == 0 ? 0 : offset - 1);
  line_start = line_start == std::string_view::npos ? 0 : line_start + 1;
  std::size_t end = line_start;
  while (end < src.size() && (src[end] == ' ' || src[end] == '\t')) ++end;
  return std::string(src.substr(line_start, end - line_start));
}

std::string param_name(const VarDecl& v) { return "__clb_p_" + v.name; }

std::string param_list(const QualifiedCondition& qc) {
  if (qc.free_vars.empty()) return "void";
  std::string out;
  for (const auto& v : qc.free_vars) {
    if (!out.empty()) out += ", ";
    out += fmt::format("{} *{}", v.type_text, param_name(v));
  }
  return out;
}

}  // namespace

ExtractedBody extract_body(const TranslationUnit& tu, const QualifiedCondition& qc,
                           const ClbRecord& record) {
  if (!qc.ambiguous_uses.empty())
    throw Error(ErrorCode::RewriteAmbiguity,
                fmt::format("{}: identifier use at byte {} cannot be classified", record.file,
                            qc.ambiguous_uses.front().begin),
                qc.ambiguous_uses.front().begin);
  const std::string_view src = tu.bytes();

  // Body text with every free-variable use turned into an indirection.
  std::vector<SourceEdit> uses;
  for (const auto& u : qc.free_var_uses) {
    ByteRange local{u.span.begin - qc.body_span.begin, u.span.end - qc.body_span.begin};
    uses.push_back({record.file, local, "(*" + param_name(qc.free_vars.at(u.var)) + ")"});
  }
  std::string body = apply_edits(src.substr(qc.body_span.begin, qc.body_span.size()), uses);
  if (!qc.body_braced) body = "{ " + body + " }";

  const std::string signature =
      fmt::format("void {}({})", record.ext_symbol, param_list(qc));

  ExtractedBody out;
  out.prototype = signature + ";\n";
  out.ext_fun = fmt::format(
      "__attribute__((noinline, used)) {}\n"
      "{{\n"
      "    volatile unsigned __clb_offset = {}u;\n"
      "    volatile unsigned __clb_count = {}u;\n"
      "    volatile unsigned __clb_control = {}u;\n"
      "    clb_at_check(__clb_offset, __clb_count, __clb_control);\n"
      "    {}\n"
      "}}\n",
      signature, hex32(kOffsetMagic), hex32(kCountMagic), hex32(kControlMagic), body);

  std::string args;
  for (const auto& v : qc.free_vars) {
    if (!args.empty()) args += ", ";
    args += "&" + v.name;
  }
  const std::string ind = line_indent(src, qc.if_offset);
  const std::string in1 = ind + "    ";
  const std::string in2 = in1 + "    ";
  const auto id = record.clb_id;
  std::string call;
  call += "{\n";
  call += fmt::format("{}static int __clb_done_{};\n", in1, id);
  call += fmt::format("{}if (!__clb_done_{}) {{\n", in1, id);
  call += fmt::format("{}volatile unsigned __clb_len = {}u;\n", in2, hex32(record.len_magic));
  call += fmt::format("{}unsigned __clb_key = (unsigned)({});\n", in2, qc.var_expr);
  call += fmt::format("{}clb_decrypt((void *)&{}, &__clb_key, __clb_len);\n", in2, record.ext_symbol);
  call += fmt::format("{}__clb_done_{} = 1;\n", in2, id);
  call += fmt::format("{}}}\n", in1);
  call += fmt::format("{}{}({});\n", in1, record.ext_symbol, args);
  call += ind + "}";
  out.call_site = SourceEdit{record.file, qc.body_span, std::move(call)};
  return out;
}

std::optional<SourceEdit> inject_runtime_support(const TranslationUnit& tu, std::size_t clb_count,
                                                 const std::string& file) {
  if (clb_count == 0) return std::nullopt;
  // After the leading run of comments and directives, at conditional depth 0,
  // so feature-test macros and includes of the file come first.
  std::size_t insert_at = 0;
  int depth = 0;
  for (const auto& tok : tu.tokens.tokens()) {
    if (tok.kind != TokenKind::Comment && tok.kind != TokenKind::Directive) break;
    if (tok.kind == TokenKind::Directive) {
      auto text = tu.tokens.text(tok);
      text.remove_prefix(std::min(text.size(), text.find('#') + 1));
      while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
      if (text.starts_with("if")) ++depth;
      else if (text.starts_with("endif")) --depth;
    }
    if (depth == 0) insert_at = tok.span.end;
  }
  std::string text;
  if (insert_at != 0) text += "\n";
  text += runtime_support_source();
  if (insert_at == 0) text += "\n";
  return SourceEdit{file, {insert_at, insert_at}, std::move(text)};
}

std::string apply_edits(std::string_view original, std::span<const SourceEdit> edits) {
  std::vector<std::size_t> order(edits.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return edits[a].span.begin < edits[b].span.begin; });
  std::string out;
  out.reserve(original.size());
  std::size_t cursor = 0;
  for (auto i : order) {
    const auto& e = edits[i];
    if (e.span.end < e.span.begin || e.span.end > original.size())
      throw Error(ErrorCode::OverlappingEdits, "edit span outside the file", e.span.begin);
    if (e.span.begin < cursor)
      throw Error(ErrorCode::OverlappingEdits,
                  fmt::format("edit at [{},{}) overlaps a previous edit", e.span.begin, e.span.end),
                  e.span.begin);
    out.append(original.substr(cursor, e.span.begin - cursor));
    out.append(e.replacement);
    cursor = e.span.end;
  }
  out.append(original.substr(cursor));
  return out;
}

void check_transformable(const TranslationUnit& tu) {
  if (tu.bytes().find(kProtectedMarker) != std::string::npos)
    throw Error(ErrorCode::AlreadyProtected, tu.path.string() + " already carries the protection marker");
  for (const auto& tok : tu.tokens.tokens()) {
    if (tok.kind != TokenKind::Identifier && tok.kind != TokenKind::Directive) continue;
    const auto text = tu.tokens.text(tok);
    for (std::string_view reserved : {"__clb_", "clb_hash", "clb_decrypt", "clb_at_check",
                                      "clb_fnv1a", "clb_detected", "clb_open_self",
                                      "CLBFORGE_RUNTIME_INCLUDED"}) {
      const bool hit = tok.kind == TokenKind::Identifier
                           ? (reserved == "__clb_" ? text.starts_with(reserved) : text == reserved)
                           : text.find(reserved) != std::string_view::npos;
      if (hit)
        throw Error(ErrorCode::NameCollision,
                    fmt::format("{} uses reserved name '{}'", tu.path.string(), text), tok.span.begin);
    }
  }
}

std::vector<SourceEdit> plan_file_edits(const TranslationUnit& tu,
                                        std::span<const QualifiedCondition* const> qcs,
                                        std::span<const ClbRecord* const> records,
                                        const std::string& file) {
  std::vector<SourceEdit> edits;
  if (qcs.empty()) return edits;
  if (auto rt = inject_runtime_support(tu, qcs.size(), file)) edits.push_back(std::move(*rt));

  std::map<std::size_t, std::pair<std::string, std::string>> per_function;  // prototypes, definitions
  for (std::size_t i = 0; i < qcs.size(); ++i) {
    const auto& qc = *qcs[i];
    const auto& rec = *records[i];
    edits.push_back(rewrite_condition(qc, rec));
    auto ex = extract_body(tu, qc, rec);
    edits.push_back(std::move(ex.call_site));
    auto& slot = per_function[qc.function_index];
    slot.first += ex.prototype;
    slot.second += "\n" + ex.ext_fun;
  }
  for (auto& [fi, text] : per_function) {
    const auto& fn = tu.functions.at(fi);
    edits.push_back({file, {fn.span.begin, fn.span.begin}, text.first + "\n"});
    edits.push_back({file, {fn.span.end, fn.span.end}, "\n" + text.second});
  }
  return edits;
}

}  // namespace clbforge
