#include "clbforge/harness.hpp"

#include <fnmatch.h>
#include <stdlib.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "clbforge/error.hpp"
#include "clbforge/runtime_template.hpp"
#include "clbforge/transformer.hpp"

namespace clbforge {
namespace {

using nlohmann::json;

bool glob_match(const std::string& pattern, const std::string& rel) {
  const auto name = rel.substr(rel.find_last_of('/') == std::string::npos ? 0 : rel.find_last_of('/') + 1);
  return ::fnmatch(pattern.c_str(), rel.c_str(), FNM_PATHNAME) == 0 || ::fnmatch(pattern.c_str(), name.c_str(), 0) == 0;
}

std::string rel_string(const fs::path& p, const fs::path& root) { return p.lexically_relative(root).generic_string(); }

std::vector<std::string> list_all_files(const fs::path& root) {
  std::vector<std::string> out;
  if (!fs::is_directory(root)) throw Error(ErrorCode::Io, "not a directory: " + root.string());
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(rel_string(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

// 1-based line of `offset`; `from`/`line` carry the previous answer so that
// ascending queries cost one pass over the file.
std::size_t line_of(std::string_view src, std::size_t offset, std::size_t& from, std::size_t& line) {
  if (offset < from) from = 0, line = 1;
  line += static_cast<std::size_t>(std::count(src.begin() + static_cast<std::ptrdiff_t>(from),
                                              src.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
  from = offset;
  return line;
}

struct HeaderMacros {
  MacroTable values;
  std::set<std::string, std::less<>> names;
};

/// `#include "x"` targets of a file, resolved relative to its directory.
std::vector<std::string> quoted_includes(const TranslationUnit& tu, const std::string& rel_path) {
  std::vector<std::string> out;
  const fs::path dir = fs::path(rel_path).parent_path();
  for (const auto& tok : tu.tokens.tokens()) {
    if (tok.kind != TokenKind::Directive) continue;
    const auto text = tu.tokens.text(tok);
    auto p = text.find('#') + 1;
    while (p < text.size() && (text[p] == ' ' || text[p] == '\t')) ++p;
    if (text.substr(p, 7) != "include") continue;
    const auto q1 = text.find('"', p);
    if (q1 == std::string_view::npos) continue;
    const auto q2 = text.find('"', q1 + 1);
    if (q2 == std::string_view::npos) continue;
    out.push_back((dir / std::string(text.substr(q1 + 1, q2 - q1 - 1))).lexically_normal().generic_string());
  }
  return out;
}

class MacroHeaderCache {
 public:
  MacroHeaderCache(const fs::path& root, const Config& cfg) : root_(root) {
    for (const auto& h : cfg.macro_headers) configured_.insert(fs::path(h).lexically_normal().generic_string());
  }

  /// Macros visible to `tu` from configured headers it includes directly.
  HeaderMacros for_file(const TranslationUnit& tu, const std::string& rel_path) {
    HeaderMacros out;
    if (configured_.empty()) return out;
    for (const auto& inc : quoted_includes(tu, rel_path)) {
      if (configured_.count(inc) == 0) continue;
      const auto& h = load(inc);
      for (const auto& [k, v] : h.values) out.values.emplace(k, v);
      out.names.insert(h.names.begin(), h.names.end());
    }
    return out;
  }

 private:
  const HeaderMacros& load(const std::string& rel) {
    if (auto it = cache_.find(rel); it != cache_.end()) return it->second;
    const auto tu = load_translation_unit(read_text_file(root_ / rel), rel);
    return cache_.emplace(rel, HeaderMacros{tu.macros, tu.defined_macros}).first->second;
  }

  fs::path root_;
  std::set<std::string> configured_;
  std::map<std::string, HeaderMacros> cache_;
};

struct AnalyzedFile {
  std::string rel_path;
  std::string source;
  TranslationUnit tu;
  std::vector<QualifiedCondition> qcs;
  std::vector<Eligibility> eligibility;
};

void merge_header_macros(TranslationUnit& tu, const HeaderMacros& h) {
  for (const auto& [k, v] : h.values)
    if (tu.defined_macros.count(k) == 0) tu.macros.emplace(k, v);
  tu.defined_macros.insert(h.names.begin(), h.names.end());
}

AnalyzedFile analyze(std::string_view bytes, const std::string& rel_path, const Config& cfg, const HeaderMacros& h) {
  AnalyzedFile f;
  f.rel_path = rel_path;
  f.source = std::string(bytes);
  f.tu = load_translation_unit(bytes, rel_path);
  merge_header_macros(f.tu, h);
  f.qcs = find_qualified_conditions(f.tu, f.tu.macros, cfg);
  for (auto& qc : f.qcs) f.eligibility.push_back(check_eligibility(f.tu, qc));
  return f;
}

FileScan to_file_scan(const AnalyzedFile& f) {
  FileScan fs_;
  fs_.rel_path = f.rel_path;
  std::size_t scanned = 0, line = 1;
  for (std::size_t i = 0; i < f.qcs.size(); ++i) {
    const auto& qc = f.qcs[i];
    const auto& el = f.eligibility[i];
    QcScan q;
    q.qc_id = qc.qc_id;
    q.line = line_of(f.tu.bytes(), qc.if_offset, scanned, line);
    q.function = f.tu.functions.at(qc.function_index).name;
    q.var_expr = qc.var_expr;
    q.const_text = qc.const_text;
    q.const_value = qc.const_value;
    q.eligible = el.eligible;
    if (!el.eligible) q.skip = el.reason;
    q.detail = el.detail;
    fs_.qcs.push_back(std::move(q));
  }
  return fs_;
}

/// Protects a set of analysed files. Returns new texts keyed by rel path.
std::map<std::string, std::string> transform_files(std::vector<AnalyzedFile>& files, const Config& cfg,
                                                   Keymap& keymap_out) {
  std::vector<EligibleQc> eligible;
  for (auto& f : files) {
    check_transformable(f.tu);
    for (std::size_t i = 0; i < f.qcs.size(); ++i)
      if (f.eligibility[i].eligible) eligible.push_back({&f.tu, &f.qcs[i], f.rel_path});
  }
  keymap_out = plan_clbs(eligible, cfg.seed);

  std::map<std::string, std::string> out;
  for (auto& f : files) {
    std::vector<const QualifiedCondition*> qcs;
    std::vector<const ClbRecord*> recs;
    for (const auto& r : keymap_out.records) {
      if (r.file != f.rel_path) continue;
      const auto it = std::find_if(f.qcs.begin(), f.qcs.end(),
                                   [&](const QualifiedCondition& q) { return q.if_offset == r.offset; });
      qcs.push_back(&*it);
      recs.push_back(&r);
    }
    if (qcs.empty()) continue;
    const auto edits = plan_file_edits(f.tu, qcs, recs, f.rel_path);
    out[f.rel_path] = apply_edits(f.tu.bytes(), edits);
  }
  return out;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

void replace_all(std::string& s, std::string_view from, const std::string& to) {
  for (std::size_t p = s.find(from); p != std::string::npos; p = s.find(from, p + to.size()))
    s.replace(p, from.size(), to);
}

}  // namespace

// ---- scan -----------------------------------------------------------------

std::size_t ScanReport::qc_count() const noexcept {
  std::size_t n = 0;
  for (const auto& f : files) n += f.qcs.size();
  return n;
}

std::size_t ScanReport::eligible_count() const noexcept {
  std::size_t n = 0;
  for (const auto& f : files)
    for (const auto& q : f.qcs) n += q.eligible ? 1 : 0;
  return n;
}

std::map<std::string, std::size_t> ScanReport::skip_histogram() const {
  std::map<std::string, std::size_t> h;
  for (const auto& f : files)
    for (const auto& q : f.qcs)
      if (q.skip) ++h[std::string(to_string(*q.skip))];
  return h;
}

std::vector<std::string> list_sources(const fs::path& srcdir, const Config& cfg) {
  std::vector<std::string> out;
  for (const auto& rel : list_all_files(srcdir)) {
    const bool inc = std::any_of(cfg.include_globs.begin(), cfg.include_globs.end(),
                                 [&](const std::string& g) { return glob_match(g, rel); });
    const bool exc = std::any_of(cfg.exclude_globs.begin(), cfg.exclude_globs.end(),
                                 [&](const std::string& g) { return glob_match(g, rel); });
    if (inc && !exc) out.push_back(rel);
  }
  return out;
}

FileScan scan_source(std::string_view bytes, const std::string& rel_path, const Config& cfg,
                     const MacroTable& macros_extra) {
  HeaderMacros h;
  h.values = macros_extra;
  for (const auto& [k, v] : macros_extra) h.names.insert(k);
  try {
    return to_file_scan(analyze(bytes, rel_path, cfg, h));
  } catch (const Error& e) {
    FileScan f;
    f.rel_path = rel_path;
    f.error = fmt::format("{}: {}", to_string(e.code()), e.what());
    return f;
  }
}

ScanReport scan_tree(const fs::path& srcdir, const Config& cfg) {
  ScanReport r;
  MacroHeaderCache headers(srcdir, cfg);
  for (const auto& rel : list_sources(srcdir, cfg)) {
    try {
      const auto bytes = read_text_file(srcdir / rel);
      const auto probe = load_translation_unit(bytes, rel);
      r.files.push_back(to_file_scan(analyze(bytes, rel, cfg, headers.for_file(probe, rel))));
    } catch (const Error& e) {
      FileScan f;
      f.rel_path = rel;
      f.error = fmt::format("{}: {}", to_string(e.code()), e.what());
      r.files.push_back(std::move(f));
    }
  }
  return r;
}

std::string scan_report_to_json(const ScanReport& report) {
  json files = json::array();
  for (const auto& f : report.files) {
    json qcs = json::array();
    for (const auto& q : f.qcs) {
      json jq = {{"qc_id", q.qc_id},       {"line", q.line},
                 {"function", q.function}, {"var", q.var_expr},
                 {"const", q.const_text},  {"const_value", q.const_value},
                 {"eligible", q.eligible}};
      if (q.skip) {
        jq["skip"] = std::string(to_string(*q.skip));
        jq["detail"] = q.detail;
      }
      qcs.push_back(std::move(jq));
    }
    json jf = {{"file", f.rel_path}, {"qcs", qcs}};
    if (!f.error.empty()) jf["error"] = f.error;
    files.push_back(std::move(jf));
  }
  json j = {{"files", files},
            {"qc_count", report.qc_count()},
            {"eligible_count", report.eligible_count()},
            {"skips", report.skip_histogram()}};
  return j.dump(2) + "\n";
}

std::string scan_report_to_text(const ScanReport& report) {
  std::string out;
  for (const auto& f : report.files) {
    if (!f.error.empty()) {
      out += fmt::format("{}: error: {}\n", f.rel_path, f.error);
      continue;
    }
    for (const auto& q : f.qcs) {
      out += fmt::format("{}:{}: {}: if ({} == {}) ", f.rel_path, q.line, q.function, q.var_expr, q.const_text);
      out += q.eligible ? "eligible\n" : fmt::format("Skip({}): {}\n", to_string(*q.skip), q.detail);
    }
  }
  out += fmt::format("{} qualified conditions, {} eligible", report.qc_count(), report.eligible_count());
  for (const auto& [k, v] : report.skip_histogram()) out += fmt::format(", {} {}", v, k);
  out += "\n";
  return out;
}

// ---- protect --------------------------------------------------------------

ProtectedSource protect_source(std::string_view bytes, const std::string& rel_path, const Config& cfg) {
  std::vector<AnalyzedFile> files;
  files.push_back(analyze(bytes, rel_path, cfg, {}));
  ProtectedSource out;
  auto texts = transform_files(files, cfg, out.keymap);
  out.text = texts.count(rel_path) != 0 ? texts[rel_path] : std::string(bytes);
  return out;
}

ProtectResult protect_tree(const fs::path& srcdir, const fs::path& outdir, const fs::path& keymap_path,
                           const Config& cfg, bool force) {
  cfg.validate();
  if (fs::exists(outdir)) {
    if (!fs::is_directory(outdir)) throw Error(ErrorCode::Io, outdir.string() + " exists and is not a directory");
    if (!fs::is_empty(outdir) && !force)
      throw Error(ErrorCode::Io, outdir.string() + " is not empty (use --force to replace it)");
  }
  const auto all = list_all_files(srcdir);
  const auto sources = list_sources(srcdir, cfg);

  MacroHeaderCache headers(srcdir, cfg);
  std::vector<AnalyzedFile> files;
  for (const auto& rel : sources) {
    const auto bytes = read_text_file(srcdir / rel);
    const auto probe = load_translation_unit(bytes, rel);
    files.push_back(analyze(bytes, rel, cfg, headers.for_file(probe, rel)));
  }
  ProtectResult result;
  result.files = files.size();
  const auto texts = transform_files(files, cfg, result.keymap);
  if (result.keymap.records.empty())
    result.warnings.push_back("no eligible qualified conditions; the protected tree equals the input");

  const fs::path parent = fs::absolute(outdir).parent_path();
  fs::create_directories(parent);
  std::string tmpl = (parent / ("." + outdir.filename().string() + ".staging-XXXXXX")).string();
  if (::mkdtemp(tmpl.data()) == nullptr) throw Error(ErrorCode::Io, "cannot create staging directory in " + parent.string());
  const fs::path staging = tmpl;
  try {
    for (const auto& rel : all) {
      const auto dst = staging / rel;
      fs::create_directories(dst.parent_path());
      if (auto it = texts.find(rel); it != texts.end()) {
        write_text_file(dst, it->second);
        fs::permissions(dst, fs::status(srcdir / rel).permissions());
      } else {
        fs::copy_file(srcdir / rel, dst);
      }
    }
    if (fs::exists(outdir)) fs::remove_all(outdir);
    fs::rename(staging, outdir);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  save_keymap(result.keymap, keymap_path);
  return result;
}

// ---- build / patch / verify / attack ----------------------------------------

std::string compiler_command(const Config& cfg, const std::vector<fs::path>& inputs, const fs::path& output) {
  std::string in;
  for (const auto& p : inputs) {
    if (!in.empty()) in += ' ';
    in += shell_quote(p.string());
  }
  std::string cmd = cfg.compiler;
  replace_all(cmd, "{flags}", cfg.flags);
  replace_all(cmd, "{output}", shell_quote(output.string()));
  replace_all(cmd, "{inputs}", in);
  return cmd;
}

BuildResult build_program(const fs::path& srcdir, const fs::path& output, const Config& cfg) {
  cfg.validate();
  std::vector<fs::path> inputs;
  for (const auto& rel : list_sources(srcdir, cfg)) inputs.push_back(fs::absolute(srcdir / rel));
  if (inputs.empty()) throw Error(ErrorCode::CompilerFailed, "no C sources under " + srcdir.string());
  if (output.has_parent_path()) fs::create_directories(output.parent_path());
  std::error_code ec;
  fs::remove(output, ec);
  const auto cmd = compiler_command(cfg, inputs, output);
  const auto r = run_shell(cmd);
  if (r.exit_status != 0) {
    std::string hint;
    if (r.exit_status == 127)
      hint = "\nthe compiler was not found; set CLBFORGE_CC or \"compiler\" in the config file";
    throw Error(ErrorCode::CompilerFailed,
                fmt::format("compiler exited with status {}: {}\n{}{}", r.exit_status, cmd, r.output, hint));
  }
  if (!fs::exists(output))
    throw Error(ErrorCode::CompilerFailed, fmt::format("compiler produced no {}: {}\n{}", output.string(), cmd, r.output));
  return {output, r.output};
}

fs::path default_patch_report_path(const fs::path& executable) { return executable.string() + ".patch.json"; }

PatchReport patch_executable(const fs::path& in, const fs::path& out, const Keymap& keymap, const Config& cfg,
                             const fs::path& report_path) {
  auto image = ExecutableImage::load_file(in);
  const auto report = run_pipeline(image, keymap, cfg);
  const auto json_text = patch_report_to_json(report);
  const std::vector<std::uint8_t> report_bytes(json_text.begin(), json_text.end());
  write_file_atomic(report_path, report_bytes);
  try {
    write_file_atomic(out, image.bytes(), &in);
  } catch (...) {
    std::error_code ec;
    fs::remove(report_path, ec);
    throw;
  }
  return report;
}

VerifyReport verify_executable(const fs::path& exe, const Keymap& keymap, const PatchReport& report) {
  return verify(ExecutableImage::load_file(exe), keymap, report);
}

TamperReport attack_executable(const fs::path& in, const fs::path& out, const AttackOptions& opts, const Config& cfg,
                               const Keymap* keymap) {
  TamperResult r;
  if (opts.mode == AttackMode::Strings) {
    const auto bytes = read_file_bytes(in);
    const std::string section = opts.section.value_or(".rodata");
    std::optional<FileRange> within;
    if (!section.empty()) {
      const auto image = ExecutableImage::load(bytes);
      const auto* s = image.find_section(section);
      if (s == nullptr || !s->occupies_file())
        throw Error(ErrorCode::UnknownSection, fmt::format("no section '{}' with file contents", section));
      within = FileRange{s->file_offset, s->size};
    }
    r = tamper_strings(bytes, opts.seed, opts.count, cfg.min_string_len, within, opts.replacement);
  } else {
    const auto image = ExecutableImage::load_file(in);
    std::vector<FileRange> exclude;
    if (keymap != nullptr) {
      const auto& text = image.text();
      for (const auto& rec : keymap->records)
        for (const auto* s : image.find_symbols(rec.ext_symbol))
          if (s->vaddr >= text.vaddr && s->vaddr < text.vaddr + text.size)
            exclude.push_back({text.file_offset + (s->vaddr - text.vaddr), s->size});
    }
    r = tamper_bytes(image, opts.seed, opts.count, opts.section.value_or(".text"), exclude);
  }
  write_file_atomic(out, r.bytes, &in);
  return r.report;
}

// ---- evaluate / report -------------------------------------------------------

std::string_view to_string(Equivalence e) noexcept { return e == Equivalence::Identical ? "identical" : "diverged"; }

std::string_view to_string(DetectionClass c) noexcept {
  switch (c) {
    case DetectionClass::DetectedAtStartup: return "detected-at-startup";
    case DetectionClass::DetectedDuringInput: return "detected-during-input";
    case DetectionClass::Undetected: return "undetected";
    case DetectionClass::CrashedOther: return "crashed-other";
  }
  return "crashed-other";
}

std::optional<DetectionClass> detection_class_from_string(std::string_view s) noexcept {
  for (auto c : {DetectionClass::DetectedAtStartup, DetectionClass::DetectedDuringInput, DetectionClass::Undetected,
                 DetectionClass::CrashedOther})
    if (to_string(c) == s) return c;
  return std::nullopt;
}

DetectionClass classify(std::optional<int> exit_status, bool marker_seen, std::size_t consumed_inputs,
                        int detection_status) noexcept {
  if (!exit_status) return DetectionClass::CrashedOther;
  if (*exit_status == detection_status && marker_seen)
    return consumed_inputs == 0 ? DetectionClass::DetectedAtStartup : DetectionClass::DetectedDuringInput;
  if (*exit_status == 0) return DetectionClass::Undetected;
  return DetectionClass::CrashedOther;
}

DetectionClass classify(const RunResult& run, int detection_status) noexcept {
  const std::optional<int> status =
      run.timed_out || run.signaled ? std::nullopt : std::optional<int>(run.exit_status);
  return classify(status, run.err.find(kDetectionMessage) != std::string::npos, run.sends_consumed, detection_status);
}

EvalReport evaluate(const EvaluateInputs& in, const Config& cfg) {
  const auto script = load_input_script(in.script);
  EvalReport r;
  r.program = in.program;
  r.stage_seconds = in.prior_stage_seconds;

  const auto orig = run_with_script({in.original.string()}, script, cfg.timeout_seconds);
  r.stage_seconds["run_original"] = orig.wall.count();
  const auto prot = run_with_script({in.protected_exe.string()}, script, cfg.timeout_seconds);
  r.stage_seconds["run_protected"] = prot.wall.count();
  r.equivalence = orig.out == prot.out ? Equivalence::Identical : Equivalence::Diverged;

  if (in.tampered) {
    const auto tam = run_with_script({in.tampered->string()}, script, cfg.timeout_seconds);
    r.stage_seconds["run_tampered"] = tam.wall.count();
    r.detection = classify(tam, cfg.detection_status);
  }
  const auto osize = fs::file_size(in.original);
  const auto psize = fs::file_size(in.protected_exe);
  r.size_overhead_percent =
      osize == 0 ? 0.0 : 100.0 * (static_cast<double>(psize) - static_cast<double>(osize)) / static_cast<double>(osize);
  if (in.patch_report) {
    r.clb_count = in.patch_report->entries.size();
    r.coverage = in.patch_report->coverage;
  }
  return r;
}

std::string eval_report_to_json(const EvalReport& r) {
  json j = {{"program", r.program},
            {"equivalence", std::string(to_string(r.equivalence))},
            {"detection", r.detection ? json(std::string(to_string(*r.detection))) : json(nullptr)},
            {"size_overhead_percent", r.size_overhead_percent},
            {"clb_count", r.clb_count},
            {"coverage", r.coverage},
            {"stage_seconds", r.stage_seconds}};
  return j.dump(2) + "\n";
}

EvalReport eval_report_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    EvalReport r;
    r.program = j.at("program").get<std::string>();
    const auto eq = j.at("equivalence").get<std::string>();
    if (eq != "identical" && eq != "diverged") throw Error(ErrorCode::InvalidReport, "bad equivalence " + eq);
    r.equivalence = eq == "identical" ? Equivalence::Identical : Equivalence::Diverged;
    if (!j.at("detection").is_null()) {
      const auto d = detection_class_from_string(j.at("detection").get<std::string>());
      if (!d) throw Error(ErrorCode::InvalidReport, "bad detection class");
      r.detection = *d;
    }
    r.size_overhead_percent = j.at("size_overhead_percent").get<double>();
    r.clb_count = j.at("clb_count").get<std::size_t>();
    r.coverage = j.at("coverage").get<double>();
    r.stage_seconds = j.at("stage_seconds").get<std::map<std::string, double>>();
    return r;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::InvalidReport, std::string("malformed eval report: ") + e.what());
  }
}

AggregateReport aggregate(std::vector<EvalReport> rows) {
  AggregateReport a;
  a.rows = std::move(rows);
  if (a.rows.empty()) return a;
  const auto n = static_cast<double>(a.rows.size());
  std::map<std::string, std::pair<double, std::size_t>> stages;
  for (const auto& r : a.rows) {
    a.mean_clbs += static_cast<double>(r.clb_count) / n;
    a.mean_overhead_percent += r.size_overhead_percent / n;
    a.mean_coverage += r.coverage / n;
    if (r.equivalence == Equivalence::Identical) ++a.identical;
    if (r.detection) ++a.detection_histogram[std::string(to_string(*r.detection))];
    for (const auto& [k, v] : r.stage_seconds) {
      stages[k].first += v;
      ++stages[k].second;
    }
  }
  for (const auto& [k, v] : stages) a.mean_stage_seconds[k] = v.first / static_cast<double>(v.second);
  return a;
}

AggregateReport load_run_directory(const fs::path& run_dir) {
  std::vector<fs::path> paths;
  if (fs::is_directory(run_dir))
    for (const auto& e : fs::recursive_directory_iterator(run_dir)) {
      const auto name = e.path().filename().string();
      if (e.is_regular_file() && name.size() > 10 && name.ends_with(".eval.json")) paths.push_back(e.path());
    }
  if (paths.empty()) throw Error(ErrorCode::InvalidReport, "no *.eval.json files under " + run_dir.string());
  std::sort(paths.begin(), paths.end());
  std::vector<EvalReport> rows;
  for (const auto& p : paths) rows.push_back(eval_report_from_json(read_text_file(p)));
  return aggregate(std::move(rows));
}

std::string aggregate_to_text(const AggregateReport& a) {
  std::string out = fmt::format("{:<24} {:>5} {:>10} {:>9} {:<10} {}\n", "program", "clbs", "overhead%", "coverage",
                                "output", "detection");
  for (const auto& r : a.rows)
    out += fmt::format("{:<24} {:>5} {:>10.2f} {:>9.3f} {:<10} {}\n", r.program, r.clb_count, r.size_overhead_percent,
                       r.coverage, to_string(r.equivalence), r.detection ? to_string(*r.detection) : "-");
  out += fmt::format("{:<24} {:>5.1f} {:>10.2f} {:>9.3f} {}/{} identical\n", "mean", a.mean_clbs,
                     a.mean_overhead_percent, a.mean_coverage, a.identical, a.rows.size());
  if (!a.detection_histogram.empty()) {
    out += "detection:";
    for (const auto& [k, v] : a.detection_histogram) out += fmt::format(" {}={}", k, v);
    out += "\n";
  }
  if (!a.mean_stage_seconds.empty()) {
    out += "mean stage seconds:";
    for (const auto& [k, v] : a.mean_stage_seconds) out += fmt::format(" {}={:.3f}", k, v);
    out += "\n";
  }
  return out;
}

std::string aggregate_to_json(const AggregateReport& a) {
  json rows = json::array();
  for (const auto& r : a.rows) rows.push_back(json::parse(eval_report_to_json(r)));
  json j = {{"rows", rows},
            {"mean_clbs", a.mean_clbs},
            {"mean_overhead_percent", a.mean_overhead_percent},
            {"mean_coverage", a.mean_coverage},
            {"identical", a.identical},
            {"detection_histogram", a.detection_histogram},
            {"mean_stage_seconds", a.mean_stage_seconds}};
  return j.dump(2) + "\n";
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace clbforge
