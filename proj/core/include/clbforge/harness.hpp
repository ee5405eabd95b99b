#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clbforge/attack.hpp"
#include "clbforge/config.hpp"
#include "clbforge/keymap.hpp"
#include "clbforge/patcher.hpp"
#include "clbforge/process.hpp"
#include "clbforge/source_model.hpp"

namespace clbforge {

namespace fs = std::filesystem;

// ---- scan -----------------------------------------------------------------

struct QcScan {
  std::uint32_t qc_id = 0;
  std::size_t line = 0;
  std::string function;
  std::string var_expr;
  std::string const_text;
  std::int32_t const_value = 0;
  bool eligible = false;
  std::optional<SkipReason> skip;
  std::string detail;
};

struct FileScan {
  std::string rel_path;
  std::string error;  // non-empty when the file did not parse
  std::vector<QcScan> qcs;
};

struct ScanReport {
  std::vector<FileScan> files;

  std::size_t qc_count() const noexcept;
  std::size_t eligible_count() const noexcept;
  std::map<std::string, std::size_t> skip_histogram() const;
};

/// C sources under `srcdir` selected by the include/exclude globs, as sorted
/// '/'-separated relative paths.
std::vector<std::string> list_sources(const fs::path& srcdir, const Config& cfg);

ScanReport scan_tree(const fs::path& srcdir, const Config& cfg);
/// Scans one in-memory file; `macros_extra` come from configured headers.
FileScan scan_source(std::string_view bytes, const std::string& rel_path, const Config& cfg,
                     const MacroTable& macros_extra = {});
std::string scan_report_to_json(const ScanReport& report);
std::string scan_report_to_text(const ScanReport& report);

// ---- protect --------------------------------------------------------------

struct ProtectResult {
  Keymap keymap;
  std::size_t files = 0;
  std::vector<std::string> warnings;
};

/// Writes the protected tree to `outdir` and the keymap to `keymap_path`.
/// Everything is staged first; on error nothing is left behind.
ProtectResult protect_tree(const fs::path& srcdir, const fs::path& outdir, const fs::path& keymap_path,
                           const Config& cfg, bool force);

/// In-memory protection of one file, for tests and benchmarks.
struct ProtectedSource {
  std::string text;
  Keymap keymap;
};
ProtectedSource protect_source(std::string_view bytes, const std::string& rel_path, const Config& cfg);

// ---- build / patch / verify / attack ----------------------------------------

/// Expands the compiler template; inputs are shell-quoted.
std::string compiler_command(const Config& cfg, const std::vector<fs::path>& inputs, const fs::path& output);
struct BuildResult {
  fs::path executable;
  std::string diagnostics;  // compiler output, verbatim
};
/// Throws Error{CompilerFailed} carrying the compiler's diagnostics.
BuildResult build_program(const fs::path& srcdir, const fs::path& output, const Config& cfg);

fs::path default_patch_report_path(const fs::path& executable);
/// All-or-nothing: `out` is written only when every step succeeds.
PatchReport patch_executable(const fs::path& in, const fs::path& out, const Keymap& keymap, const Config& cfg,
                             const fs::path& report_path);

VerifyReport verify_executable(const fs::path& exe, const Keymap& keymap, const PatchReport& report);

enum class AttackMode { Strings, Bytes };

struct AttackOptions {
  AttackMode mode = AttackMode::Strings;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  /// Defaults: .rodata for strings, .text for bytes. Empty string = whole file (strings only).
  std::optional<std::string> section;
  std::string replacement{kDefaultReplacement};
};

/// Encrypted ext_fun spans are skipped in byte mode when `keymap` is given.
TamperReport attack_executable(const fs::path& in, const fs::path& out, const AttackOptions& opts,
                               const Config& cfg, const Keymap* keymap = nullptr);

// ---- evaluate / report -------------------------------------------------------

enum class Equivalence { Identical, Diverged };
enum class DetectionClass { DetectedAtStartup, DetectedDuringInput, Undetected, CrashedOther };

std::string_view to_string(Equivalence e) noexcept;
std::string_view to_string(DetectionClass c) noexcept;
std::optional<DetectionClass> detection_class_from_string(std::string_view s) noexcept;

/// `exit_status` is nullopt for signals and timeouts.
DetectionClass classify(std::optional<int> exit_status, bool marker_seen, std::size_t consumed_inputs,
                        int detection_status) noexcept;
DetectionClass classify(const RunResult& run, int detection_status) noexcept;

struct EvalReport {
  std::string program;
  Equivalence equivalence = Equivalence::Diverged;
  std::optional<DetectionClass> detection;  // absent when no tampered binary was run
  double size_overhead_percent = 0.0;
  std::size_t clb_count = 0;
  double coverage = 0.0;
  std::map<std::string, double> stage_seconds;
};

struct EvaluateInputs {
  std::string program;
  fs::path original;
  fs::path protected_exe;
  std::optional<fs::path> tampered;
  fs::path script;
  std::optional<PatchReport> patch_report;
  std::map<std::string, double> prior_stage_seconds;
};

EvalReport evaluate(const EvaluateInputs& in, const Config& cfg);

std::string eval_report_to_json(const EvalReport& r);
EvalReport eval_report_from_json(const std::string& text);

struct AggregateReport {
  std::vector<EvalReport> rows;
  double mean_clbs = 0.0;
  double mean_overhead_percent = 0.0;
  double mean_coverage = 0.0;
  std::size_t identical = 0;
  std::map<std::string, std::size_t> detection_histogram;
  std::map<std::string, double> mean_stage_seconds;
};

AggregateReport aggregate(std::vector<EvalReport> rows);
/// Collects every "*.eval.json" below `run_dir`. Throws Error{InvalidReport} when none exist.
AggregateReport load_run_directory(const fs::path& run_dir);
std::string aggregate_to_text(const AggregateReport& a);
std::string aggregate_to_json(const AggregateReport& a);

std::string read_text_file(const fs::path& path);
void write_text_file(const fs::path& path, const std::string& text);

}  // namespace clbforge
