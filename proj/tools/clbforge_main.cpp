// clbforge: scan, protect, build, patch, verify, attack and evaluate C programs.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "clbforge/error.hpp"
#include "clbforge/harness.hpp"

namespace {

using namespace clbforge;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitPipeline = 2;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool json = false;
};

Config resolve_config(const Globals& g) {
  Config cfg = g.config_path.empty() ? Config{} : load_config(g.config_path);
  apply_environment(cfg);
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  return cfg;
}

void keymap_warning(const fs::path& path) {
  fmt::print(stderr, "warning: {} holds the CLB decryption keys; do not ship it with the binary\n", path.string());
}

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PatchReport load_patch_report(const fs::path& p) { return patch_report_from_json(read_text_file(p)); }

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) fmt::print(stderr, "warning: {}\n", w);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clbforge: logic-bomb anti-repackaging toolchain for C programs"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed for salts and attacks (overrides the config)");
  app.add_flag("--json", g.json, "Machine-readable output");

  // scan
  std::string scan_src;
  auto* scan = app.add_subcommand("scan", "List qualified conditions and their eligibility");
  scan->add_option("srcdir", scan_src)->required()->check(CLI::ExistingDirectory);

  // protect
  std::string prot_src, prot_out, prot_keymap;
  bool prot_force = false;
  auto* protect = app.add_subcommand("protect", "Write a protected copy of a source tree");
  protect->add_option("srcdir", prot_src)->required()->check(CLI::ExistingDirectory);
  protect->add_option("outdir", prot_out)->required();
  protect->add_option("--keymap", prot_keymap, "Keymap output path (default <outdir>.keymap.json)");
  protect->add_flag("--force", prot_force, "Replace a non-empty output directory");

  // build
  std::string build_src, build_out;
  auto* build = app.add_subcommand("build", "Compile a source tree with the configured compiler");
  build->add_option("srcdir", build_src)->required()->check(CLI::ExistingDirectory);
  build->add_option("-o,--out", build_out, "Executable path")->required();

  // patch
  std::string patch_in, patch_out, patch_keymap, patch_report;
  auto* patch = app.add_subcommand("patch", "Patch AT placeholders and encrypt ext_funs in an executable");
  patch->add_option("executable", patch_in)->required()->check(CLI::ExistingFile);
  patch->add_option("--keymap", patch_keymap)->required()->check(CLI::ExistingFile);
  patch->add_option("-o,--out", patch_out, "Output executable (default: in place)");
  patch->add_option("--report", patch_report, "Patch report path (default <out>.patch.json)");

  // verify
  std::string ver_in, ver_keymap, ver_report;
  auto* verify_cmd = app.add_subcommand("verify", "Recompute every AT digest of a patched executable");
  verify_cmd->add_option("executable", ver_in)->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("--keymap", ver_keymap)->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("--report", ver_report, "Patch report (default <executable>.patch.json)");

  // attack
  std::string atk_in, atk_out, atk_mode = "strings", atk_keymap, atk_section, atk_report;
  std::string atk_replacement{kDefaultReplacement};
  std::size_t atk_n = 1;
  auto* attack = app.add_subcommand("attack", "Produce a tampered copy of an executable");
  attack->add_option("executable", atk_in)->required()->check(CLI::ExistingFile);
  attack->add_option("--mode", atk_mode)->check(CLI::IsMember({"strings", "bytes"}));
  attack->add_option("-n,--count", atk_n, "Strings to replace or bytes to flip");
  auto* section_opt = attack->add_option(
      "--section", atk_section, "Section to attack (default .rodata for strings, .text for bytes; '' = whole file)");
  attack->add_option("--keymap", atk_keymap, "Skip encrypted ext_funs in byte mode")->check(CLI::ExistingFile);
  attack->add_option("--replacement", atk_replacement);
  attack->add_option("-o,--out", atk_out, "Tampered executable (default <executable>.tampered)");
  attack->add_option("--report", atk_report, "Tamper report (default <out>.tamper.json)");

  // evaluate
  std::string ev_orig, ev_prot, ev_tam, ev_script, ev_patch_report, ev_name, ev_out;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Run binaries on an input script and classify the outcome");
  evaluate_cmd->add_option("--original", ev_orig)->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--protected", ev_prot)->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--tampered", ev_tam)->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--script", ev_script)->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--patch-report", ev_patch_report)->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--name", ev_name, "Program name (default: original's file name)");
  evaluate_cmd->add_option("-o,--out", ev_out, "Write the EvalReport JSON here");

  // report
  std::string rep_dir;
  auto* report = app.add_subcommand("report", "Aggregate *.eval.json files of a run directory");
  report->add_option("rundir", rep_dir)->required()->check(CLI::ExistingDirectory);

  // pipeline
  std::string pl_src, pl_work, pl_script, pl_mode = "strings";
  std::size_t pl_n = 1;
  auto* pipeline = app.add_subcommand("pipeline", "protect, build, patch, verify, attack and evaluate one program");
  pipeline->add_option("srcdir", pl_src)->required()->check(CLI::ExistingDirectory);
  pipeline->add_option("workdir", pl_work)->required();
  pipeline->add_option("--script", pl_script, "Input script")->required()->check(CLI::ExistingFile);
  pipeline->add_option("--attack", pl_mode)->check(CLI::IsMember({"strings", "bytes", "none"}));
  pipeline->add_option("-n,--count", pl_n);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    const Config cfg = resolve_config(g);

    if (*scan) {
      const auto r = scan_tree(scan_src, cfg);
      std::cout << (g.json ? scan_report_to_json(r) : scan_report_to_text(r));
      const bool any_ok = r.files.empty() ||
                          std::any_of(r.files.begin(), r.files.end(), [](const FileScan& f) { return f.error.empty(); });
      return any_ok ? kExitOk : kExitPipeline;
    }

    if (*protect) {
      const fs::path keymap = prot_keymap.empty() ? fs::path(prot_out + ".keymap.json") : fs::path(prot_keymap);
      const auto r = protect_tree(prot_src, prot_out, keymap, cfg, prot_force);
      print_warnings(r.warnings);
      keymap_warning(keymap);
      if (g.json)
        std::cout << fmt::format("{{\"files\": {}, \"clbs\": {}, \"keymap\": \"{}\"}}\n", r.files,
                                 r.keymap.records.size(), keymap.string());
      else
        fmt::print("protected {} file(s), {} CLB(s) injected; keymap {}\n", r.files, r.keymap.records.size(),
                   keymap.string());
      return kExitOk;
    }

    if (*build) {
      const auto r = build_program(build_src, build_out, cfg);
      if (!r.diagnostics.empty()) std::cerr << r.diagnostics;
      fmt::print("{}\n", r.executable.string());
      return kExitOk;
    }

    if (*patch) {
      const fs::path out = patch_out.empty() ? fs::path(patch_in) : fs::path(patch_out);
      const fs::path rep = patch_report.empty() ? default_patch_report_path(out) : fs::path(patch_report);
      const auto r = patch_executable(patch_in, out, load_keymap(patch_keymap), cfg, rep);
      print_warnings(r.warnings);
      if (g.json)
        std::cout << patch_report_to_json(r);
      else
        fmt::print("patched {} CLB(s) in {}; coverage {:.3f}; report {}\n", r.entries.size(), out.string(), r.coverage,
                   rep.string());
      return kExitOk;
    }

    if (*verify_cmd) {
      const fs::path rep = ver_report.empty() ? default_patch_report_path(ver_in) : fs::path(ver_report);
      const auto r = verify_executable(ver_in, load_keymap(ver_keymap), load_patch_report(rep));
      if (g.json) {
        std::cout << verify_report_to_json(r);
      } else {
        for (const auto& e : r.entries)
          fmt::print("{} {} {}\n", e.pass ? "PASS" : "FAIL", e.symbol, e.detail);
        fmt::print("{}/{} AT checks verified\n",
                   std::count_if(r.entries.begin(), r.entries.end(), [](const VerifyEntry& e) { return e.pass; }),
                   r.entries.size());
      }
      return r.all_pass() ? kExitOk : kExitPipeline;
    }

    if (*attack) {
      AttackOptions opts;
      opts.mode = atk_mode == "bytes" ? AttackMode::Bytes : AttackMode::Strings;
      opts.count = atk_n;
      opts.seed = cfg.seed;
      if (section_opt->count() > 0) opts.section = atk_section;
      opts.replacement = atk_replacement;
      const fs::path out = atk_out.empty() ? fs::path(atk_in + ".tampered") : fs::path(atk_out);
      const fs::path rep = atk_report.empty() ? fs::path(out.string() + ".tamper.json") : fs::path(atk_report);
      std::optional<Keymap> km;
      if (!atk_keymap.empty()) km = load_keymap(atk_keymap);
      const auto r = attack_executable(atk_in, out, opts, cfg, km ? &*km : nullptr);
      write_text_file(rep, tamper_report_to_json(r));
      if (g.json)
        std::cout << tamper_report_to_json(r);
      else
        fmt::print("tampered {} site(s); wrote {} and {}\n", r.entries.size(), out.string(), rep.string());
      return kExitOk;
    }

    if (*evaluate_cmd) {
      EvaluateInputs in;
      in.program = ev_name.empty() ? fs::path(ev_orig).filename().string() : ev_name;
      in.original = ev_orig;
      in.protected_exe = ev_prot;
      if (!ev_tam.empty()) in.tampered = fs::path(ev_tam);
      in.script = ev_script;
      if (!ev_patch_report.empty()) in.patch_report = load_patch_report(ev_patch_report);
      const auto r = evaluate(in, cfg);
      const auto text = eval_report_to_json(r);
      if (!ev_out.empty()) write_text_file(ev_out, text);
      if (g.json || ev_out.empty())
        std::cout << text;
      else
        fmt::print("{}: output {}, tampered {}\n", r.program, to_string(r.equivalence),
                   r.detection ? to_string(*r.detection) : "not run");
      return kExitOk;
    }

    if (*report) {
      const auto a = load_run_directory(rep_dir);
      std::cout << (g.json ? aggregate_to_json(a) : aggregate_to_text(a));
      return kExitOk;
    }

    if (*pipeline) {
      const fs::path src = pl_src;
      const fs::path work = pl_work;
      const std::string name = fs::absolute(src).lexically_normal().filename().string();
      fs::create_directories(work);
      std::map<std::string, double> t;

      auto t0 = std::chrono::steady_clock::now();
      const auto keymap_path = work / "keymap.json";
      const auto prot = protect_tree(src, work / "protected_src", keymap_path, cfg, true);
      t["protect"] = since(t0);
      print_warnings(prot.warnings);
      keymap_warning(keymap_path);

      t0 = std::chrono::steady_clock::now();
      build_program(src, work / (name + ".orig"), cfg);
      const auto exe = work / (name + ".prot");
      build_program(work / "protected_src", exe, cfg);
      t["build"] = since(t0);

      t0 = std::chrono::steady_clock::now();
      const auto patch_rep = patch_executable(exe, exe, prot.keymap, cfg, default_patch_report_path(exe));
      t["patch"] = since(t0);
      print_warnings(patch_rep.warnings);

      t0 = std::chrono::steady_clock::now();
      const auto ver = verify_executable(exe, prot.keymap, patch_rep);
      t["verify"] = since(t0);
      if (!ver.all_pass()) {
        fmt::print(stderr, "error: verification failed\n");
        return kExitPipeline;
      }

      EvaluateInputs in;
      in.program = name;
      in.original = work / (name + ".orig");
      in.protected_exe = exe;
      in.script = pl_script;
      in.patch_report = patch_rep;
      if (pl_mode != "none") {
        AttackOptions opts;
        opts.mode = pl_mode == "bytes" ? AttackMode::Bytes : AttackMode::Strings;
        opts.count = pl_n;
        opts.seed = cfg.seed;
        const fs::path tam = exe.string() + ".tampered";
        t0 = std::chrono::steady_clock::now();
        const auto tr = attack_executable(exe, tam, opts, cfg, &prot.keymap);
        t["attack"] = since(t0);
        write_text_file(tam.string() + ".tamper.json", tamper_report_to_json(tr));
        in.tampered = tam;
      }
      in.prior_stage_seconds = t;
      const auto r = evaluate(in, cfg);
      const auto text = eval_report_to_json(r);
      write_text_file(work / (name + ".eval.json"), text);
      if (g.json)
        std::cout << text;
      else
        fmt::print("{}: {} CLB(s), coverage {:.3f}, overhead {:.2f}%, output {}, tampered {}\n", r.program, r.clb_count,
                   r.coverage, r.size_overhead_percent, to_string(r.equivalence),
                   r.detection ? to_string(*r.detection) : "not run");
      return kExitOk;
    }
  } catch (const clbforge::Error& e) {
    fmt::print(stderr, "error: {}: {}\n", to_string(e.code()), e.what());
    return kExitPipeline;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitPipeline;
  }
  return kExitUsage;
}
