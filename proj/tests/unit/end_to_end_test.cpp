#include <gtest/gtest.h>

#include <fmt/format.h>

#include "clbforge/harness.hpp"
#include "temp_dir.hpp"

namespace clbforge {
namespace {

using testing::TempDir;

// Every CLB executes before the first line of input is read.
constexpr std::string_view kApp = R"C(#include <stdio.h>

#define CMD_LED 3
#define BOOT_MAGIC 0x5a

int never_called(int x)
{
    int s = 0;
    int i;
    for (i = 0; i < x; i++)
        s += i * x + (s >> 3);
    return s;
}

static int led_state;
static const char *banner = "sensor firmware v1.2 ready for commands";

static void handle(int cmd, int arg)
{
    if (cmd == CMD_LED) {
        led_state = arg;
        printf("led set to %d\n", led_state);
    }
    if (arg == 42) {
        printf("the answer\n");
    }
    printf("handled %d\n", cmd);
}

int main(void)
{
    char line[128];
    int boot = BOOT_MAGIC;
    int count = 0;
    if (boot == 0x5a) {
        printf("%s\n", banner);
        count = 1;
    }
    handle(3, 1);
    handle(5, 42);
    printf("ready\n");
    while (fgets(line, sizeof line, stdin)) {
        int cmd = 0, arg = 0;
        if (sscanf(line, "%d %d", &cmd, &arg) < 1)
            continue;
        handle(cmd, arg);
        count++;
    }
    printf("processed %d\n", count);
    return 0;
}
)C";

constexpr std::string_view kScript = "EXPECT ready\nSEND 3 9\nEXPECT led set to 9\nSEND 8 42\nEXPECT handled 8\n";

class EndToEnd : public ::testing::Test {
 protected:
  void SetUp() override {
    if (run_shell("command -v cc").exit_status != 0) GTEST_SKIP() << "no C compiler";
    std::filesystem::create_directories(dir_ / "src");
    write_text_file(dir_ / "src/app.c", std::string(kApp));
    write_text_file(dir_ / "script.txt", std::string(kScript));
    build_program(dir_ / "src", dir_ / "app.orig", cfg_);
    keymap_ = protect_tree(dir_ / "src", dir_ / "prot", dir_ / "km.json", cfg_, false).keymap;
    build_program(dir_ / "prot", dir_ / "app.unpatched", cfg_);
  }

  PatchReport patch(const Config& cfg, const std::string& out) {
    return patch_executable(dir_ / "app.unpatched", dir_ / out, keymap_, cfg, dir_ / (out + ".patch.json"));
  }

  EvalReport run_eval(const std::string& prot, std::optional<std::string> tampered, const PatchReport& report) {
    EvaluateInputs in;
    in.program = "app";
    in.original = dir_ / "app.orig";
    in.protected_exe = dir_ / prot;
    if (tampered) in.tampered = dir_ / *tampered;
    in.script = dir_ / "script.txt";
    in.patch_report = report;
    return evaluate(in, cfg_);
  }

  TempDir dir_;
  Config cfg_;
  Keymap keymap_;
};

TEST_F(EndToEnd, ProtectedProgramBehavesIdentically) {
  ASSERT_EQ(keymap_.records.size(), 3u);
  const auto report = patch(cfg_, "app.prot");
  EXPECT_TRUE(verify_executable(dir_ / "app.prot", keymap_, report).all_pass());
  EXPECT_GT(report.coverage, 0.0);
  const auto eval = run_eval("app.prot", std::nullopt, report);
  EXPECT_EQ(eval.equivalence, Equivalence::Identical);
  EXPECT_EQ(eval.clb_count, 3u);
  EXPECT_GT(eval.size_overhead_percent, 0.0);
  EXPECT_FALSE(eval.detection);
}

TEST_F(EndToEnd, UnpatchedBinaryCannotRunProtectedCode) {
  // the len placeholder still holds its magic, so the runtime must not run the encrypted body
  const auto r = run_with_script({(dir_ / "app.unpatched").string()}, parse_input_script(std::string(kScript)), 10.0);
  EXPECT_NE(r.exit_status, 0);
}

TEST_F(EndToEnd, StringTamperOutsideTextIsNotDetectedWithTextScope) {
  const auto report = patch(cfg_, "app.prot");
  // tamper the banner; a rewritten format string would stall the script's EXPECTs
  const std::string banner = "sensor firmware v1.2 ready for commands";
  AttackOptions opts;
  opts.count = 1;
  bool hit = false;
  for (opts.seed = 0; opts.seed < 64 && !hit; ++opts.seed) {
    const auto t = attack_executable(dir_ / "app.prot", dir_ / "app.tampered", opts, cfg_, &keymap_);
    hit = std::string(t.entries.at(0).original.begin(), t.entries.at(0).original.end()) == banner;
  }
  ASSERT_TRUE(hit);
  EXPECT_TRUE(verify_executable(dir_ / "app.tampered", keymap_, report).all_pass());
  const auto eval = run_eval("app.prot", "app.tampered", report);
  EXPECT_EQ(eval.detection, DetectionClass::Undetected);
}

TEST_F(EndToEnd, StringTamperDetectedAtStartupWithFileScope) {
  Config file_scope = cfg_;
  file_scope.region_scope = RegionScope::File;
  const auto report = patch(file_scope, "app.prot");
  AttackOptions opts;
  opts.count = 1;
  opts.seed = 3;
  const auto tamper = attack_executable(dir_ / "app.prot", dir_ / "app.tampered", opts, file_scope, &keymap_);
  ASSERT_EQ(tamper.entries.size(), 1u);
  EXPECT_FALSE(verify_executable(dir_ / "app.tampered", keymap_, report).all_pass());
  const auto eval = run_eval("app.prot", "app.tampered", report);
  EXPECT_EQ(eval.equivalence, Equivalence::Identical);
  EXPECT_EQ(eval.detection, DetectionClass::DetectedAtStartup);
}

TEST_F(EndToEnd, ByteFlipInDeadCodeDetectedAtStartup) {
  const auto report = patch(cfg_, "app.prot");
  auto img = ExecutableImage::load_file(dir_ / "app.prot");
  const auto syms = img.find_symbols("never_called");
  ASSERT_EQ(syms.size(), 1u);
  const auto off = *img.vaddr_to_offset(syms.front()->vaddr) + syms.front()->size / 2;
  const bool covered = std::any_of(report.entries.begin(), report.entries.end(), [&](const PatchEntry& e) {
    return off >= e.region.offset && off < e.region.end();
  });
  ASSERT_TRUE(covered) << "never_called is expected to precede every ext_fun";
  img.bytes()[off] ^= 0xff;
  const auto mode_from = dir_ / "app.prot";
  write_file_atomic(dir_ / "app.flipped", img.bytes(), &mode_from);
  EXPECT_FALSE(verify_executable(dir_ / "app.flipped", keymap_, report).all_pass());
  const auto eval = run_eval("app.prot", "app.flipped", report);
  EXPECT_EQ(eval.detection, DetectionClass::DetectedAtStartup);
}

TEST_F(EndToEnd, CommandLinePipeline) {
  const std::string cli = CLBFORGE_CLI_PATH;
  if (cli.empty()) GTEST_SKIP() << "command-line tool not built";
  const auto work = dir_ / "work";
  const auto r = run_shell(fmt::format("'{}' --seed 5 pipeline '{}' '{}' --script '{}' --attack bytes -n 2", cli,
                                       (dir_ / "src").string(), work.string(), (dir_ / "script.txt").string()));
  ASSERT_EQ(r.exit_status, 0) << r.output;
  const auto eval = eval_report_from_json(read_text_file(work / "src.eval.json"));
  EXPECT_EQ(eval.equivalence, Equivalence::Identical);
  EXPECT_EQ(eval.clb_count, 3u);
  ASSERT_TRUE(eval.detection);
  const auto report = run_shell(fmt::format("'{}' report '{}'", cli, work.string()));
  EXPECT_EQ(report.exit_status, 0) << report.output;
}

}  // namespace
}  // namespace clbforge
