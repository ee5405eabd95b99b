#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

namespace clbforge {

struct ScriptStep {
  enum class Kind { Send, Expect } kind = Kind::Send;
  std::string text;

  friend bool operator==(const ScriptStep&, const ScriptStep&) = default;
};

/// Lines `SEND <text>` and `EXPECT <substring>`; blank lines and lines
/// starting with '#' are ignored. Throws Error{InvalidConfig} on other lines.
std::vector<ScriptStep> parse_input_script(const std::string& text);
std::vector<ScriptStep> load_input_script(const std::filesystem::path& path);

struct RunResult {
  int exit_status = -1;  // valid when !signaled && !timed_out
  int signal = 0;
  bool signaled = false;
  bool timed_out = false;
  std::string out;
  std::string err;
  /// SEND lines written to the child before it terminated.
  std::size_t sends_consumed = 0;
  /// An EXPECT was still pending when the child terminated.
  bool expect_unmet = false;
  std::chrono::duration<double> wall{};
};

/// Runs `argv` in a fresh temporary working directory, feeding the script.
/// Each EXPECT waits until the substring appears in stdout after the previous
/// match. Throws Error{ExecFailure} when the process cannot be started.
RunResult run_with_script(const std::vector<std::string>& argv, const std::vector<ScriptStep>& script,
                          double timeout_seconds);

/// Runs a shell command line, capturing combined output.
struct ShellResult {
  int exit_status = -1;
  std::string output;
};
ShellResult run_shell(const std::string& command);

}  // namespace clbforge
