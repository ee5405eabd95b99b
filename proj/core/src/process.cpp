#include "clbforge/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <termios.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <utility>

#include <fmt/format.h>

#include "clbforge/error.hpp"

namespace clbforge {
namespace {

using Clock = std::chrono::steady_clock;

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }
  int get() const noexcept { return fd_; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  void adopt(int fd) {
    reset();
    fd_ = fd;
  }

 private:
  int fd_ = -1;
};

void make_pipe(Fd& r, Fd& w) {
  int p[2];
  if (::pipe2(p, O_CLOEXEC) != 0) throw Error(ErrorCode::ExecFailure, std::string("pipe: ") + std::strerror(errno));
  r.adopt(p[0]);
  w.adopt(p[1]);
}

/// Raw pseudo-terminal pair: stdio line-buffers a terminal, and raw mode
/// keeps the bytes unchanged.
void make_raw_pty(Fd& master, Fd& slave) {
  const int m = ::posix_openpt(O_RDWR | O_NOCTTY | O_CLOEXEC);
  if (m < 0) throw Error(ErrorCode::ExecFailure, std::string("posix_openpt: ") + std::strerror(errno));
  master.adopt(m);
  if (::grantpt(m) != 0 || ::unlockpt(m) != 0)
    throw Error(ErrorCode::ExecFailure, std::string("pty setup: ") + std::strerror(errno));
  const char* name = ::ptsname(m);
  const int s = name == nullptr ? -1 : ::open(name, O_RDWR | O_NOCTTY | O_CLOEXEC);
  if (s < 0) throw Error(ErrorCode::ExecFailure, std::string("pty open: ") + std::strerror(errno));
  slave.adopt(s);
  termios t{};
  if (::tcgetattr(s, &t) == 0) {
    ::cfmakeraw(&t);
    ::tcsetattr(s, TCSANOW, &t);
  }
}

class SigpipeGuard {
 public:
  SigpipeGuard() {
    struct sigaction ign {};
    ign.sa_handler = SIG_IGN;
    ::sigaction(SIGPIPE, &ign, &old_);
  }
  ~SigpipeGuard() { ::sigaction(SIGPIPE, &old_, nullptr); }

 private:
  struct sigaction old_ {};
};

std::string trim_right(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  return s;
}

}  // namespace

std::vector<ScriptStep> parse_input_script(const std::string& text) {
  std::vector<ScriptStep> steps;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim_right(line).empty() || line.front() == '#') continue;
    if (line.rfind("SEND", 0) == 0 && (line.size() == 4 || line[4] == ' ')) {
      steps.push_back({ScriptStep::Kind::Send, line.size() > 5 ? line.substr(5) : std::string()});
    } else if (line.rfind("EXPECT ", 0) == 0 && line.size() > 7) {
      steps.push_back({ScriptStep::Kind::Expect, line.substr(7)});
    } else {
      throw Error(ErrorCode::InvalidConfig, fmt::format("input script line {}: expected SEND or EXPECT", lineno));
    }
  }
  return steps;
}

std::vector<ScriptStep> load_input_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read input script " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_input_script(ss.str());
}

RunResult run_with_script(const std::vector<std::string>& argv, const std::vector<ScriptStep>& script,
                          double timeout_seconds) {
  if (argv.empty()) throw Error(ErrorCode::ExecFailure, "empty command");
  namespace fs = std::filesystem;
  std::string tmpl = (fs::temp_directory_path() / "clbforge-run-XXXXXX").string();
  if (::mkdtemp(tmpl.data()) == nullptr)
    throw Error(ErrorCode::ExecFailure, std::string("mkdtemp: ") + std::strerror(errno));
  const fs::path workdir = tmpl;
  struct Cleanup {
    fs::path p;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(p, ec);
    }
  } cleanup{workdir};

  std::vector<std::string> args = argv;
  args[0] = fs::absolute(args[0]).string();
  std::vector<char*> cargv;
  for (auto& a : args) cargv.push_back(a.data());
  cargv.push_back(nullptr);

  Fd in_r, in_w, out_r, out_w, err_r, err_w, exec_r, exec_w;
  make_pipe(in_r, in_w);
  make_raw_pty(out_r, out_w);
  make_pipe(err_r, err_w);
  make_pipe(exec_r, exec_w);  // reports exec errors; closed by a successful exec

  SigpipeGuard guard;
  const auto start = Clock::now();
  const pid_t pid = ::fork();
  if (pid < 0) throw Error(ErrorCode::ExecFailure, std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(in_r.get(), 0);
    ::dup2(out_w.get(), 1);
    ::dup2(err_w.get(), 2);
    ::signal(SIGPIPE, SIG_DFL);
    if (::chdir(workdir.c_str()) == 0) ::execv(cargv[0], cargv.data());
    const int e = errno;
    ssize_t ignored = ::write(exec_w.get(), &e, sizeof e);
    (void)ignored;
    ::_exit(127);
  }
  in_r.reset();
  out_w.reset();
  err_w.reset();
  exec_w.reset();
  int exec_errno = 0;
  if (::read(exec_r.get(), &exec_errno, sizeof exec_errno) == static_cast<ssize_t>(sizeof exec_errno)) {
    ::waitpid(pid, nullptr, 0);
    throw Error(ErrorCode::ExecFailure, fmt::format("cannot execute {}: {}", args[0], std::strerror(exec_errno)));
  }

  RunResult r;
  const auto deadline = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(timeout_seconds));
  std::size_t step = 0;
  std::size_t match_from = 0;
  bool out_open = true, err_open = true;

  auto feed = [&] {
    while (step < script.size() && in_w.get() >= 0) {
      const auto& s = script[step];
      if (s.kind == ScriptStep::Kind::Expect) {
        const auto pos = r.out.find(s.text, match_from);
        if (pos == std::string::npos) return;
        match_from = pos + s.text.size();
        ++step;
        continue;
      }
      const std::string line = s.text + "\n";
      std::size_t done = 0;
      while (done < line.size()) {
        const auto n = ::write(in_w.get(), line.data() + done, line.size() - done);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
          in_w.reset();
          return;
        }
        done += static_cast<std::size_t>(n);
      }
      ++r.sends_consumed;
      ++step;
    }
    if (step == script.size()) in_w.reset();
  };

  feed();
  while (out_open || err_open) {
    const auto now = Clock::now();
    if (now >= deadline) {
      r.timed_out = true;
      break;
    }
    pollfd fds[2] = {{out_open ? out_r.get() : -1, POLLIN, 0}, {err_open ? err_r.get() : -1, POLLIN, 0}};
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count() + 1;
    const int rc = ::poll(fds, 2, static_cast<int>(std::min<long long>(ms, 1000)));
    if (rc < 0 && errno == EINTR) continue;
    if (rc < 0) break;
    char buf[4096];
    for (int i = 0; i < 2; ++i) {
      if (fds[i].fd < 0 || (fds[i].revents & (POLLIN | POLLHUP | POLLERR)) == 0) continue;
      const auto n = ::read(fds[i].fd, buf, sizeof buf);
      if (n > 0) {
        (i == 0 ? r.out : r.err).append(buf, static_cast<std::size_t>(n));
      } else if (n == 0 || errno != EINTR) {  // a pty master reports EIO once the child is gone
        (i == 0 ? out_open : err_open) = false;
      }
    }
    feed();
  }
  in_w.reset();

  int status = 0;
  if (r.timed_out) {
    ::kill(pid, SIGKILL);
    ::waitpid(pid, &status, 0);
  } else {
    // Output closed; the child may still be running with its streams closed.
    while (true) {
      const pid_t w = ::waitpid(pid, &status, WNOHANG);
      if (w == pid) break;
      if (Clock::now() >= deadline) {
        r.timed_out = true;
        ::kill(pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        break;
      }
      ::usleep(2000);
    }
  }
  r.wall = Clock::now() - start;
  if (!r.timed_out) {
    if (WIFEXITED(status)) {
      r.exit_status = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
      r.signaled = true;
      r.signal = WTERMSIG(status);
    }
  }
  r.expect_unmet = step < script.size();
  return r;
}

ShellResult run_shell(const std::string& command) {
  ShellResult r;
  const std::string full = command + " 2>&1";
  FILE* p = ::popen(full.c_str(), "r");
  if (p == nullptr) throw Error(ErrorCode::ExecFailure, "cannot run: " + command);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
  const int status = ::pclose(p);
  r.exit_status = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
  return r;
}

}  // namespace clbforge
