#include "chiselforge/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <sstream>

extern char** environ;

namespace chiselforge {

namespace {

void append_capped(std::string& out, const char* buf, std::size_t n, std::size_t cap) {
  if (out.size() < cap) out.append(buf, std::min(n, cap - out.size()));
}

using Clock = std::chrono::steady_clock;

std::vector<std::string> merged_environment(const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    std::string kv(*e);
    auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    env[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  for (const auto& [k, v] : overrides) env[k] = v;
  std::vector<std::string> out;
  out.reserve(env.size());
  for (const auto& [k, v] : env) out.push_back(k + "=" + v);
  return out;
}

}  // namespace

std::filesystem::path find_program(const std::string& name) {
  if (name.find('/') != std::string::npos) {
    return ::access(name.c_str(), X_OK) == 0 ? std::filesystem::path(name) : std::filesystem::path();
  }
  const char* path = std::getenv("PATH");
  if (!path) return {};
  std::stringstream ss(path);
  std::string dir;
  while (std::getline(ss, dir, ':')) {
    if (dir.empty()) continue;
    auto candidate = std::filesystem::path(dir) / name;
    if (::access(candidate.c_str(), X_OK) == 0) return candidate;
  }
  return {};
}

ProcessResult run_process(const ProcessSpec& spec) {
  ProcessResult result;
  const auto start = Clock::now();
  if (spec.argv.empty()) {
    result.spawn_failed = true;
    result.output = "empty command";
    return result;
  }
  const auto program = find_program(spec.argv[0]);
  if (program.empty()) {
    result.spawn_failed = true;
    result.output = "program not found: " + spec.argv[0];
    return result;
  }

  // Everything the child needs is prepared before fork; the child only
  // calls async-signal-safe functions.
  std::vector<std::string> env_storage = merged_environment(spec.env);
  std::vector<char*> envp;
  for (auto& s : env_storage) envp.push_back(s.data());
  envp.push_back(nullptr);
  std::vector<std::string> argv_storage = spec.argv;
  std::vector<char*> argv;
  for (auto& s : argv_storage) argv.push_back(s.data());
  argv.push_back(nullptr);
  const std::string program_str = program.string();
  const std::string cwd = spec.cwd.empty() ? std::string() : spec.cwd.string();

  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) {
    result.spawn_failed = true;
    result.output = std::string("pipe: ") + std::strerror(errno);
    return result;
  }

  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fds[0]);
    ::close(fds[1]);
    result.spawn_failed = true;
    result.output = std::string("fork: ") + std::strerror(errno);
    return result;
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    ::dup2(fds[1], STDOUT_FILENO);
    ::dup2(fds[1], STDERR_FILENO);
    if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) _exit(127);
    ::execve(program_str.c_str(), argv.data(), envp.data());
    _exit(127);
  }
  ::setpgid(pid, pid);
  ::close(fds[1]);

  const auto deadline = start + std::chrono::duration_cast<Clock::duration>(
                                    std::chrono::duration<double>(spec.timeout_s));
  int status = 0;
  bool reaped = false;
  bool eof = false;
  char buf[8192];

  while (!eof) {
    const auto now = Clock::now();
    if (now >= deadline) {
      result.timed_out = true;
      break;
    }
    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    pollfd pfd{fds[0], POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining + 1, 100)));
    if (rc < 0 && errno != EINTR) break;
    if (rc > 0) {
      const ssize_t n = ::read(fds[0], buf, sizeof buf);
      if (n > 0) {
        append_capped(result.output, buf, static_cast<std::size_t>(n), spec.max_output_bytes);
      } else if (n == 0) {
        eof = true;
      }
    }
    if (!reaped && ::waitpid(pid, &status, WNOHANG) == pid) {
      reaped = true;
      // Orphaned descendants may still hold the pipe open.
      ::kill(-pid, SIGKILL);
    }
  }

  if (result.timed_out) ::kill(-pid, SIGKILL);
  if (!reaped) {
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
  }
  // Drain whatever was buffered before the kill.
  ::fcntl(fds[0], F_SETFL, O_NONBLOCK);
  for (ssize_t n; (n = ::read(fds[0], buf, sizeof buf)) > 0;) {
    append_capped(result.output, buf, static_cast<std::size_t>(n), spec.max_output_bytes);
  }
  ::close(fds[0]);

  if (!result.timed_out) {
    if (WIFEXITED(status)) {
      result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
      result.exit_code = 128 + WTERMSIG(status);
    }
  }
  result.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

ProcessResult run_shell(const std::string& command, const std::filesystem::path& cwd,
                        double timeout_s, std::map<std::string, std::string> env) {
  ProcessSpec spec;
  spec.argv = {"/bin/sh", "-c", command};
  spec.cwd = cwd;
  spec.env = std::move(env);
  spec.timeout_s = timeout_s;
  return run_process(spec);
}

}  // namespace chiselforge
