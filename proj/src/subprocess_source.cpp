// Line-oriented measurement runner protocol over a child process's stdio.

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cstring>

#include "countertune/error.hpp"
#include "countertune/search.hpp"
#include "text_util.hpp"

namespace countertune {

SubprocessSource::SubprocessSource(const std::string& command, TuningSpace space, ArchProfile arch)
    : space_(std::move(space)), arch_(std::move(arch)) {
  // A dead runner must surface as an error, not kill the process.
  std::signal(SIGPIPE, SIG_IGN);
  int down[2], up[2];
  if (pipe(down) != 0) throw SearchError(std::string("pipe: ") + std::strerror(errno));
  if (pipe(up) != 0) {
    close(down[0]);
    close(down[1]);
    throw SearchError(std::string("pipe: ") + std::strerror(errno));
  }
  pid_ = fork();
  if (pid_ < 0) {
    for (int fd : {down[0], down[1], up[0], up[1]}) close(fd);
    throw SearchError(std::string("fork: ") + std::strerror(errno));
  }
  if (pid_ == 0) {
    dup2(down[0], STDIN_FILENO);
    dup2(up[1], STDOUT_FILENO);
    for (int fd : {down[0], down[1], up[0], up[1]}) close(fd);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(down[0]);
  close(up[1]);
  fcntl(down[1], F_SETFD, FD_CLOEXEC);
  fcntl(up[0], F_SETFD, FD_CLOEXEC);
  try {
    start(down[1], up[0]);
  } catch (...) {
    shutdown(true);
    throw;
  }
}

void SubprocessSource::start(int to_fd, int from_fd) {
  to_child_ = fdopen(to_fd, "w");
  if (!to_child_) close(to_fd);
  from_child_ = fdopen(from_fd, "r");
  if (!from_child_) close(from_fd);
  if (!to_child_ || !from_child_) throw SearchError("fdopen failed for runner pipes");

  const auto header = read_line();
  const auto cells = detail::split_csv(header);
  if (cells.empty() || cells[0] != "counters") throw SearchError("runner header must start with 'counters': " + header);
  std::vector<bool> seen(kCounterCount, false);
  for (std::size_t i = 1; i < cells.size(); ++i) {
    auto c = resolve_counter_name(cells[i], arch_);
    if (!c) throw SearchError("runner reports unknown counter '" + std::string(cells[i]) + "'");
    seen[index_of(*c)] = true;
    counter_names_.emplace_back(cells[i]);
  }
  for (std::size_t i = 0; i < kHardwareCounterCount; ++i)
    if (!seen[i]) throw SearchError("runner does not report counter " + std::string(abbreviation(counter_at(i))));
}

SubprocessSource::~SubprocessSource() { shutdown(false); }

void SubprocessSource::shutdown(bool kill_child) {
  if (to_child_) std::fclose(to_child_);
  if (from_child_) std::fclose(from_child_);
  to_child_ = from_child_ = nullptr;
  if (pid_ > 0) {
    if (kill_child) ::kill(pid_, SIGTERM);
    int status = 0;
    waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

std::string SubprocessSource::read_line() {
  std::string line;
  int ch;
  while ((ch = std::fgetc(from_child_)) != EOF && ch != '\n') line.push_back(static_cast<char>(ch));
  if (ch == EOF && line.empty()) throw SearchError("runner closed its output");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

Measurement SubprocessSource::measure(std::size_t config_index, bool profile) {
  if (config_index >= space_.size()) throw SearchError("configuration index out of range");
  std::string request;
  for (double v : space_[config_index].assignment) request += detail::format_double(v) + ",";
  request += profile ? "1\n" : "0\n";
  if (std::fputs(request.c_str(), to_child_) < 0 || std::fflush(to_child_) != 0)
    throw SearchError("runner closed its input");

  const auto line = read_line();
  const auto cells = detail::split_csv(line);
  if (!cells.empty() && cells[0] == "error") throw SearchError("runner error: " + line.substr(line.find(',') + 1));
  Measurement m;
  auto runtime = cells.empty() ? std::nullopt : detail::parse_double(cells[0]);
  if (!runtime || !(*runtime > 0.0)) throw SearchError("runner sent malformed runtime: " + line);
  m.runtime_us = *runtime;
  if (!profile) return m;

  if (cells.size() != 2 + counter_names_.size())
    throw SearchError("profiled response has " + std::to_string(cells.size()) + " fields, expected " +
                      std::to_string(2 + counter_names_.size()));
  auto threads = detail::parse_int(cells[1]);
  if (!threads || *threads < 1) throw SearchError("runner sent malformed global_threads: " + line);
  m.global_threads = *threads;
  CounterValues counters;
  counters.set(Counter::GLOBAL_THREADS, static_cast<double>(*threads));
  for (std::size_t i = 0; i < counter_names_.size(); ++i) {
    auto v = detail::parse_double(cells[i + 2]);
    if (!v) throw SearchError("runner sent malformed value for " + counter_names_[i]);
    const auto reading = canonicalize(counter_names_[i], *v, arch_);
    counters.set(reading.counter, reading.value);
  }
  m.counters = counters;
  return m;
}

}  // namespace countertune
