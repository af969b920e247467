// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <sys/types.h>

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "promptseg/protocol/frame.hpp"

namespace promptseg::worker {

/// A child process whose stdin/stdout are pipes owned by this object;
/// stderr is inherited. Destruction closes the pipes, then kills and reaps
/// the child if it is still running.
class ChildProcess {
 public:
  /// Throws Error(SpawnFailed) if the executable cannot be started.
  static std::unique_ptr<ChildProcess> spawn(const std::vector<std::string>& argv,
                                             const std::vector<std::string>& extra_env = {});

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;
  ~ChildProcess();

  pid_t pid() const noexcept { return pid_; }

  /// Throws Error(WorkerDied) if the child closed its stdin.
  void write_all(std::string_view bytes);

  /// Next '\n'-terminated line from the child's stdout, or nullopt on
  /// timeout. Throws Error(WorkerDied) on end of stream.
  std::optional<std::string> read_line(std::chrono::milliseconds timeout);

  /// Closes the child's stdin (it sees end of input).
  void close_stdin() noexcept;

  bool running();
  /// Waits up to `timeout` for exit; returns the wait status or nullopt.
  std::optional<int> wait_for(std::chrono::milliseconds timeout);
  void kill(int signal) noexcept;

 private:
  ChildProcess(pid_t pid, int in_fd, int out_fd) : pid_(pid), in_fd_(in_fd), out_fd_(out_fd) {}

  pid_t pid_;
  int in_fd_;
  int out_fd_;
  bool reaped_ = false;
  int status_ = 0;
  protocol::FrameReader reader_;
};

}  // namespace promptseg::worker
