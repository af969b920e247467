// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "promptseg/worker/client.hpp"
#include "promptseg/worker/installer.hpp"

namespace promptseg::worker {

struct ManagerOptions {
  /// Executable serving the mock model; empty means default_mock_worker_path().
  std::string mock_worker_path;
  /// Extra arguments for the mock worker (fault injection in tests).
  std::vector<std::string> mock_args;
  /// Command line for real workers, split on spaces after substitution of
  /// {python}, {model} and {weights}.
  std::string worker_command = "{python} -m promptseg_worker --model {model} --weights {weights}";
  WorkerClient::Options client;
};

/// $PROMPTSEG_MOCK_WORKER, else promptseg-mock-worker next to the running
/// executable.
std::string default_mock_worker_path();

/// Owns every worker process. Workers are keyed by (owner, model): an owner
/// (normally a session) has at most one worker per model.
class WorkerManager {
 public:
  explicit WorkerManager(std::shared_ptr<Installer> installer, ManagerOptions options = {});
  ~WorkerManager();

  WorkerManager(const WorkerManager&) = delete;
  WorkerManager& operator=(const WorkerManager&) = delete;

  /// Returns the owner's live worker for `model_id`, starting one if needed.
  /// Errors: UnknownModel, SpawnFailed (detail "NotInstalled" for a model
  /// that has not been installed), HandshakeTimeout, ProtocolMismatch.
  std::shared_ptr<WorkerClient> spawn(const std::string& owner, const std::string& model_id);

  /// Replaces the owner's worker for `model_id` with a fresh process.
  std::shared_ptr<WorkerClient> respawn(const std::string& owner, const std::string& model_id);

  std::shared_ptr<WorkerClient> find(const std::string& owner, const std::string& model_id) const;

  /// Shutdown handshake, escalating to SIGKILL after the grace period.
  void terminate(const std::string& owner, const std::string& model_id);
  void terminate_owner(const std::string& owner);
  void terminate_all();

  std::size_t live_count() const;
  Installer* installer() const noexcept { return installer_.get(); }
  const ManagerOptions& options() const noexcept { return options_; }

 private:
  std::vector<std::string> command_for(const std::string& model_id) const;

  std::shared_ptr<Installer> installer_;
  ManagerOptions options_;
  mutable std::mutex mutex_;
  std::map<std::pair<std::string, std::string>, std::shared_ptr<WorkerClient>> workers_;
};

}  // namespace promptseg::worker
