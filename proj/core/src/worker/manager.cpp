// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/worker/manager.hpp"

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "promptseg/error.hpp"

namespace promptseg::worker {

namespace {

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

std::string default_mock_worker_path() {
  if (const char* env = std::getenv("PROMPTSEG_MOCK_WORKER"); env && *env) return env;
  std::error_code ec;
  const auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    const auto sibling = self.parent_path() / "promptseg-mock-worker";
    if (std::filesystem::exists(sibling)) return sibling.string();
  }
  return "promptseg-mock-worker";
}

WorkerManager::WorkerManager(std::shared_ptr<Installer> installer, ManagerOptions options)
    : installer_(std::move(installer)), options_(std::move(options)) {}

WorkerManager::~WorkerManager() { terminate_all(); }

std::vector<std::string> WorkerManager::command_for(const std::string& model_id) const {
  const ModelSpec& spec =
      installer_ ? find_model(installer_->models(), model_id) : find_model(model_id);
  if (spec.is_mock()) {
    std::vector<std::string> argv{
        options_.mock_worker_path.empty() ? default_mock_worker_path() : options_.mock_worker_path,
        "--model", spec.model_id};
    argv.insert(argv.end(), options_.mock_args.begin(), options_.mock_args.end());
    return argv;
  }
  const auto record = installer_ ? installer_->record(model_id) : std::nullopt;
  if (!record) {
    throw Error(ErrorCode::SpawnFailed, "model " + model_id + " is not installed", "NotInstalled");
  }
  std::string cmd = options_.worker_command;
  replace_all(cmd, "{python}", record->interpreter);
  replace_all(cmd, "{model}", model_id);
  replace_all(cmd, "{weights}", record->weights_dir.string());
  std::vector<std::string> argv;
  std::istringstream in(cmd);
  for (std::string tok; in >> tok;) argv.push_back(tok);
  return argv;
}

std::shared_ptr<WorkerClient> WorkerManager::spawn(const std::string& owner,
                                                   const std::string& model_id) {
  std::lock_guard lock(mutex_);
  const auto key = std::make_pair(owner, model_id);
  if (auto it = workers_.find(key); it != workers_.end()) {
    if (it->second->alive()) return it->second;
    workers_.erase(it);
  }
  auto process = ChildProcess::spawn(command_for(model_id));
  auto client = std::make_shared<WorkerClient>(model_id, std::move(process), options_.client);
  client->handshake();
  workers_.emplace(key, client);
  return client;
}

std::shared_ptr<WorkerClient> WorkerManager::respawn(const std::string& owner,
                                                     const std::string& model_id) {
  terminate(owner, model_id);
  return spawn(owner, model_id);
}

std::shared_ptr<WorkerClient> WorkerManager::find(const std::string& owner,
                                                  const std::string& model_id) const {
  std::lock_guard lock(mutex_);
  auto it = workers_.find({owner, model_id});
  return it == workers_.end() ? nullptr : it->second;
}

void WorkerManager::terminate(const std::string& owner, const std::string& model_id) {
  std::shared_ptr<WorkerClient> victim;
  {
    std::lock_guard lock(mutex_);
    auto it = workers_.find({owner, model_id});
    if (it == workers_.end()) return;
    victim = std::move(it->second);
    workers_.erase(it);
  }
  victim->shutdown();
}

void WorkerManager::terminate_owner(const std::string& owner) {
  std::vector<std::shared_ptr<WorkerClient>> victims;
  {
    std::lock_guard lock(mutex_);
    for (auto it = workers_.begin(); it != workers_.end();) {
      if (it->first.first == owner) {
        victims.push_back(std::move(it->second));
        it = workers_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& v : victims) v->shutdown();
}

void WorkerManager::terminate_all() {
  std::map<std::pair<std::string, std::string>, std::shared_ptr<WorkerClient>> victims;
  {
    std::lock_guard lock(mutex_);
    victims.swap(workers_);
  }
  for (auto& [key, v] : victims) v->shutdown();
}

std::size_t WorkerManager::live_count() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& [key, w] : workers_) n += w->alive() ? 1 : 0;
  return n;
}

}  // namespace promptseg::worker
