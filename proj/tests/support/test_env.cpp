// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "test_env.hpp"

#include <unistd.h>

#include <atomic>

namespace promptseg::testing {

std::string mock_worker_path() { return PROMPTSEG_TEST_MOCK_WORKER; }
std::string cli_path() { return PROMPTSEG_TEST_CLI; }

std::shared_ptr<worker::WorkerManager> mock_manager(std::vector<std::string> mock_args) {
  worker::ManagerOptions o;
  o.mock_worker_path = mock_worker_path();
  o.mock_args = std::move(mock_args);
  o.client.handshake_timeout = std::chrono::milliseconds(5000);
  o.client.reply_timeout = std::chrono::milliseconds(30000);
  o.client.shutdown_grace = std::chrono::milliseconds(2000);
  return std::make_shared<worker::WorkerManager>(nullptr, o);
}

std::unique_ptr<worker::WorkerClient> start_mock_client(std::vector<std::string> extra_args) {
  std::vector<std::string> argv{mock_worker_path(), "--model", "mock"};
  argv.insert(argv.end(), extra_args.begin(), extra_args.end());
  worker::WorkerClient::Options o;
  o.handshake_timeout = std::chrono::milliseconds(2000);
  o.reply_timeout = std::chrono::milliseconds(10000);
  o.shutdown_grace = std::chrono::milliseconds(1000);
  auto client = std::make_unique<worker::WorkerClient>("mock", worker::ChildProcess::spawn(argv), o);
  client->handshake();
  return client;
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("promptseg-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace promptseg::testing
