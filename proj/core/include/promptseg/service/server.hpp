// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "promptseg/error.hpp"
#include "promptseg/session/session.hpp"
#include "promptseg/worker/installer.hpp"
#include "promptseg/worker/manager.hpp"

namespace promptseg::service {

inline constexpr int kDefaultPort = 8712;

struct ServiceOptions {
  std::string host = "127.0.0.1";
  /// 0 picks a free port (see Service::port()).
  int port = kDefaultPort;
  /// Session documents are saved under <data_dir>/sessions/ on request.
  std::filesystem::path data_dir;
  SessionOptions session;
};

/// Error body of every failed request: {"code", "message", "detail"}.
struct ApiError {
  int status = 500;
  std::string code;
  std::string message;
  std::string detail;

  nlohmann::json to_json() const;
};

/// Maps a core error onto its API code and HTTP status. A spawn refused
/// because the model is not installed surfaces as NotInstalled.
ApiError to_api_error(const Error& e);
int http_status(ErrorCode code) noexcept;

/// JSON request shapes shared with the documentation in API.md.
Prompt prompt_from_json(const nlohmann::json& j);
Seed seed_from_json(const nlohmann::json& j);
nlohmann::json seed_report_to_json(const SeedReport& r);

/// The local HTTP service. Handlers run concurrently; commands for one
/// session are serialised by that session.
class Service {
 public:
  Service(ServiceOptions options, std::shared_ptr<worker::WorkerManager> workers,
          std::shared_ptr<worker::Installer> installer);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket. Throws IoError if the port is taken.
  void bind();
  /// Serves until stop(); bind() must have succeeded.
  void listen();
  /// bind() and serve on a background thread.
  void start();
  void stop();
  int port() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace promptseg::service
