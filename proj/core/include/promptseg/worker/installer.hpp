// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "promptseg/digest.hpp"
#include "promptseg/worker/registry.hpp"

namespace promptseg::worker {

struct InstallProgress {
  double percent = 0;
  std::string phase;  // "env", "download", "verify", "done"
  std::string message;
};

using ProgressSink = std::function<void(const InstallProgress&)>;

class Downloader {
 public:
  virtual ~Downloader() = default;
  /// Writes `url` to `dest`. Throws Error(DownloadFailed).
  virtual void fetch(const std::string& url, const std::filesystem::path& dest,
                     const std::function<void(double fraction)>& progress) = 0;
};

/// libcurl-backed HTTP(S) downloader that follows redirects.
class CurlDownloader : public Downloader {
 public:
  void fetch(const std::string& url, const std::filesystem::path& dest,
             const std::function<void(double)>& progress) override;
};

/// Creates the isolated environment a model's worker runs in and reports
/// the interpreter to launch it with.
class EnvProvider {
 public:
  virtual ~EnvProvider() = default;
  /// Throws Error(EnvBootstrapFailed).
  virtual std::string bootstrap(const ModelSpec& spec, const std::filesystem::path& env_dir,
                                const ProgressSink& progress) = 0;
};

/// Creates nothing and reports the system "python3".
class NullEnvProvider : public EnvProvider {
 public:
  std::string bootstrap(const ModelSpec&, const std::filesystem::path& env_dir,
                        const ProgressSink&) override;
};

/// Runs a shell command template. Placeholders: {env} (environment
/// directory), {python} (python version), {packages} (space-separated
/// dependency list). The interpreter template uses {env} as well, e.g.
///   create:      micromamba create -y -p {env} python={python} pip
///                && {env}/bin/pip install {packages}
///   interpreter: {env}/bin/python
class CommandEnvProvider : public EnvProvider {
 public:
  CommandEnvProvider(std::string create_template, std::string interpreter_template)
      : create_(std::move(create_template)), interpreter_(std::move(interpreter_template)) {}
  std::string bootstrap(const ModelSpec& spec, const std::filesystem::path& env_dir,
                        const ProgressSink& progress) override;

 private:
  std::string create_;
  std::string interpreter_;
};

struct InstallRecord {
  std::string model_id;
  std::filesystem::path env_dir;
  std::filesystem::path weights_dir;
  std::string interpreter;
  /// filename -> sha256 as verified at install time.
  std::map<std::string, std::string> weights;
  double duration_s = 0;
};


/// Installs models under <data_dir>/models/<id>/ and records completion in
/// install.json there. Installing an installed model re-verifies the local
/// weight digests and performs no downloads.
class Installer {
 public:
  Installer(std::filesystem::path data_dir, std::shared_ptr<Downloader> downloader,
            std::shared_ptr<EnvProvider> env, std::vector<ModelSpec> models = registry());

  bool is_installed(const std::string& model_id) const;
  std::optional<InstallRecord> record(const std::string& model_id) const;
  /// Errors: UnknownModel, Unsupported (disabled model), EnvBootstrapFailed,
  /// DownloadFailed, HashMismatch; the detail string names the failing phase.
  InstallRecord install(const std::string& model_id, const ProgressSink& progress = {});

  std::filesystem::path model_dir(const std::string& model_id) const;
  const std::filesystem::path& data_dir() const noexcept { return data_dir_; }
  const std::vector<ModelSpec>& models() const noexcept { return models_; }

 private:
  std::filesystem::path data_dir_;
  std::shared_ptr<Downloader> downloader_;
  std::shared_ptr<EnvProvider> env_;
  std::vector<ModelSpec> models_;
  std::mutex mutex_;
};

}  // namespace promptseg::worker
