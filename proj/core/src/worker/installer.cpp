// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/worker/installer.hpp"

#include <curl/curl.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "promptseg/digest.hpp"
#include "promptseg/error.hpp"

namespace promptseg::worker {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& i : items) {
    if (!out.empty()) out += ' ';
    out += "'" + i + "'";
  }
  return out;
}

std::size_t curl_write(char* ptr, std::size_t size, std::size_t nmemb, void* user) {
  auto* out = static_cast<std::ofstream*>(user);
  out->write(ptr, static_cast<std::streamsize>(size * nmemb));
  return out->good() ? size * nmemb : 0;
}

int curl_progress(void* user, curl_off_t total, curl_off_t now, curl_off_t, curl_off_t) {
  auto* cb = static_cast<const std::function<void(double)>*>(user);
  if (*cb && total > 0) (*cb)(static_cast<double>(now) / static_cast<double>(total));
  return 0;
}

json record_to_json(const InstallRecord& r) {
  return json{{"model_id", r.model_id},       {"env_dir", r.env_dir.string()},
              {"weights_dir", r.weights_dir.string()}, {"interpreter", r.interpreter},
              {"weights", r.weights},         {"duration_s", r.duration_s}};
}

InstallRecord record_from_json(const json& j) {
  InstallRecord r;
  r.model_id = j.at("model_id").get<std::string>();
  r.env_dir = j.at("env_dir").get<std::string>();
  r.weights_dir = j.at("weights_dir").get<std::string>();
  r.interpreter = j.at("interpreter").get<std::string>();
  r.weights = j.at("weights").get<std::map<std::string, std::string>>();
  r.duration_s = j.value("duration_s", 0.0);
  return r;
}

}  // namespace

void CurlDownloader::fetch(const std::string& url, const fs::path& dest,
                           const std::function<void(double)>& progress) {
  static const bool initialised = [] { return curl_global_init(CURL_GLOBAL_DEFAULT) == 0; }();
  if (!initialised) throw Error(ErrorCode::DownloadFailed, "curl initialisation failed");
  std::ofstream out(dest, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::DownloadFailed, "cannot write " + dest.string());
  std::unique_ptr<CURL, void (*)(CURL*)> curl(curl_easy_init(), curl_easy_cleanup);
  if (!curl) throw Error(ErrorCode::DownloadFailed, "curl_easy_init failed");
  curl_easy_setopt(curl.get(), CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl.get(), CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl.get(), CURLOPT_FAILONERROR, 1L);
  curl_easy_setopt(curl.get(), CURLOPT_WRITEFUNCTION, curl_write);
  curl_easy_setopt(curl.get(), CURLOPT_WRITEDATA, &out);
  curl_easy_setopt(curl.get(), CURLOPT_NOPROGRESS, 0L);
  curl_easy_setopt(curl.get(), CURLOPT_XFERINFOFUNCTION, curl_progress);
  curl_easy_setopt(curl.get(), CURLOPT_XFERINFODATA, &progress);
  const CURLcode rc = curl_easy_perform(curl.get());
  if (rc != CURLE_OK) {
    throw Error(ErrorCode::DownloadFailed, "download of " + url + " failed: " +
                                               curl_easy_strerror(rc), "download");
  }
}

std::string NullEnvProvider::bootstrap(const ModelSpec&, const fs::path& env_dir,
                                       const ProgressSink&) {
  fs::create_directories(env_dir);
  return "python3";
}

std::string CommandEnvProvider::bootstrap(const ModelSpec& spec, const fs::path& env_dir,
                                          const ProgressSink& progress) {
  std::string cmd = replace_all(create_, "{env}", "'" + env_dir.string() + "'");
  cmd = replace_all(cmd, "{python}", spec.env.python_version);
  cmd = replace_all(cmd, "{packages}", join(spec.env.packages));
  if (progress) progress({5, "env", cmd});
  const int rc = std::system(cmd.c_str());
  if (rc != 0) {
    throw Error(ErrorCode::EnvBootstrapFailed,
                "environment command exited with status " + std::to_string(rc), "env");
  }
  return replace_all(interpreter_, "{env}", env_dir.string());
}

Installer::Installer(fs::path data_dir, std::shared_ptr<Downloader> downloader,
                     std::shared_ptr<EnvProvider> env, std::vector<ModelSpec> models)
    : data_dir_(std::move(data_dir)), downloader_(std::move(downloader)),
      env_(std::move(env)), models_(std::move(models)) {}

fs::path Installer::model_dir(const std::string& model_id) const {
  return data_dir_ / "models" / model_id;
}

std::optional<InstallRecord> Installer::record(const std::string& model_id) const {
  const fs::path p = model_dir(model_id) / "install.json";
  std::ifstream in(p);
  if (!in) return std::nullopt;
  try {
    return record_from_json(json::parse(in));
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

bool Installer::is_installed(const std::string& model_id) const {
  const ModelSpec& spec = find_model(models_, model_id);
  return spec.is_mock() || record(model_id).has_value();
}

InstallRecord Installer::install(const std::string& model_id, const ProgressSink& progress) {
  std::lock_guard lock(mutex_);
  const ModelSpec& spec = find_model(models_, model_id);
  auto emit = [&](double pct, const std::string& phase, const std::string& msg) {
    if (progress) progress({pct, phase, msg});
  };
  if (spec.is_mock()) {
    emit(100, "done", "mock backend needs no installation");
    return InstallRecord{spec.model_id, {}, {}, {}, {}, 0};
  }
  if (!spec.enabled) throw Error(ErrorCode::Unsupported, "model is disabled: " + model_id);

  const fs::path dir = model_dir(model_id);
  if (auto existing = record(model_id)) {
    emit(50, "verify", "re-verifying installed weights");
    for (const auto& [file, digest] : existing->weights) {
      const fs::path p = existing->weights_dir / file;
      if (!fs::exists(p) || sha256_file(p) != digest) {
        throw Error(ErrorCode::HashMismatch, "installed weight file changed: " + file, "verify");
      }
    }
    emit(100, "done", "already installed");
    return *existing;
  }

  const auto t0 = std::chrono::steady_clock::now();
  InstallRecord rec;
  rec.model_id = model_id;
  rec.env_dir = dir / "env";
  rec.weights_dir = dir / "weights";
  fs::create_directories(rec.weights_dir);

  emit(0, "env", "bootstrapping environment");
  rec.interpreter = env_->bootstrap(spec, rec.env_dir, progress);
  emit(40, "env", "environment ready");

  const double per_file = spec.weights.empty() ? 0.0 : 55.0 / spec.weights.size();
  for (std::size_t i = 0; i < spec.weights.size(); ++i) {
    const WeightFile& wf = spec.weights[i];
    const fs::path final_path = rec.weights_dir / wf.filename;
    const fs::path part = final_path.string() + ".part";
    const double base = 40.0 + per_file * i;
    emit(base, "download", wf.url);
    try {
      downloader_->fetch(wf.url, part, [&](double f) { emit(base + per_file * f, "download", wf.url); });
    } catch (const Error& e) {
      fs::remove(part);
      throw Error(ErrorCode::DownloadFailed, e.what(), "download");
    }
    emit(base + per_file, "verify", wf.filename);
    const std::string digest = sha256_file(part);
    if (!wf.sha256.empty() && digest != wf.sha256) {
      fs::remove(part);
      throw Error(ErrorCode::HashMismatch,
                  "sha256 of " + wf.filename + " is " + digest + ", expected " + wf.sha256,
                  "verify");
    }
    fs::rename(part, final_path);
    rec.weights[wf.filename] = digest;
  }

  rec.duration_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream out(dir / "install.json", std::ios::trunc);
  out << record_to_json(rec).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "cannot write install record");
  emit(100, "done", "installed in " + std::to_string(rec.duration_s) + " s");
  return rec;
}

}  // namespace promptseg::worker
