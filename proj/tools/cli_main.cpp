// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include <signal.h>

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "promptseg/config.hpp"
#include "promptseg/error.hpp"
#include "promptseg/harness/size_ratio.hpp"
#include "promptseg/image_io.hpp"
#include "promptseg/service/server.hpp"
#include "promptseg/session/session.hpp"
#include "promptseg/worker/installer.hpp"
#include "promptseg/worker/manager.hpp"
#include "promptseg/worker/registry.hpp"
#include "seed_file.hpp"

namespace {

using namespace promptseg;
using nlohmann::json;
namespace fs = std::filesystem;

enum Exit { kOk = 0, kUsage = 1, kPartial = 2, kWorker = 3 };

struct Globals {
  std::string config_path;
  std::string data_dir;
  std::string mock_worker;
};

struct Context {
  Config cfg;
  fs::path data_dir;
  std::shared_ptr<worker::Installer> installer;
  std::shared_ptr<worker::WorkerManager> workers;
};

Context make_context(const Globals& g) {
  Context c;
  c.cfg = Config::load(g.config_path.empty() ? Config::default_path() : fs::path(g.config_path));
  c.data_dir = g.data_dir.empty() ? resolve_data_dir(c.cfg) : fs::path(g.data_dir);
  std::shared_ptr<worker::EnvProvider> env;
  if (auto create = c.cfg.get("env.create")) {
    env = std::make_shared<worker::CommandEnvProvider>(
        *create, c.cfg.get_string("env.interpreter", "{env}/bin/python"));
  } else {
    env = std::make_shared<worker::NullEnvProvider>();
  }
  c.installer = std::make_shared<worker::Installer>(
      c.data_dir, std::make_shared<worker::CurlDownloader>(), env);
  worker::ManagerOptions mo;
  mo.mock_worker_path = g.mock_worker;
  if (auto cmd = c.cfg.get("worker.command")) mo.worker_command = *cmd;
  c.workers = std::make_shared<worker::WorkerManager>(c.installer, mo);
  return c;
}

SessionOptions session_options(const Config& cfg) {
  SessionOptions o;
  o.policy = EmbeddingPolicy::from_config(cfg);
  o.cache.max_entries_per_model =
      static_cast<std::size_t>(cfg.get_int("cache.max_entries_per_model", 4));
  o.cache.max_bytes = static_cast<std::uint64_t>(cfg.get_int("cache.max_bytes", 0));
  return o;
}

bool is_worker_failure(ErrorCode c) {
  switch (c) {
    case ErrorCode::UnknownModel:
    case ErrorCode::NotInstalled:
    case ErrorCode::HashMismatch:
    case ErrorCode::DownloadFailed:
    case ErrorCode::EnvBootstrapFailed:
    case ErrorCode::SpawnFailed:
    case ErrorCode::HandshakeTimeout:
    case ErrorCode::WorkerDied:
    case ErrorCode::WorkerError:
    case ErrorCode::EncodeFailed:
    case ErrorCode::ProtocolMismatch:
    case ErrorCode::ChecksumMismatch:
    case ErrorCode::SegmentMissing:
      return true;
    default:
      return false;
  }
}

int models_list(const Context& c, bool as_json) {
  json rows = json::array();
  if (!as_json) {
    std::printf("%-22s %-28s %10s %10s %9s\n", "model", "name", "size_mb", "encode_s", "installed");
  }
  for (const worker::ModelSpec& m : c.installer->models()) {
    const bool installed = c.installer->is_installed(m.model_id);
    if (!as_json) {
      std::printf("%-22s %-28s %10.1f %10.2f %9s\n", m.model_id.c_str(), m.display_name.c_str(),
                  m.download_size_mb, m.nominal_encode_s, installed ? "yes" : "no");
    }
    rows.push_back(json{{"model_id", m.model_id}, {"download_size_mb", m.download_size_mb},
                        {"nominal_encode_s", m.nominal_encode_s}, {"installed", installed}});
  }
  if (as_json) std::cout << rows.dump(2) << '\n';
  return kOk;
}

int models_install(const Context& c, const std::string& id) {
  const worker::InstallRecord rec = c.installer->install(id, [](const worker::InstallProgress& p) {
    std::fprintf(stderr, "[%5.1f%%] %-8s %s\n", p.percent, p.phase.c_str(), p.message.c_str());
  });
  std::printf("installed %s in %.1f s\n", rec.model_id.c_str(), rec.duration_s);
  return kOk;
}

fs::path slice_output(const fs::path& out, int slice, bool multi) {
  if (!multi) return out;
  fs::path p = out;
  p.replace_filename(out.stem().string() + "-s" + std::to_string(slice) + out.extension().string());
  return p;
}

int annotate_batch(const Context& c, const std::string& image_path, const std::string& seeds_path,
                   const std::string& model, const std::string& out, const std::string& report_path) {
  const std::vector<cli::SeedRow> rows = cli::read_seed_file(seeds_path);
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "seed file has no seeds");
  auto image = std::make_shared<const ImageStack>(load_image(image_path, "img-1"));

  std::map<int, std::vector<std::size_t>> by_slice;
  for (std::size_t i = 0; i < rows.size(); ++i) by_slice[rows[i].slice].push_back(i);

  Session session("cli", image, model, c.workers, session_options(c.cfg));
  json report_rows = json::array();
  bool all_ok = true;
  std::uint32_t instances = 0;
  for (const auto& [slice, idx] : by_slice) {
    std::vector<Seed> seeds;
    for (std::size_t i : idx) seeds.push_back(rows[i].seed);
    BatchResult r;
    if (slice < 0 || slice >= static_cast<int>(image->slices.size())) {
      r.labels = LabelImage(image->width(), image->height());
      for (std::size_t k = 0; k < idx.size(); ++k) {
        r.seeds.push_back(SeedReport{k, SeedStatus::Failed, 0, 0, 0, "InvalidArgument",
                                     "slice " + std::to_string(slice) + " out of range"});
      }
    } else {
      r = session.annotate_batch(seeds, Region{}, slice);
    }
    all_ok = all_ok && r.all_ok();
    instances += r.labels.max_label();
    write_file(slice_output(out, slice, by_slice.size() > 1), encode_label_png(r.labels));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const cli::SeedRow& row = rows[idx[k]];
      json j = service::seed_report_to_json(r.seeds[k]);
      j["index"] = idx[k];
      j["line"] = row.line;
      j["slice"] = slice;
      report_rows.push_back(std::move(j));
    }
  }
  std::sort(report_rows.begin(), report_rows.end(),
            [](const json& a, const json& b) { return a["index"] < b["index"]; });
  const json report{{"image", image_path}, {"model", model}, {"instances", instances},
                    {"all_ok", all_ok}, {"seeds", report_rows}};
  if (!report_path.empty()) {
    std::ofstream f(report_path);
    f << report.dump(2) << '\n';
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + report_path);
  }
  if (!all_ok) {
    for (const json& j : report_rows) {
      if (j["status"] != "ok") {
        std::fprintf(stderr, "seed line %d: %s %s\n", j["line"].get<int>(),
                     j["status"].get<std::string>().c_str(), j.value("message", "").c_str());
      }
    }
  }
  std::printf("%u instances written to %s\n", instances, out.c_str());
  return all_ok ? kOk : kPartial;
}

int serve(const Context& c, const std::string& host, int port) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  service::ServiceOptions so;
  so.host = host;
  so.port = port;
  so.data_dir = c.data_dir;
  so.session = session_options(c.cfg);
  service::Service svc(so, c.workers, c.installer);
  svc.start();
  std::printf("listening on http://%s:%d\n", host.c_str(), svc.port());
  std::fflush(stdout);
  int sig = 0;
  sigwait(&set, &sig);
  svc.stop();
  return kOk;
}

int bench_size_ratio(const Context& c, harness::HarnessConfig hc, const std::string& out) {
  const harness::MatrixResult m = harness::run_matrix(hc, c.workers);
  std::ofstream f(out);
  harness::write_csv(m, f);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + out);
  std::cout << harness::format_table(m);
  for (const auto& cell : m.cells) {
    if (!cell.error.empty()) {
      std::fprintf(stderr, "cell %dx%d in %d: %s\n", cell.object_size, cell.object_size,
                   cell.image_size, cell.error.c_str());
    }
  }
  return kOk;
}

int bench_encode_times(const Context& c, const std::vector<std::string>& backends, int size,
                       int trials, const std::string& out) {
  const auto rows = harness::encode_times(backends, c.workers, size, trials);
  const std::string table = harness::format_encode_table(rows);
  std::cout << table;
  if (!out.empty()) {
    std::ofstream f(out);
    f << "model_id,nominal_s,measured_s,error\n";
    for (const auto& r : rows) f << r.model_id << ',' << r.nominal_s << ',' << r.measured_s << ',' << r.error << '\n';
  }
  for (const auto& r : rows) {
    if (!r.error.empty()) return kWorker;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"promptseg: promptable segmentation annotation engine"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Config file (TOML key/value)");
  app.add_option("--data-dir", g.data_dir, "Data directory (overrides PROMPTSEG_DATA_DIR and config)");
  app.add_option("--mock-worker", g.mock_worker, "Path of the mock worker executable");

  auto* models = app.add_subcommand("models", "Model registry and installation");
  models->require_subcommand(1);
  bool list_json = false;
  auto* list = models->add_subcommand("list", "List supported models");
  list->add_flag("--json", list_json, "JSON output");
  std::string install_id;
  auto* install = models->add_subcommand("install", "Install a model");
  install->add_option("model", install_id, "Model id")->required();

  auto* annotate = app.add_subcommand("annotate", "Headless annotation");
  annotate->require_subcommand(1);
  auto* batch = annotate->add_subcommand("batch", "Segment every seed of a CSV file into a label image");
  std::string image, seeds, model = "mock", out, report;
  batch->add_option("--image", image, "PNG or TIFF image")->required();
  batch->add_option("--seeds", seeds, "Seed CSV")->required();
  batch->add_option("--model", model, "Model id");
  batch->add_option("--out", out, "Output 16-bit label PNG")->required();
  batch->add_option("--report", report, "Per-seed JSON report");

  auto* serve_cmd = app.add_subcommand("serve", "Run the local HTTP service");
  std::string host = "127.0.0.1";
  int port = service::kDefaultPort;
  serve_cmd->add_option("--port", port, "Listening port");
  serve_cmd->add_option("--host", host, "Listening address");

  auto* bench = app.add_subcommand("bench", "Benchmarks");
  bench->require_subcommand(1);
  auto* size_ratio = bench->add_subcommand("size-ratio", "Object size vs image size IoU matrix");
  harness::HarnessConfig hc;
  std::string matrix_out;
  bool disc = false;
  size_ratio->add_option("--backend", hc.backend, "Model id");
  size_ratio->add_option("--out", matrix_out, "CSV output")->required();
  size_ratio->add_flag("--whole-image-embed", hc.whole_image_embed, "Encode the whole image");
  size_ratio->add_option("--trials", hc.trials, "Trials per cell");
  size_ratio->add_flag("--parallel", hc.parallel, "Run cells concurrently (mock backend only)");
  size_ratio->add_flag("--disc", disc, "Disc objects instead of squares");
  size_ratio->add_option("--image-sizes", hc.image_sizes, "Square image sides")->delimiter(',');
  size_ratio->add_option("--object-sizes", hc.object_sizes, "Square object sides")->delimiter(',');
  auto* enc = bench->add_subcommand("encode-times", "Encode time per backend");
  std::vector<std::string> backends{"mock"};
  int enc_size = 1000, enc_trials = 1;
  std::string enc_out;
  enc->add_option("--backends", backends, "Model ids")->delimiter(',');
  enc->add_option("--image-size", enc_size, "Square image side");
  enc->add_option("--trials", enc_trials, "Encodes per backend");
  enc->add_option("--out", enc_out, "CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    const Context c = make_context(g);
    if (*list) return models_list(c, list_json);
    if (*install) return models_install(c, install_id);
    if (*batch) return annotate_batch(c, image, seeds, model, out, report);
    if (*serve_cmd) return serve(c, host, port);
    if (*size_ratio) {
      hc.object_kind = disc ? harness::ObjectKind::Disc : harness::ObjectKind::Square;
      return bench_size_ratio(c, hc, matrix_out);
    }
    if (*enc) return bench_encode_times(c, backends, enc_size, enc_trials, enc_out);
  } catch (const Error& e) {
    std::fprintf(stderr, "promptseg: %s: %s\n", std::string(to_string(e.code())).c_str(), e.what());
    return is_worker_failure(e.code()) ? kWorker : kUsage;
  }
  return kUsage;
}
