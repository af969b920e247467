// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <httplib.h>
#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>

#include "oracles.hpp"
#include "promptseg/image_io.hpp"
#include "promptseg/service/server.hpp"
#include "promptseg/worker/installer.hpp"
#include "promptseg/worker/manager.hpp"
#include "test_env.hpp"

namespace promptseg {
namespace {

using nlohmann::json;
namespace t = promptseg::testing;

struct RunResult {
  int status = -1;
  std::string out;
};

class CliTest : public ::testing::Test {
 protected:
  RunResult run(const std::string& args) {
    const std::string cmd = "'" + t::cli_path() + "' --data-dir '" + dir_.path().string() +
                            "' --mock-worker '" + t::mock_worker_path() + "' " + args + " 2>&1";
    RunResult r;
    FILE* p = ::popen(cmd.c_str(), "r");
    if (p == nullptr) return r;
    char buf[4096];
    for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
    const int st = ::pclose(p);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
  }

  std::filesystem::path write_scene(const t::DiscScene& scene, const std::string& name) {
    const auto path = dir_.path() / name;
    write_file(path, encode_png_gray8(scene.image->width(), scene.image->height(), scene.image->bytes()));
    return path;
  }

  std::filesystem::path write_seeds(const std::string& text) {
    const auto path = dir_.path() / "seeds.csv";
    std::ofstream(path) << text;
    return path;
  }

  static std::string seed_csv(const t::DiscScene& scene) {
    std::string csv = "kind,x,y\n";
    for (const Seed& s : scene.seeds) {
      csv += "point," + std::to_string(s.point->x) + "," + std::to_string(s.point->y) + "\n";
    }
    return csv;
  }

  void TearDown() override { EXPECT_TRUE(t::live_segments().empty()); }

  t::TempDir dir_;
};

TEST_F(CliTest, BatchOnThreeDiscs) {
  std::mt19937 rng(41);
  const auto scene = t::make_disc_scene(rng, 240, 200, 3);
  const auto img = write_scene(scene, "discs.png");
  const auto seeds = write_seeds(seed_csv(scene));
  const auto out = dir_.path() / "labels.png";
  const auto report = dir_.path() / "report.json";
  const RunResult r = run("annotate batch --image '" + img.string() + "' --seeds '" + seeds.string() +
                          "' --model mock --out '" + out.string() + "' --report '" + report.string() + "'");
  ASSERT_EQ(r.status, 0) << r.out;
  const LabelImage labels = decode_label_png(read_file(out));
  EXPECT_EQ(labels.max_label(), 3u);
  EXPECT_EQ(labels, t::label_components(scene.truth));
  const json rep = json::parse(std::ifstream(report));
  EXPECT_EQ(rep.at("instances"), 3);
  EXPECT_EQ(rep.at("all_ok"), true);
  EXPECT_EQ(rep.at("seeds").at(0).at("line"), 2);
}

TEST_F(CliTest, OutOfBoundsSeedIsPartialFailure) {
  std::mt19937 rng(42);
  const auto scene = t::make_disc_scene(rng, 120, 120, 2);
  const auto img = write_scene(scene, "discs.png");
  const auto seeds = write_seeds(seed_csv(scene) + "point,500,10\n");
  const auto out = dir_.path() / "labels.png";
  const auto report = dir_.path() / "report.json";
  const RunResult r = run("annotate batch --image '" + img.string() + "' --seeds '" + seeds.string() +
                          "' --out '" + out.string() + "' --report '" + report.string() + "'");
  EXPECT_EQ(r.status, 2) << r.out;
  EXPECT_NE(r.out.find("seed line 4"), std::string::npos) << r.out;
  const json rep = json::parse(std::ifstream(report));
  EXPECT_EQ(rep.at("all_ok"), false);
  const json& bad = rep.at("seeds").at(2);
  EXPECT_EQ(bad.at("line"), 4);
  EXPECT_EQ(bad.at("status"), "failed");
  EXPECT_EQ(decode_label_png(read_file(out)).max_label(), 2u);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run("annotate batch --image x.png").status, 1);
  EXPECT_EQ(run("no-such-command").status, 1);
  std::mt19937 rng(43);
  const auto scene = t::make_disc_scene(rng, 64, 64, 1);
  const auto img = write_scene(scene, "one.png");
  const auto seeds = write_seeds(seed_csv(scene));
  const RunResult r = run("annotate batch --image '" + img.string() + "' --seeds '" + seeds.string() +
                          "' --model sam2-tiny --out '" + (dir_.path() / "o.png").string() + "'");
  EXPECT_EQ(r.status, 3) << r.out;
  EXPECT_NE(r.out.find("SpawnFailed"), std::string::npos) << r.out;
  const RunResult bad_seeds = run("annotate batch --image '" + img.string() + "' --seeds '" +
                                  write_seeds("point,1\n").string() + "' --out '" +
                                  (dir_.path() / "o.png").string() + "'");
  EXPECT_EQ(bad_seeds.status, 1) << bad_seeds.out;
  EXPECT_NE(bad_seeds.out.find("line 1"), std::string::npos) << bad_seeds.out;
}

TEST_F(CliTest, ModelsListMatchesRegistry) {
  const RunResult r = run("models list --json");
  ASSERT_EQ(r.status, 0) << r.out;
  const json rows = json::parse(r.out);
  std::vector<std::string> ids;
  for (const auto& m : rows) ids.push_back(m.at("model_id"));
  EXPECT_EQ(ids, (std::vector<std::string>{"sam2-tiny", "sam2-small", "sam2-large", "efficient-sam",
                                           "efficientvit-sam-l2", "mock"}));
  EXPECT_EQ(rows.at(0).at("download_size_mb"), 148.7);
  EXPECT_EQ(rows.at(5).at("installed"), true);
  EXPECT_EQ(rows.at(0).at("installed"), false);
  const RunResult table = run("models list");
  EXPECT_EQ(table.status, 0);
  EXPECT_NE(table.out.find("efficientvit-sam-l2"), std::string::npos);
  EXPECT_EQ(table.out.find("sam-huge"), std::string::npos);
}

TEST_F(CliTest, InstallMockReportsProgress) {
  const RunResult r = run("models install mock");
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("100.0%"), std::string::npos) << r.out;
  EXPECT_EQ(run("models install sam-huge").status, 3);
}

TEST_F(CliTest, BatchOutputEqualsServiceOutput) {
  std::mt19937 rng(44);
  const auto scene = t::make_disc_scene(rng, 300, 260, 7);
  const auto img = write_scene(scene, "scene.png");
  const auto seeds = write_seeds(seed_csv(scene) + "box,0,0,300,260\npoint,0,0\n");
  const auto out = dir_.path() / "cli.png";
  const RunResult r = run("annotate batch --image '" + img.string() + "' --seeds '" + seeds.string() +
                          "' --out '" + out.string() + "'");
  ASSERT_EQ(r.status, 2) << r.out;  // the background point is reported empty
  const auto cli_png = read_file(out);

  auto installer = std::make_shared<worker::Installer>(dir_.path(), std::make_shared<worker::CurlDownloader>(),
                                                       std::make_shared<worker::NullEnvProvider>());
  worker::ManagerOptions mo;
  mo.mock_worker_path = t::mock_worker_path();
  auto workers = std::make_shared<worker::WorkerManager>(installer, mo);
  service::ServiceOptions so;
  so.port = 0;
  service::Service svc(so, workers, installer);
  svc.start();
  httplib::Client c("127.0.0.1", svc.port());
  const auto bytes = read_file(img);
  auto up = c.Post("/images", std::string(bytes.begin(), bytes.end()), "image/png");
  ASSERT_TRUE(up);
  auto sess = c.Post("/sessions",
                     json{{"image_id", json::parse(up->body).at("image_id")}, {"model_id", "mock"}}.dump(),
                     "application/json");
  ASSERT_TRUE(sess);
  const std::string sid = json::parse(sess->body).at("session_id");
  json seeds_json = json::array();
  for (const Seed& s : scene.seeds) seeds_json.push_back({{"x", s.point->x}, {"y", s.point->y}});
  seeds_json.push_back({{"box", {0, 0, 300, 260}}});
  seeds_json.push_back({{"x", 0}, {"y", 0}});
  auto batch = c.Post("/sessions/" + sid + "/batch", json{{"seeds", seeds_json}}.dump(), "application/json");
  ASSERT_TRUE(batch);
  ASSERT_EQ(batch->status, 200) << batch->body;
  auto png = c.Get(json::parse(batch->body).at("labels").get<std::string>());
  ASSERT_TRUE(png);
  EXPECT_EQ(std::vector<std::uint8_t>(png->body.begin(), png->body.end()), cli_png);
  svc.stop();
  workers->terminate_all();
}

TEST_F(CliTest, SizeRatioBenchWritesCsv) {
  const auto csv = dir_.path() / "m.csv";
  const RunResult r = run("bench size-ratio --backend mock --image-sizes 500,1000 --object-sizes 26,442 --out '" +
                          csv.string() + "'");
  ASSERT_EQ(r.status, 0) << r.out;
  std::ifstream in(csv);
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header, "object_size,image_size,iou,encode_s,error");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_NE(line.find(",1,"), std::string::npos) << line;
  }
  EXPECT_EQ(rows, 4);
  EXPECT_NE(r.out.find("*1.000*"), std::string::npos) << r.out;
}

TEST_F(CliTest, ConfigFileOverridesPolicy) {
  const auto cfg = dir_.path() / "config.toml";
  std::ofstream(cfg) << "[embedding]\naspect_cutoff = 0.5\n";
  std::mt19937 rng(45);
  const auto scene = t::make_disc_scene(rng, 64, 64, 1);
  const auto img = write_scene(scene, "one.png");
  const auto seeds = write_seeds(seed_csv(scene));
  const RunResult r = run("--config '" + cfg.string() + "' annotate batch --image '" + img.string() +
                          "' --seeds '" + seeds.string() + "' --out '" + (dir_.path() / "o.png").string() + "'");
  EXPECT_EQ(r.status, 1) << r.out;
  EXPECT_NE(r.out.find("InvalidArgument"), std::string::npos) << r.out;
}

}  // namespace
}  // namespace promptseg
