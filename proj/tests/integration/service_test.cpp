// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <random>
#include <thread>

#include "oracles.hpp"
#include "promptseg/image_io.hpp"
#include "promptseg/service/server.hpp"
#include "promptseg/session/export.hpp"
#include "promptseg/session/session.hpp"
#include "promptseg/worker/installer.hpp"
#include "promptseg/worker/manager.hpp"
#include "test_env.hpp"

namespace promptseg::service {
namespace {

using nlohmann::json;
namespace t = promptseg::testing;

class OfflineDownloader : public worker::Downloader {
 public:
  void fetch(const std::string& url, const std::filesystem::path&,
             const std::function<void(double)>&) override {
    throw Error(ErrorCode::DownloadFailed, "offline: " + url);
  }
};

std::string png_of(const ImageRef& img) {
  const auto png = encode_png_gray8(img->width(), img->height(), img->bytes());
  return std::string(png.begin(), png.end());
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    installer_ = std::make_shared<worker::Installer>(dir_.path(), std::make_shared<OfflineDownloader>(),
                                                     std::make_shared<worker::NullEnvProvider>());
    worker::ManagerOptions mo;
    mo.mock_worker_path = t::mock_worker_path();
    workers_ = std::make_shared<worker::WorkerManager>(installer_, mo);
    ServiceOptions so;
    so.port = 0;
    so.data_dir = dir_.path();
    service_ = std::make_unique<Service>(so, workers_, installer_);
    service_->start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", service_->port());
    client_->set_read_timeout(30, 0);
  }

  void TearDown() override {
    client_.reset();
    service_.reset();
    workers_->terminate_all();
    EXPECT_TRUE(t::live_segments().empty());
  }

  json post(const std::string& path, const json& body, int expect_status) {
    auto res = client_->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expect_status) << path << " -> " << res->body;
    return res->body.empty() ? json{} : json::parse(res->body);
  }

  json get(const std::string& path, int expect_status = 200) {
    auto res = client_->Get(path);
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, expect_status) << path << " -> " << res->body;
    return json::parse(res->body);
  }

  std::string upload(const ImageRef& img) {
    auto res = client_->Post("/images", png_of(img), "image/png");
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, 201) << res->body;
    return json::parse(res->body).at("image_id");
  }

  std::string session_for(const std::string& image_id, const std::string& model = "mock") {
    return post("/sessions", {{"image_id", image_id}, {"model_id", model}}, 201).at("session_id");
  }

  t::TempDir dir_;
  std::shared_ptr<worker::Installer> installer_;
  std::shared_ptr<worker::WorkerManager> workers_;
  std::unique_ptr<Service> service_;
  std::unique_ptr<httplib::Client> client_;
};

ImageRef disc_image(int w, int h, int cx, int cy, int r) {
  const Bitmask d = t::disc_mask(w, h, cx, cy, r);
  std::vector<std::uint8_t> px(d.bits().size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = d.bits()[i] ? 230 : 20;
  return make_gray8("d", w, h, std::move(px));
}

TEST_F(ServiceTest, HealthAndModels) {
  EXPECT_EQ(get("/health").at("status"), "ok");
  const json models = get("/models");
  ASSERT_EQ(models.size(), 6u);
  for (const auto& m : models) {
    EXPECT_EQ(m.at("installed").get<bool>(), m.at("model_id") == "mock") << m.dump();
  }
  EXPECT_EQ(get("/no/such/endpoint", 404).at("code"), "NotFound");
}

TEST_F(ServiceTest, ImageUploadRawAndMultipart) {
  const auto img = disc_image(40, 30, 20, 15, 5);
  auto res = client_->Post("/images", png_of(img), "image/png");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 201);
  const json a = json::parse(res->body);
  EXPECT_EQ(a.at("w"), 40);
  EXPECT_EQ(a.at("h"), 30);
  EXPECT_EQ(a.at("slices"), 1);

  httplib::MultipartFormDataItems items{{"file", png_of(img), "disc.png", "image/png"}};
  res = client_->Post("/images", items);
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 201);
  const json b = json::parse(res->body);
  EXPECT_NE(b.at("image_id"), a.at("image_id"));
  EXPECT_EQ(b.at("sha256"), a.at("sha256"));
  EXPECT_EQ(get("/images/" + b.at("image_id").get<std::string>()).at("w"), 40);

  res = client_->Post("/images", "GIF89a", "image/gif");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 415);
  EXPECT_EQ(json::parse(res->body).at("code"), "Unsupported");
}

TEST_F(ServiceTest, UninstalledModelIsConflict) {
  const std::string image = upload(disc_image(40, 30, 20, 15, 5));
  const json err = post("/sessions", {{"image_id", image}, {"model_id", "sam2-tiny"}}, 409);
  EXPECT_EQ(err.at("code"), "NotInstalled");
  EXPECT_EQ(post("/sessions", {{"image_id", image}, {"model_id", "sam-huge"}}, 404).at("code"),
            "UnknownModel");
  EXPECT_EQ(post("/sessions", {{"image_id", "img-99"}, {"model_id", "mock"}}, 404).at("code"),
            "NotFound");
  auto res = client_->Post("/sessions", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST_F(ServiceTest, PromptMatchesEngineBitForBit) {
  std::mt19937 rng(31);
  const auto scene = t::make_disc_scene(rng, 700, 600, 4);
  const std::string image = upload(scene.image);
  const std::string sid = session_for(image);

  auto stack = std::make_shared<ImageStack>();
  stack->id = "direct";
  stack->slices.push_back(scene.image);
  Session direct("direct", stack, "mock", t::mock_manager());

  const Region view{100, 50, 400, 300};
  for (const Seed& s : scene.seeds) {
    const json body{{"prompt",
                     {{"kind", "point"}, {"x", s.point->x}, {"y", s.point->y}, {"viewport", {view.x0, view.y0, view.w, view.h}}}}};
    const json got = post("/sessions/" + sid + "/prompts", body, 200);
    const Annotation want = direct.annotate_live(Prompt::point(s.point->x, s.point->y, view));
    EXPECT_EQ(got.at("polygon"), polygon_to_json(want.polygon));
    EXPECT_EQ(got.at("region"), region_to_json(want.mask.region));
    EXPECT_EQ(got.at("score"), want.mask.score);
    EXPECT_EQ(got.at("id"), want.id);
  }
  const Region around{scene.seeds[0].point->x - 30, scene.seeds[0].point->y - 30, 60, 60};
  const json box = post("/sessions/" + sid + "/prompts",
                        {{"kind", "box"}, {"box", region_to_json(around)}}, 200);
  const Annotation want = direct.annotate_live(Prompt::box_prompt(around, {}));
  EXPECT_EQ(box.at("polygon"), polygon_to_json(want.polygon));
}

TEST_F(ServiceTest, PromptErrorsMapToStatuses) {
  const std::string sid = session_for(upload(disc_image(64, 64, 32, 32, 10)));
  EXPECT_EQ(post("/sessions/" + sid + "/prompts", {{"kind", "point"}, {"x", 1}, {"y", 1}}, 422).at("code"),
            "EmptyMask");
  EXPECT_EQ(post("/sessions/" + sid + "/prompts", {{"kind", "point"}, {"x", 99}, {"y", 1}}, 400).at("code"),
            "InvalidArgument");
  EXPECT_EQ(post("/sessions/" + sid + "/prompts", {{"kind", "lasso"}}, 400).at("code"), "InvalidArgument");
  EXPECT_EQ(post("/sessions/s-404/prompts", {{"kind", "point"}, {"x", 1}, {"y", 1}}, 404).at("code"),
            "NotFound");
}

TEST_F(ServiceTest, UndoRedoOverHttp) {
  const std::string sid = session_for(upload(disc_image(64, 64, 32, 32, 10)));
  EXPECT_EQ(post("/sessions/" + sid + "/undo", json::object(), 409).at("code"), "NothingToUndo");
  EXPECT_EQ(post("/sessions/" + sid + "/redo", json::object(), 409).at("code"), "NothingToRedo");
  post("/sessions/" + sid + "/prompts", {{"kind", "point"}, {"x", 32}, {"y", 32}}, 200);
  EXPECT_EQ(post("/sessions/" + sid + "/undo", json::object(), 200).at("annotations"), 0);
  EXPECT_EQ(post("/sessions/" + sid + "/redo", json::object(), 200).at("annotations"), 1);
  EXPECT_EQ(get("/sessions/" + sid).at("can_undo"), true);
}

TEST_F(ServiceTest, InstallJobStreamsEventsAndIsIdempotent) {
  for (int round = 0; round < 2; ++round) {
    const json job = post("/models/mock/install", json::object(), 202);
    std::string stream;
    auto res = client_->Get(job.at("events").get<std::string>(),
                            [&](const char* data, std::size_t n) {
                              stream.append(data, n);
                              return true;
                            });
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_NE(stream.find("event: progress\ndata: "), std::string::npos) << stream;
    EXPECT_NE(stream.find("event: done\n"), std::string::npos) << stream;
    EXPECT_EQ(get("/jobs/" + job.at("job_id").get<std::string>()).at("state"), "done");
  }
  const json failing = post("/models/sam2-tiny/install", json::object(), 202);
  std::string stream;
  client_->Get(failing.at("events").get<std::string>(), [&](const char* d, std::size_t n) {
    stream.append(d, n);
    return true;
  });
  EXPECT_NE(stream.find("event: error\n"), std::string::npos) << stream;
  EXPECT_NE(stream.find("DownloadFailed"), std::string::npos) << stream;
  EXPECT_EQ(post("/models/sam-huge/install", json::object(), 404).at("code"), "UnknownModel");
}

TEST_F(ServiceTest, BatchAndExportAreRepeatable) {
  std::mt19937 rng(32);
  const auto scene = t::make_disc_scene(rng, 220, 180, 5);
  const std::string sid = session_for(upload(scene.image));
  json seeds = json::array();
  for (const Seed& s : scene.seeds) seeds.push_back({{"x", s.point->x}, {"y", s.point->y}});
  const json batch = post("/sessions/" + sid + "/batch", {{"seeds", seeds}}, 200);
  EXPECT_EQ(batch.at("instances"), 5);
  EXPECT_EQ(batch.at("all_ok"), true);
  auto png = client_->Get(batch.at("labels").get<std::string>());
  ASSERT_TRUE(png);
  EXPECT_EQ(png->get_header_value("Content-Type"), "image/png");
  const std::vector<std::uint8_t> bytes(png->body.begin(), png->body.end());
  EXPECT_EQ(decode_label_png(bytes), t::label_components(scene.truth));

  for (const char* fmt : {"label-png", "polygon-json", "rle-json"}) {
    auto a = client_->Get("/sessions/" + sid + "/export?format=" + fmt);
    auto b = client_->Get("/sessions/" + sid + "/export?format=" + fmt);
    ASSERT_TRUE(a && b);
    EXPECT_EQ(a->status, 200);
    EXPECT_EQ(a->body, b->body) << fmt;
  }
  auto bad = client_->Get("/sessions/" + sid + "/export?format=bmp");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);

  const json report = post("/sessions/" + sid + "/batch", {{"seeds", {{{"x", 999}, {"y", 0}}, {{"box", {0, 0, 5, 5}}}}}}, 200);
  EXPECT_EQ(report.at("all_ok"), false);
  EXPECT_EQ(report.at("seeds").at(0).at("status"), "failed");
  EXPECT_EQ(report.at("seeds").at(1).at("status"), "empty");
}

TEST_F(ServiceTest, ViewsAndAnnotationQueries) {
  const std::string sid = session_for(upload(disc_image(100, 100, 30, 30, 10)));
  post("/sessions/" + sid + "/prompts", {{"kind", "point"}, {"x", 30}, {"y", 30}}, 200);
  EXPECT_EQ(get("/sessions/" + sid + "/annotations?viewport=0,0,50,50&slice=0").size(), 1u);
  EXPECT_EQ(get("/sessions/" + sid + "/annotations?viewport=60,60,40,40&slice=0").size(), 0u);
  EXPECT_EQ(get("/sessions/" + sid + "/annotations?slice=1").size(), 0u);
  EXPECT_EQ(get("/sessions/" + sid + "/annotations").size(), 1u);

  EXPECT_EQ(post("/sessions/" + sid + "/views/next", json::object(), 404).at("code"), "NotFound");
  post("/sessions/" + sid + "/views", {{"viewport", {0, 0, 50, 50}}}, 200);
  post("/sessions/" + sid + "/views", {{"viewport", {0, 0, 50, 50}}}, 200);
  EXPECT_EQ(post("/sessions/" + sid + "/views", {{"viewport", {50, 50, 50, 50}}}, 200).at("views"), 2);
  EXPECT_EQ(post("/sessions/" + sid + "/views/next", json::object(), 200).at("viewport"), json({0, 0, 50, 50}));
  EXPECT_EQ(post("/sessions/" + sid + "/views/next", json::object(), 200).at("viewport"), json({50, 50, 50, 50}));
  EXPECT_EQ(get("/sessions/" + sid + "/views").size(), 2u);
}

TEST_F(ServiceTest, MetricsAreKeyValueLines) {
  const std::string sid = session_for(upload(disc_image(64, 64, 32, 32, 10)));
  post("/sessions/" + sid + "/prompts", {{"kind", "point"}, {"x", 32}, {"y", 32}}, 200);
  post("/sessions/" + sid + "/prompts", {{"kind", "point"}, {"x", 30}, {"y", 30}}, 200);
  auto res = client_->Get("/metrics");
  ASSERT_TRUE(res);
  std::map<std::string, std::string> kv;
  std::istringstream in(res->body);
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    ASSERT_NE(eq, std::string::npos) << line;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  EXPECT_EQ(kv.at("prompts_total"), "2");
  EXPECT_EQ(kv.at("encodes_total"), "1");
  EXPECT_EQ(kv.at("cache_hits_total"), "1");
  EXPECT_EQ(kv.at("cache_misses_total"), "1");
  EXPECT_EQ(kv.at("sessions"), "1");
  EXPECT_EQ(kv.at("workers_live"), "1");
  EXPECT_TRUE(kv.count("prompt_latency_p95_seconds"));

  auto del = client_->Delete("/sessions/" + sid);
  ASSERT_TRUE(del);
  EXPECT_EQ(del->status, 204);
  EXPECT_EQ(get("/sessions/" + sid, 404).at("code"), "NotFound");
  EXPECT_NE(client_->Get("/metrics")->body.find("prompts_total=2"), std::string::npos);
}

TEST_F(ServiceTest, ConcurrentSessionsStayIndependent) {
  std::mt19937 rng(33);
  const auto a = t::make_disc_scene(rng, 160, 160, 3);
  const auto b = t::make_disc_scene(rng, 160, 160, 3);
  const std::string sa = session_for(upload(a.image));
  const std::string sb = session_for(upload(b.image));
  std::atomic<int> failures{0};
  auto run = [&](const std::string& sid, const t::DiscScene& scene) {
    httplib::Client c("127.0.0.1", service_->port());
    for (int round = 0; round < 5; ++round) {
      for (const Seed& s : scene.seeds) {
        const json body{{"kind", "point"}, {"x", s.point->x}, {"y", s.point->y}};
        auto res = c.Post("/sessions/" + sid + "/prompts", body.dump(), "application/json");
        if (!res || res->status != 200) {
          ++failures;
          continue;
        }
        const Polygon poly = polygon_from_json(json::parse(res->body).at("polygon"));
        const Bitmask r = t::rasterize_oracle(poly, {0, 0, 160, 160});
        if (!r.at(s.point->x, s.point->y) || t::iou_oracle(r, t::largest_component_oracle(r)) != 1.0) ++failures;
        Bitmask own(160, 160);
        const LabelImage l = t::label_components(scene.truth);
        const std::uint32_t id = l.at(s.point->x, s.point->y);
        for (int y = 0; y < 160; ++y)
          for (int x = 0; x < 160; ++x)
            if (l.at(x, y) == id) own.set(x, y);
        if (r != own) ++failures;
      }
    }
  };
  std::thread ta(run, sa, std::cref(a));
  std::thread tb(run, sb, std::cref(b));
  ta.join();
  tb.join();
  EXPECT_EQ(failures.load(), 0);
  EXPECT_EQ(get("/sessions/" + sa).at("annotations"), 15);
  EXPECT_EQ(get("/sessions/" + sb).at("annotations"), 15);
}

TEST_F(ServiceTest, SaveWritesSessionDocument) {
  const std::string sid = session_for(upload(disc_image(64, 64, 32, 32, 10)));
  post("/sessions/" + sid + "/prompts", {{"kind", "point"}, {"x", 32}, {"y", 32}}, 200);
  const json saved = post("/sessions/" + sid + "/save", json::object(), 200);
  const std::filesystem::path p = saved.at("path").get<std::string>();
  ASSERT_TRUE(std::filesystem::exists(p));
  const json doc = json::parse(std::ifstream(p));
  EXPECT_EQ(doc.at("session_id"), sid);
  EXPECT_EQ(doc.at("annotations").size(), 1u);
  EXPECT_TRUE(std::filesystem::exists(doc.at("image").at("source").get<std::string>()));
}

}  // namespace
}  // namespace promptseg::service
