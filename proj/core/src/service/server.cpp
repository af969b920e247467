// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/service/server.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "promptseg/digest.hpp"
#include "promptseg/image_io.hpp"
#include "promptseg/session/persistence.hpp"
#include "promptseg/worker/registry.hpp"

namespace promptseg::service {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Append-only event list that server-sent-event streams replay and follow.
class EventLog {
 public:
  void push(std::string event, json data) {
    {
      std::lock_guard lock(mutex_);
      events_.emplace_back(std::move(event), data.dump());
    }
    cv_.notify_all();
  }
  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    cv_.notify_all();
  }
  // Events from index `from`, waiting up to `wait` for at least one.
  std::vector<std::pair<std::string, std::string>> since(std::size_t from,
                                                         std::chrono::milliseconds wait,
                                                         bool& closed) {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, wait, [&] { return events_.size() > from || closed_; });
    closed = closed_;
    if (from >= events_.size()) return {};
    return {events_.begin() + static_cast<std::ptrdiff_t>(from), events_.end()};
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<std::pair<std::string, std::string>> events_;
  bool closed_ = false;
};

struct Job {
  std::string id;
  std::string model_id;
  std::shared_ptr<EventLog> events = std::make_shared<EventLog>();
  std::mutex mutex;
  std::string state = "running";
  json result;
  std::thread thread;
};

struct SessionEntry {
  std::shared_ptr<Session> session;
  std::shared_ptr<EventLog> events = std::make_shared<EventLog>();
  std::mutex batches_mutex;
  std::vector<std::vector<std::uint8_t>> batches;
};

Region parse_region_list(const std::string& s) {
  std::vector<int> v;
  std::stringstream in(s);
  for (std::string tok; std::getline(in, tok, ',');) {
    try {
      v.push_back(std::stoi(tok));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::InvalidArgument, "viewport must be x0,y0,w,h");
    }
  }
  if (v.size() != 4) throw Error(ErrorCode::InvalidArgument, "viewport must be x0,y0,w,h");
  return Region{v[0], v[1], v[2], v[3]};
}

int query_int(const httplib::Request& req, const char* key, int fallback) {
  if (!req.has_param(key)) return fallback;
  try {
    return std::stoi(req.get_param_value(key));
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad integer for ") + key);
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const ApiError& e) { send_json(res, e.status, e.to_json()); }

json image_json(const ImageStack& s) {
  const Image& first = *s.slices.front();
  const char* depth = first.depth() == BitDepth::U8 ? "u8" : first.depth() == BitDepth::U16 ? "u16" : "f32";
  return json{{"image_id", s.id},          {"w", s.width()},        {"h", s.height()},
              {"slices", s.slices.size()}, {"channels", first.channels()}, {"dtype", depth},
              {"sha256", s.sha256}};
}

}  // namespace

json ApiError::to_json() const {
  return json{{"code", code}, {"message", message}, {"detail", detail}};
}

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::NoOverlap:
    case ErrorCode::MalformedFrame:
    case ErrorCode::UnknownKind:
      return 400;
    case ErrorCode::NotFound:
    case ErrorCode::UnknownModel:
      return 404;
    case ErrorCode::NotInstalled:
    case ErrorCode::NothingToUndo:
    case ErrorCode::NothingToRedo:
    case ErrorCode::DuplicateMsgId:
    case ErrorCode::SegmentBusy:
      return 409;
    case ErrorCode::Unsupported:
      return 415;
    case ErrorCode::EmptyMask:
    case ErrorCode::TooManyInstances:
      return 422;
    case ErrorCode::WorkerDied:
    case ErrorCode::HandshakeTimeout:
      return 503;
    case ErrorCode::ProtocolMismatch:
    case ErrorCode::ChecksumMismatch:
    case ErrorCode::SegmentMissing:
    case ErrorCode::HashMismatch:
    case ErrorCode::DownloadFailed:
    case ErrorCode::EnvBootstrapFailed:
    case ErrorCode::SpawnFailed:
    case ErrorCode::WorkerError:
    case ErrorCode::EncodeFailed:
      return 502;
    case ErrorCode::IoError:
      return 500;
  }
  return 500;
}

ApiError to_api_error(const Error& e) {
  if (e.code() == ErrorCode::SpawnFailed && e.detail() == "NotInstalled") {
    return ApiError{http_status(ErrorCode::NotInstalled), "NotInstalled", e.what(), e.detail()};
  }
  return ApiError{http_status(e.code()), std::string(to_string(e.code())), e.what(), e.detail()};
}

Prompt prompt_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const Region viewport = j.contains("viewport") ? region_from_json(j.at("viewport")) : Region{};
  const int slice = j.value("slice", 0);
  if (kind == "point") return Prompt::point(j.at("x").get<int>(), j.at("y").get<int>(), viewport, slice);
  if (kind == "points") {
    std::vector<PromptPoint> pts;
    for (const json& p : j.at("points")) {
      pts.push_back(PromptPoint{p.at("x").get<int>(), p.at("y").get<int>(),
                                p.value("label", 1) != 0 ? Polarity::Foreground : Polarity::Background});
    }
    return Prompt::point_set(std::move(pts), viewport, slice);
  }
  if (kind == "box") return Prompt::box_prompt(region_from_json(j.at("box")), viewport, slice);
  throw Error(ErrorCode::InvalidArgument, "prompt kind must be point, points or box");
}

Seed seed_from_json(const json& j) {
  if (j.contains("box")) return Seed::boxed(region_from_json(j.at("box")));
  return Seed::at(j.at("x").get<int>(), j.at("y").get<int>());
}

json seed_report_to_json(const SeedReport& r) {
  json j{{"index", r.index}, {"status", to_string(r.status)}, {"label", r.label},
         {"score", r.score}, {"pixels", r.pixels}};
  if (!r.code.empty()) {
    j["code"] = r.code;
    j["message"] = r.message;
  }
  return j;
}

struct Service::Impl {
  ServiceOptions options;
  std::shared_ptr<worker::WorkerManager> workers;
  std::shared_ptr<worker::Installer> installer;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> stopping{false};
  int bound_port = 0;

  ImageStore images;
  std::mutex mutex;  // sessions, jobs, counters
  std::map<std::string, std::shared_ptr<SessionEntry>> sessions;
  std::map<std::string, std::shared_ptr<Job>> jobs;
  std::uint64_t next_session = 1;
  std::uint64_t next_job = 1;
  SessionCounters retired;
  std::uint64_t requests = 0;
  std::vector<double> prompt_latencies;

  Impl(ServiceOptions o, std::shared_ptr<worker::WorkerManager> w,
       std::shared_ptr<worker::Installer> i)
      : options(std::move(o)), workers(std::move(w)), installer(std::move(i)) {
    routes();
  }

  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [this, f](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard lock(mutex);
        ++requests;
      }
      try {
        f(req, res);
      } catch (const Error& e) {
        send_error(res, to_api_error(e));
      } catch (const json::exception& e) {
        send_error(res, ApiError{400, "InvalidArgument", e.what(), "json"});
      } catch (const std::exception& e) {
        send_error(res, ApiError{500, "Internal", e.what(), ""});
      }
    };
  }

  std::shared_ptr<SessionEntry> entry(const std::string& id) {
    std::lock_guard lock(mutex);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw Error(ErrorCode::NotFound, "unknown session " + id);
    return it->second;
  }

  std::shared_ptr<Job> job(const std::string& id) {
    std::lock_guard lock(mutex);
    auto it = jobs.find(id);
    if (it == jobs.end()) throw Error(ErrorCode::NotFound, "unknown job " + id);
    return it->second;
  }

  void stream(httplib::Response& res, std::shared_ptr<EventLog> log, bool stop_on_close) {
    res.set_header("Cache-Control", "no-cache");
    std::size_t next = 0;
    res.set_chunked_content_provider(
        "text/event-stream",
        [this, log, next, stop_on_close](std::size_t, httplib::DataSink& sink) mutable {
          bool closed = false;
          const auto events = log->since(next, std::chrono::milliseconds(250), closed);
          for (const auto& [name, data] : events) {
            const std::string chunk = "event: " + name + "\ndata: " + data + "\n\n";
            if (!sink.write(chunk.data(), chunk.size())) return false;
            ++next;
          }
          if ((closed && stop_on_close) || stopping || !sink.is_writable()) sink.done();
          return true;
        });
  }

  json models_json() {
    json out = json::array();
    for (const worker::ModelSpec& m : installer ? installer->models() : worker::registry()) {
      out.push_back(json{{"model_id", m.model_id},
                         {"display_name", m.display_name},
                         {"download_size_mb", m.download_size_mb},
                         {"nominal_encode_s", m.nominal_encode_s},
                         {"enabled", m.enabled},
                         {"installed", m.is_mock() || (installer && installer->is_installed(m.model_id))}});
    }
    return out;
  }

  void start_install(const std::string& model_id, httplib::Response& res) {
    worker::find_model(installer ? installer->models() : worker::registry(), model_id);
    if (!installer) throw Error(ErrorCode::Unsupported, "this service has no installer");
    auto j = std::make_shared<Job>();
    {
      std::lock_guard lock(mutex);
      j->id = "job-" + std::to_string(next_job++);
      jobs[j->id] = j;
    }
    j->model_id = model_id;
    j->thread = std::thread([this, j] {
      json result;
      std::string state;
      try {
        const worker::InstallRecord rec = installer->install(j->model_id, [&](const worker::InstallProgress& p) {
          j->events->push("progress", json{{"percent", p.percent}, {"phase", p.phase}, {"message", p.message}});
        });
        result = json{{"model_id", rec.model_id}, {"duration_s", rec.duration_s}};
        state = "done";
      } catch (const Error& e) {
        result = to_api_error(e).to_json();
        state = "error";
      } catch (const std::exception& e) {
        result = ApiError{500, "Internal", e.what(), ""}.to_json();
        state = "error";
      }
      {
        std::lock_guard lock(j->mutex);
        j->state = state;
        j->result = result;
      }
      j->events->push(state, result);
      j->events->close();
    });
    send_json(res, 202, json{{"job_id", j->id}, {"events", "/jobs/" + j->id + "/events"}});
  }

  void create_session(const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body);
    auto image = images.get(body.at("image_id").get<std::string>());
    const std::string model = body.at("model_id").get<std::string>();
    SessionOptions opts = options.session;
    opts.whole_image_embed = body.value("whole_image_embed", opts.whole_image_embed);
    std::string id;
    {
      std::lock_guard lock(mutex);
      id = "s-" + std::to_string(next_session++);
    }
    auto e = std::make_shared<SessionEntry>();
    e->session = std::make_shared<Session>(id, image, model, workers, opts);
    std::weak_ptr<EventLog> weak = e->events;
    e->session->set_listener([weak](const std::string& event, double pct) {
      if (auto log = weak.lock()) log->push(event, json{{"percent", pct}});
    });
    {
      std::lock_guard lock(mutex);
      sessions[id] = e;
    }
    send_json(res, 201, json{{"session_id", id}, {"image_id", image->id}, {"model_id", model}});
  }

  void delete_session(const std::string& id) {
    std::shared_ptr<SessionEntry> e;
    {
      std::lock_guard lock(mutex);
      auto it = sessions.find(id);
      if (it == sessions.end()) throw Error(ErrorCode::NotFound, "unknown session " + id);
      e = it->second;
      sessions.erase(it);
      const SessionCounters c = e->session->counters();
      retired.prompts += c.prompts;
      retired.batches += c.batches;
      retired.encodes += c.encodes;
      retired.decodes += c.decodes;
      retired.encode_seconds += c.encode_seconds;
      retired.cache.hits += c.cache.hits;
      retired.cache.misses += c.cache.misses;
      retired.cache.evictions += c.cache.evictions;
      retired.cache.inserts += c.cache.inserts;
    }
    e->events->close();
  }

  std::string metrics() {
    std::lock_guard lock(mutex);
    SessionCounters t = retired;
    for (const auto& [id, e] : sessions) {
      const SessionCounters c = e->session->counters();
      t.prompts += c.prompts;
      t.batches += c.batches;
      t.encodes += c.encodes;
      t.decodes += c.decodes;
      t.encode_seconds += c.encode_seconds;
      t.cache.hits += c.cache.hits;
      t.cache.misses += c.cache.misses;
      t.cache.evictions += c.cache.evictions;
      t.cache.inserts += c.cache.inserts;
    }
    std::vector<double> lat = prompt_latencies;
    std::sort(lat.begin(), lat.end());
    const auto pct = [&](double q) {
      if (lat.empty()) return 0.0;
      return lat[std::min(lat.size() - 1, static_cast<std::size_t>(q * static_cast<double>(lat.size())))];
    };
    std::ostringstream out;
    out << "sessions=" << sessions.size() << '\n'
        << "workers_live=" << workers->live_count() << '\n'
        << "requests_total=" << requests << '\n'
        << "prompts_total=" << t.prompts << '\n'
        << "batches_total=" << t.batches << '\n'
        << "encodes_total=" << t.encodes << '\n'
        << "decodes_total=" << t.decodes << '\n'
        << "encode_seconds_total=" << t.encode_seconds << '\n'
        << "cache_hits_total=" << t.cache.hits << '\n'
        << "cache_misses_total=" << t.cache.misses << '\n'
        << "cache_evictions_total=" << t.cache.evictions << '\n'
        << "cache_inserts_total=" << t.cache.inserts << '\n'
        << "prompt_latency_p50_seconds=" << pct(0.50) << '\n'
        << "prompt_latency_p95_seconds=" << pct(0.95) << '\n';
    return out.str();
  }

  void routes() {
    server.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, json{{"status", "ok"}});
    }));

    server.Post("/images", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::string bytes, name;
      if (req.is_multipart_form_data()) {
        if (req.files.empty()) throw Error(ErrorCode::InvalidArgument, "multipart upload without a file");
        const auto& f = req.has_file("file") ? req.get_file_value("file") : req.files.begin()->second;
        bytes = f.content;
        name = f.filename;
      } else {
        bytes = req.body;
      }
      const std::span<const std::uint8_t> view(reinterpret_cast<const std::uint8_t*>(bytes.data()),
                                               bytes.size());
      ImageStack stack = decode_image(view, "upload");
      if (!options.data_dir.empty()) {
        // Keep a copy so saved sessions can find the pixels again.
        const fs::path dir = options.data_dir / "images";
        fs::create_directories(dir);
        const fs::path path = dir / (stack.sha256 + (bytes[0] == '\x89' ? ".png" : ".tif"));
        if (!fs::exists(path)) write_file(path, view);
        stack.source = path.string();
      } else {
        stack.source = name;
      }
      const std::string id = images.add(std::move(stack));
      send_json(res, 201, image_json(*images.get(id)));
    }));

    server.Get(R"(/images/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, image_json(*images.get(req.matches[1])));
    }));

    server.Get("/models", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, models_json());
    }));

    server.Post(R"(/models/([^/]+)/install)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      start_install(req.matches[1], res);
    }));

    server.Get(R"(/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto j = job(req.matches[1]);
      std::lock_guard lock(j->mutex);
      send_json(res, 200, json{{"job_id", j->id}, {"model_id", j->model_id}, {"state", j->state},
                               {"result", j->result}});
    }));

    server.Get(R"(/jobs/([^/]+)/events)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      stream(res, job(req.matches[1])->events, true);
    }));

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      create_session(req, res);
    }));

    server.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = entry(req.matches[1])->session;
      send_json(res, 200, json{{"session_id", s->id()}, {"image_id", s->image_id()},
                               {"model_id", s->model_id()}, {"annotations", s->annotations().size()},
                               {"can_undo", s->can_undo()}, {"can_redo", s->can_redo()}});
    }));

    server.Delete(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      delete_session(req.matches[1]);
      res.status = 204;
    }));

    server.Get(R"(/sessions/([^/]+)/events)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      stream(res, entry(req.matches[1])->events, true);
    }));

    server.Post(R"(/sessions/([^/]+)/prompts)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = entry(req.matches[1])->session;
      const json body = json::parse(req.body);
      const Prompt p = prompt_from_json(body.contains("prompt") ? body.at("prompt") : body);
      const auto t0 = std::chrono::steady_clock::now();
      const Annotation a = s->annotate_live(p);
      const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      {
        std::lock_guard lock(mutex);
        prompt_latencies.push_back(dt);
      }
      send_json(res, 200, annotation_to_json(a));
    }));

    server.Post(R"(/sessions/([^/]+)/batch)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto e = entry(req.matches[1]);
      const json body = json::parse(req.body);
      std::vector<Seed> seeds;
      for (const json& s : body.at("seeds")) seeds.push_back(seed_from_json(s));
      const Region viewport = body.contains("viewport") ? region_from_json(body.at("viewport")) : Region{};
      const BatchResult r = e->session->annotate_batch(seeds, viewport, body.value("slice", 0));
      std::size_t index;
      {
        std::lock_guard lock(e->batches_mutex);
        e->batches.push_back(encode_label_png(r.labels));
        index = e->batches.size() - 1;
      }
      json report = json::array();
      for (const SeedReport& sr : r.seeds) report.push_back(seed_report_to_json(sr));
      send_json(res, 200, json{{"batch_id", index},
                               {"labels", "/sessions/" + e->session->id() + "/batches/" +
                                              std::to_string(index) + "/labels.png"},
                               {"width", r.labels.width},
                               {"height", r.labels.height},
                               {"instances", r.labels.max_label()},
                               {"all_ok", r.all_ok()},
                               {"seeds", std::move(report)}});
    }));

    server.Get(R"(/sessions/([^/]+)/batches/(\d+)/labels.png)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto e = entry(req.matches[1]);
      const std::size_t index = std::stoul(req.matches[2]);
      std::lock_guard lock(e->batches_mutex);
      if (index >= e->batches.size()) throw Error(ErrorCode::NotFound, "unknown batch");
      const auto& png = e->batches[index];
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    }));

    server.Post(R"(/sessions/([^/]+)/undo)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = entry(req.matches[1])->session;
      s->undo();
      send_json(res, 200, json{{"annotations", s->annotations().size()}});
    }));

    server.Post(R"(/sessions/([^/]+)/redo)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = entry(req.matches[1])->session;
      s->redo();
      send_json(res, 200, json{{"annotations", s->annotations().size()}});
    }));

    server.Get(R"(/sessions/([^/]+)/annotations)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = entry(req.matches[1])->session;
      std::vector<Annotation> list;
      if (req.has_param("viewport")) {
        list = s->annotations_in_view(parse_region_list(req.get_param_value("viewport")),
                                      query_int(req, "slice", 0));
      } else {
        list = s->annotations();
        if (req.has_param("slice")) {
          const int slice = query_int(req, "slice", 0);
          std::erase_if(list, [&](const Annotation& a) { return a.slice_index != slice; });
        }
      }
      json out = json::array();
      for (const Annotation& a : list) out.push_back(annotation_to_json(a));
      send_json(res, 200, out);
    }));

    server.Post(R"(/sessions/([^/]+)/views)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = entry(req.matches[1])->session;
      const json body = json::parse(req.body);
      s->remember_view(region_from_json(body.at("viewport")), body.value("slice", 0));
      send_json(res, 200, json{{"views", s->views().size()}});
    }));

    server.Get(R"(/sessions/([^/]+)/views)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      json out = json::array();
      for (const ViewConfig& v : entry(req.matches[1])->session->views()) {
        out.push_back(json{{"viewport", region_to_json(v.viewport)}, {"slice", v.slice}});
      }
      send_json(res, 200, out);
    }));

    server.Post(R"(/sessions/([^/]+)/views/next)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto v = entry(req.matches[1])->session->cycle_views();
      if (!v) throw Error(ErrorCode::NotFound, "no remembered views");
      send_json(res, 200, json{{"viewport", region_to_json(v->viewport)}, {"slice", v->slice}});
    }));

    server.Get(R"(/sessions/([^/]+)/export)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto s = entry(req.matches[1])->session;
      const ExportFormat f = parse_export_format(req.has_param("format") ? req.get_param_value("format") : "");
      const auto bytes = s->export_as(f, query_int(req, "slice", 0));
      res.set_content(std::string(bytes.begin(), bytes.end()), std::string(content_type(f)));
    }));

    server.Post(R"(/sessions/([^/]+)/respawn)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      entry(req.matches[1])->session->respawn_worker();
      send_json(res, 200, json{{"status", "ok"}});
    }));

    server.Post(R"(/sessions/([^/]+)/save)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      if (options.data_dir.empty()) throw Error(ErrorCode::Unsupported, "service has no data directory");
      const fs::path p = save_session(*entry(req.matches[1])->session, options.data_dir);
      send_json(res, 200, json{{"path", p.string()}});
    }));

    server.Get("/metrics", guarded([this](const httplib::Request&, httplib::Response& res) {
      res.set_content(metrics(), "text/plain");
    }));

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        const std::string code = res.status == 404 ? "NotFound" : "HttpError";
        res.set_content(ApiError{res.status, code, "no such endpoint", ""}.to_json().dump(),
                        "application/json");
      }
    });
  }
};

Service::Service(ServiceOptions options, std::shared_ptr<worker::WorkerManager> workers,
                 std::shared_ptr<worker::Installer> installer)
    : impl_(std::make_unique<Impl>(std::move(options), std::move(workers), std::move(installer))) {}

Service::~Service() {
  stop();
  std::map<std::string, std::shared_ptr<Job>> jobs;
  {
    std::lock_guard lock(impl_->mutex);
    jobs.swap(impl_->jobs);
  }
  for (auto& [id, j] : jobs) {
    if (j->thread.joinable()) j->thread.join();
  }
  std::map<std::string, std::shared_ptr<SessionEntry>> sessions;
  {
    std::lock_guard lock(impl_->mutex);
    sessions.swap(impl_->sessions);
  }
}

void Service::bind() {
  auto& s = impl_->server;
  if (impl_->options.port == 0) {
    impl_->bound_port = s.bind_to_any_port(impl_->options.host);
    if (impl_->bound_port <= 0) throw Error(ErrorCode::IoError, "cannot bind " + impl_->options.host);
  } else {
    if (!s.bind_to_port(impl_->options.host, impl_->options.port)) {
      throw Error(ErrorCode::IoError, "cannot bind " + impl_->options.host + ":" +
                                          std::to_string(impl_->options.port));
    }
    impl_->bound_port = impl_->options.port;
  }
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::start() {
  bind();
  impl_->thread = std::thread([this] { listen(); });
  impl_->server.wait_until_ready();
}

void Service::stop() {
  impl_->stopping = true;
  {
    std::lock_guard lock(impl_->mutex);
    for (auto& [id, e] : impl_->sessions) e->events->close();
  }
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int Service::port() const noexcept { return impl_->bound_port; }

}  // namespace promptseg::service
