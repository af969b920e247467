// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/session/session.hpp"

#include <algorithm>
#include <chrono>

#include "promptseg/contour.hpp"
#include "promptseg/error.hpp"

namespace promptseg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

protocol::ModelPrompt to_model_frame(const Prompt& p, const Region& r, const ScalePair& s) {
  protocol::ModelPrompt out;
  for (const PromptPoint& pt : p.points) {
    out.points.push_back(protocol::ModelPoint{(pt.x - r.x0) * s.sx, (pt.y - r.y0) * s.sy,
                                              pt.polarity == Polarity::Foreground});
  }
  if (p.box) {
    out.box = protocol::ModelBox{(p.box->x0 - r.x0) * s.sx, (p.box->y0 - r.y0) * s.sy,
                                 (p.box->x1() - r.x0) * s.sx, (p.box->y1() - r.y0) * s.sy};
  }
  return out;
}

bool is_worker_failure(ErrorCode c) {
  return c == ErrorCode::WorkerDied || c == ErrorCode::HandshakeTimeout ||
         c == ErrorCode::SpawnFailed;
}

}  // namespace

std::string_view to_string(SeedStatus s) noexcept {
  switch (s) {
    case SeedStatus::Ok: return "ok";
    case SeedStatus::Empty: return "empty";
    case SeedStatus::Occluded: return "occluded";
    case SeedStatus::Failed: return "failed";
  }
  return "?";
}

bool BatchResult::all_ok() const noexcept {
  return std::all_of(seeds.begin(), seeds.end(),
                     [](const SeedReport& r) { return r.status == SeedStatus::Ok; });
}

Session::Session(std::string session_id, std::shared_ptr<const ImageStack> image,
                 std::string model_id, std::shared_ptr<worker::WorkerManager> workers,
                 SessionOptions options)
    : id_(std::move(session_id)), image_(std::move(image)), model_id_(std::move(model_id)),
      workers_(std::move(workers)), options_(std::move(options)), cache_(options_.cache) {
  if (!image_ || image_->slices.empty()) {
    throw Error(ErrorCode::InvalidArgument, "session needs an image");
  }
  options_.policy.validate();
  workers_->spawn(id_, model_id_);
}

Session::~Session() {
  try {
    workers_->terminate_owner(id_);
  } catch (...) {
  }
}

std::shared_ptr<worker::WorkerClient> Session::worker() { return workers_->spawn(id_, model_id_); }

void Session::emit(const std::string& event, double percent) {
  if (listener_) listener_(event, percent);
}

void Session::release(worker::WorkerClient& w, const std::vector<EmbeddingEntry>& dropped) noexcept {
  for (const EmbeddingEntry& e : dropped) {
    try {
      w.release(e.handle);
    } catch (const Error&) {
    }
  }
}

void Session::on_worker_error(const Error& e) {
  // Handles held by a dead worker are meaningless; nothing to release.
  if (is_worker_failure(e.code())) cache_.clear();
}

MaskResult Session::segment(const Prompt& prompt, const Image& slice,
                            std::vector<EmbeddingEntry>& dropped, double& worker_s) {
  auto w = worker();
  Region region;
  std::string handle;
  if (auto hit = cache_.lookup(prompt, image_->id, model_id_)) {
    region = hit->key.region;
    handle = hit->handle;
  } else {
    region = options_.whole_image_embed ? slice.bounds()
                                        : embedding_region(slice, prompt, options_.policy);
    const auto t0 = Clock::now();
    emit("encode-start", 0);
    const worker::EncodeReply er =
        w->encode(slice, region, [this](double pct, const std::string&) {
          emit("encode-progress", pct);
        });
    emit("encode-done", 100);
    ++counters_.encodes;
    counters_.encode_seconds += seconds_since(t0);
    worker_s += er.elapsed_s;
    handle = er.handle;
    auto evicted = cache_.insert(EmbeddingEntry{
        EmbeddingKey{image_->id, prompt.slice, region, model_id_}, handle, er.bytes, Clock::now()});
    dropped.insert(dropped.end(), evicted.begin(), evicted.end());
  }
  const ScalePair scale = region_to_model_frame(region, options_.policy);
  worker::DecodeReply dr = w->decode(handle, region, to_model_frame(prompt, region, scale), scale);
  ++counters_.decodes;
  worker_s += dr.elapsed_s;
  if (!dr.mask.any()) throw Error(ErrorCode::EmptyMask, "model returned an empty mask");
  return MaskResult(region, std::move(dr.mask), std::clamp(dr.score, 0.0, 1.0), prompt);
}

Annotation Session::annotate_live(const Prompt& prompt) {
  std::lock_guard lock(mutex_);
  const auto t0 = Clock::now();
  if (prompt.kind == PromptKind::BatchSeeds) {
    throw Error(ErrorCode::InvalidArgument, "batch seeds go through annotate_batch");
  }
  validate_prompt(prompt, image_->width(), image_->height());
  const ImageRef& slice = image_->slice(prompt.slice);

  std::vector<EmbeddingEntry> dropped;
  double worker_s = 0;
  MaskResult m;
  try {
    m = segment(prompt, *slice, dropped, worker_s);
  } catch (const Error& e) {
    on_worker_error(e);
    throw;
  }
  if (!dropped.empty()) {
    if (auto w = workers_->find(id_, model_id_)) release(*w, dropped);
  }

  // The outline follows the largest component; the mask keeps every pixel.
  Annotation a;
  a.id = next_id_++;
  a.image_id = image_->id;
  a.slice_index = prompt.slice;
  a.polygon = mask_to_polygon(m);
  a.mask = std::move(m);
  a.created_at = std::chrono::system_clock::now();

  annotations_.push_back(a);
  undo_.push_back(Delta{{a}});
  redo_.clear();
  ++counters_.prompts;
  counters_.last_prompt_seconds = seconds_since(t0);
  counters_.last_worker_seconds = worker_s;
  return a;
}

BatchResult Session::annotate_batch(const std::vector<Seed>& seeds, Region viewport, int slice) {
  std::lock_guard lock(mutex_);
  if (seeds.empty()) throw Error(ErrorCode::InvalidArgument, "batch needs at least one seed");
  const ImageRef& img = image_->slice(slice);
  const int width = img->width(), height = img->height();
  if (viewport.empty()) viewport = img->bounds();

  BatchResult result;
  result.labels = LabelImage(width, height);
  std::vector<std::optional<MaskResult>> masks(seeds.size());
  std::vector<EmbeddingEntry> dropped;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    SeedReport rep;
    rep.index = i;
    try {
      const Prompt p = Prompt::from_seed(seeds[i], viewport, slice);
      validate_prompt(p, width, height);
      double worker_s = 0;
      masks[i] = segment(p, *img, dropped, worker_s);
      rep.score = masks[i]->score;
    } catch (const Error& e) {
      on_worker_error(e);
      rep.status = e.code() == ErrorCode::EmptyMask ? SeedStatus::Empty : SeedStatus::Failed;
      rep.code = std::string(to_string(e.code()));
      rep.message = e.what();
    }
    result.seeds.push_back(std::move(rep));
  }
  if (!dropped.empty()) {
    if (auto w = workers_->find(id_, model_id_)) release(*w, dropped);
  }

  // Pixel ownership: strictly higher score takes over, so ties stay with
  // the earlier seed.
  std::vector<std::int32_t> owner(static_cast<std::size_t>(width) * height, -1);
  std::vector<double> best(owner.size(), 0.0);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (!masks[i]) continue;
    const MaskResult& m = *masks[i];
    for (int y = 0; y < m.region.h; ++y) {
      for (int x = 0; x < m.region.w; ++x) {
        if (!m.mask.at(x, y)) continue;
        const std::size_t idx = static_cast<std::size_t>(m.region.y0 + y) * width + m.region.x0 + x;
        if (owner[idx] < 0 || m.score > best[idx]) {
          owner[idx] = static_cast<std::int32_t>(i);
          best[idx] = m.score;
        }
      }
    }
  }
  for (std::int32_t o : owner) {
    if (o >= 0) ++result.seeds[static_cast<std::size_t>(o)].pixels;
  }
  std::uint32_t next_label = 1;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    SeedReport& rep = result.seeds[i];
    if (!masks[i]) continue;
    if (rep.pixels == 0) {
      rep.status = SeedStatus::Occluded;
      rep.code = "Occluded";
      rep.message = "mask fully covered by other seeds";
      continue;
    }
    rep.label = next_label++;
  }
  for (std::size_t idx = 0; idx < owner.size(); ++idx) {
    if (owner[idx] >= 0) result.labels.labels[idx] = result.seeds[static_cast<std::size_t>(owner[idx])].label;
  }

  Delta delta;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (result.seeds[i].label == 0) continue;
    const MaskResult& m = *masks[i];
    Bitmask owned(m.region.w, m.region.h);
    for (int y = 0; y < m.region.h; ++y) {
      for (int x = 0; x < m.region.w; ++x) {
        const std::size_t idx = static_cast<std::size_t>(m.region.y0 + y) * width + m.region.x0 + x;
        if (owner[idx] == static_cast<std::int32_t>(i)) owned.set(x, y);
      }
    }
    MaskResult kept(m.region, std::move(owned), m.score, m.prompt_echo);
    Annotation a;
    a.id = next_id_++;
    a.image_id = image_->id;
    a.slice_index = slice;
    a.polygon = mask_to_polygon(kept);
    a.mask = std::move(kept);
    a.created_at = std::chrono::system_clock::now();
    annotations_.push_back(a);
    delta.added.push_back(std::move(a));
  }
  if (!delta.added.empty()) {
    undo_.push_back(std::move(delta));
    redo_.clear();
  }
  ++counters_.batches;
  return result;
}

void Session::undo() {
  std::lock_guard lock(mutex_);
  if (undo_.empty()) throw Error(ErrorCode::NothingToUndo, "nothing to undo");
  Delta d = std::move(undo_.back());
  undo_.pop_back();
  annotations_.resize(annotations_.size() - d.added.size());
  redo_.push_back(std::move(d));
}

void Session::redo() {
  std::lock_guard lock(mutex_);
  if (redo_.empty()) throw Error(ErrorCode::NothingToRedo, "nothing to redo");
  Delta d = std::move(redo_.back());
  redo_.pop_back();
  annotations_.insert(annotations_.end(), d.added.begin(), d.added.end());
  undo_.push_back(std::move(d));
}

bool Session::can_undo() const {
  std::lock_guard lock(mutex_);
  return !undo_.empty();
}

bool Session::can_redo() const {
  std::lock_guard lock(mutex_);
  return !redo_.empty();
}

std::vector<Annotation> Session::annotations() const {
  std::lock_guard lock(mutex_);
  return annotations_;
}

std::vector<Annotation> Session::annotations_in_view(const Region& viewport, int slice) const {
  std::lock_guard lock(mutex_);
  std::vector<Annotation> out;
  for (const Annotation& a : annotations_) {
    if (a.slice_index == slice && polygon_bounds(a.polygon).intersects(viewport)) out.push_back(a);
  }
  return out;
}

void Session::remember_view(const Region& viewport, int slice) {
  std::lock_guard lock(mutex_);
  const ViewConfig v{viewport, slice};
  if (std::find(views_.begin(), views_.end(), v) == views_.end()) views_.push_back(v);
}

std::optional<ViewConfig> Session::cycle_views() {
  std::lock_guard lock(mutex_);
  if (views_.empty()) return std::nullopt;
  const ViewConfig v = views_[view_cursor_ % views_.size()];
  view_cursor_ = (view_cursor_ + 1) % views_.size();
  return v;
}

std::vector<ViewConfig> Session::views() const {
  std::lock_guard lock(mutex_);
  return views_;
}

std::vector<std::uint8_t> Session::export_as(ExportFormat format, int slice) const {
  std::lock_guard lock(mutex_);
  image_->slice(slice);
  return export_annotations(annotations_, image_->width(), image_->height(), format, slice);
}

SessionCounters Session::counters() const {
  std::lock_guard lock(mutex_);
  SessionCounters c = counters_;
  c.cache = cache_.stats();
  return c;
}

void Session::set_listener(SessionListener listener) {
  std::lock_guard lock(mutex_);
  listener_ = std::move(listener);
}

void Session::respawn_worker() {
  std::lock_guard lock(mutex_);
  cache_.clear();
  workers_->respawn(id_, model_id_);
}

void Session::restore(std::vector<Annotation> annotations, std::vector<ViewConfig> views,
                      std::uint64_t next_annotation_id) {
  std::lock_guard lock(mutex_);
  std::uint64_t max_id = 0;
  for (const Annotation& a : annotations) max_id = std::max(max_id, a.id);
  annotations_ = std::move(annotations);
  views_ = std::move(views);
  view_cursor_ = 0;
  undo_.clear();
  redo_.clear();
  next_id_ = std::max(next_annotation_id, max_id + 1);
}

std::uint64_t Session::next_annotation_id() const {
  std::lock_guard lock(mutex_);
  return next_id_;
}

}  // namespace promptseg
