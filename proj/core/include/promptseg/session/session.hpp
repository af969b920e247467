// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "promptseg/embedding_cache.hpp"
#include "promptseg/embedding_policy.hpp"
#include "promptseg/error.hpp"
#include "promptseg/image.hpp"
#include "promptseg/session/export.hpp"
#include "promptseg/types.hpp"
#include "promptseg/worker/manager.hpp"

namespace promptseg {

struct SessionOptions {
  EmbeddingPolicy policy;
  EmbeddingCache::Limits cache;
  /// Encode the whole slice for every miss instead of the policy region.
  bool whole_image_embed = false;
};

struct ViewConfig {
  Region viewport;
  int slice = 0;
  friend bool operator==(const ViewConfig&, const ViewConfig&) = default;
};

enum class SeedStatus : std::uint8_t { Ok, Empty, Occluded, Failed };
std::string_view to_string(SeedStatus s) noexcept;

struct SeedReport {
  std::size_t index = 0;
  SeedStatus status = SeedStatus::Ok;
  /// Label in the batch image; 0 unless status is Ok.
  std::uint32_t label = 0;
  double score = 0;
  /// Pixels carrying this seed's label.
  std::int64_t pixels = 0;
  /// Error code and message for Empty and Failed seeds.
  std::string code;
  std::string message;
};

struct BatchResult {
  LabelImage labels;
  std::vector<SeedReport> seeds;
  bool all_ok() const noexcept;
};

struct SessionCounters {
  std::uint64_t prompts = 0;
  std::uint64_t batches = 0;
  std::uint64_t encodes = 0;
  std::uint64_t decodes = 0;
  double encode_seconds = 0;
  /// Wall time of the most recent live prompt, and the worker-reported
  /// compute time within it.
  double last_prompt_seconds = 0;
  double last_worker_seconds = 0;
  CacheStats cache;
};

/// Live events: ("encode-start" | "encode-progress" | "encode-done", percent).
using SessionListener = std::function<void(const std::string& event, double percent)>;

/// One annotation session on one image with one model. Every public call is
/// serialised on the session's mutex, so at most one encode is in flight.
class Session {
 public:
  /// Starts (or reuses) the session's worker. Errors: those of
  /// WorkerManager::spawn.
  Session(std::string session_id, std::shared_ptr<const ImageStack> image, std::string model_id,
          std::shared_ptr<worker::WorkerManager> workers, SessionOptions options = {});
  ~Session();

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const noexcept { return id_; }
  const std::string& image_id() const noexcept { return image_->id; }
  const std::string& model_id() const noexcept { return model_id_; }
  const ImageStack& image() const noexcept { return *image_; }
  const SessionOptions& options() const noexcept { return options_; }

  /// One prompt, one annotation. Errors: InvalidArgument, EmptyMask,
  /// EncodeFailed, WorkerDied (the cache is dropped; the next call starts a
  /// fresh worker).
  Annotation annotate_live(const Prompt& prompt);

  /// Segments every seed and composites the masks: on overlap the higher
  /// score wins, ties go to the earlier seed. Labels are assigned in seed
  /// order to seeds that keep at least one pixel. Per-seed failures are
  /// reported, not thrown. An empty viewport means the whole slice.
  BatchResult annotate_batch(const std::vector<Seed>& seeds, Region viewport = {}, int slice = 0);

  /// Errors: NothingToUndo / NothingToRedo.
  void undo();
  void redo();
  bool can_undo() const;
  bool can_redo() const;

  std::vector<Annotation> annotations() const;
  /// Annotations on `slice` whose outline intersects `viewport`.
  std::vector<Annotation> annotations_in_view(const Region& viewport, int slice) const;

  /// Stores a view unless an identical one is already stored.
  void remember_view(const Region& viewport, int slice);
  /// Stored views round-robin; nullopt when none are stored.
  std::optional<ViewConfig> cycle_views();
  std::vector<ViewConfig> views() const;

  std::vector<std::uint8_t> export_as(ExportFormat format, int slice = 0) const;

  SessionCounters counters() const;
  void set_listener(SessionListener listener);

  /// Replaces the worker process and drops all cached embeddings.
  void respawn_worker();

  /// Replaces annotation and view state wholesale (session restore); undo
  /// history is cleared.
  void restore(std::vector<Annotation> annotations, std::vector<ViewConfig> views,
               std::uint64_t next_annotation_id);
  std::uint64_t next_annotation_id() const;

 private:
  struct Delta {
    std::vector<Annotation> added;
  };

  std::shared_ptr<worker::WorkerClient> worker();
  MaskResult segment(const Prompt& prompt, const Image& slice,
                     std::vector<EmbeddingEntry>& dropped, double& worker_s);
  void release(worker::WorkerClient& w, const std::vector<EmbeddingEntry>& dropped) noexcept;
  void on_worker_error(const Error& e);
  void emit(const std::string& event, double percent);

  std::string id_;
  std::shared_ptr<const ImageStack> image_;
  std::string model_id_;
  std::shared_ptr<worker::WorkerManager> workers_;
  SessionOptions options_;

  mutable std::mutex mutex_;
  EmbeddingCache cache_;
  std::vector<Annotation> annotations_;
  std::vector<Delta> undo_;
  std::vector<Delta> redo_;
  std::vector<ViewConfig> views_;
  std::size_t view_cursor_ = 0;
  std::uint64_t next_id_ = 1;
  SessionCounters counters_;
  SessionListener listener_;
};

}  // namespace promptseg
