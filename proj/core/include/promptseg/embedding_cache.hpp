// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <list>
#include <optional>
#include <string>
#include <vector>

#include "promptseg/types.hpp"

namespace promptseg {

struct EmbeddingKey {
  std::string image_id;
  int slice_index = 0;
  Region region;
  std::string model_id;

  friend bool operator==(const EmbeddingKey&, const EmbeddingKey&) = default;
};

/// A worker-held embedding. The cache owns only the handle; the tensor
/// stays in the worker and is valid only while that worker lives.
struct EmbeddingEntry {
  EmbeddingKey key;
  std::string handle;
  std::uint64_t bytes = 0;
  std::chrono::steady_clock::time_point last_used;
};

struct CacheStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;
  std::uint64_t inserts = 0;
};

/// LRU store of embedding handles for one session. Not thread-safe: the
/// owning session serialises access.
///
/// A prompt hits an entry when the entry's region fully contains the
/// prompt's points and box; partial overlap is a miss because decoding is
/// only meaningful inside the encoded region. Every mutating call returns the
/// entries it dropped so the caller can release their worker-side handles.
class EmbeddingCache {
 public:
  struct Limits {
    std::size_t max_entries_per_model = 4;
    /// 0 disables the byte budget.
    std::uint64_t max_bytes = 0;
  };

  EmbeddingCache() = default;
  explicit EmbeddingCache(Limits limits) : limits_(limits) {}

  /// Most recently used entry for (image, prompt.slice, model) whose region
  /// contains the prompt extent. Refreshes recency on a hit.
  std::optional<EmbeddingEntry> lookup(const Prompt& prompt, const std::string& image_id,
                                       const std::string& model_id);

  /// Inserts as most recently used (replacing an entry with the same key)
  /// and evicts until both limits hold. The new entry itself is evicted if
  /// it alone exceeds the byte budget.
  std::vector<EmbeddingEntry> insert(EmbeddingEntry entry);

  /// Evicts least recently used entries until total_bytes() <= budget.
  std::vector<EmbeddingEntry> evict_lru(std::uint64_t budget_bytes);
  std::vector<EmbeddingEntry> invalidate_model(const std::string& model_id);
  std::vector<EmbeddingEntry> invalidate_image(const std::string& image_id);
  std::vector<EmbeddingEntry> clear();

  std::size_t size() const noexcept { return entries_.size(); }
  std::uint64_t total_bytes() const noexcept { return bytes_; }
  const CacheStats& stats() const noexcept { return stats_; }
  const Limits& limits() const noexcept { return limits_; }
  /// Entries, most recently used first.
  std::vector<EmbeddingEntry> entries() const { return {entries_.begin(), entries_.end()}; }

 private:
  template <typename Pred>
  std::vector<EmbeddingEntry> remove_if(Pred pred);

  Limits limits_;
  std::list<EmbeddingEntry> entries_;  // MRU first
  std::uint64_t bytes_ = 0;
  CacheStats stats_;
};

}  // namespace promptseg
