// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/embedding_cache.hpp"

#include <algorithm>

namespace promptseg {

std::optional<EmbeddingEntry> EmbeddingCache::lookup(const Prompt& prompt,
                                                     const std::string& image_id,
                                                     const std::string& model_id) {
  const Region extent = prompt_extent(prompt);
  for (auto it = entries_.begin(); it != entries_.end(); ++it) {
    const auto& k = it->key;
    if (k.image_id == image_id && k.model_id == model_id && k.slice_index == prompt.slice &&
        k.region.contains(extent)) {
      it->last_used = std::chrono::steady_clock::now();
      entries_.splice(entries_.begin(), entries_, it);
      ++stats_.hits;
      return entries_.front();
    }
  }
  ++stats_.misses;
  return std::nullopt;
}

std::vector<EmbeddingEntry> EmbeddingCache::insert(EmbeddingEntry entry) {
  std::vector<EmbeddingEntry> dropped =
      remove_if([&entry](const EmbeddingEntry& e) { return e.key == entry.key; });
  entry.last_used = std::chrono::steady_clock::now();
  bytes_ += entry.bytes;
  const std::string model = entry.key.model_id;
  entries_.push_front(std::move(entry));
  ++stats_.inserts;

  // Per-model entry limit: drop the oldest entries of this model.
  std::size_t seen = 0;
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (it->key.model_id == model && ++seen > limits_.max_entries_per_model) {
      bytes_ -= it->bytes;
      dropped.push_back(std::move(*it));
      it = entries_.erase(it);
      ++stats_.evictions;
    } else {
      ++it;
    }
  }
  if (limits_.max_bytes != 0) {
    auto more = evict_lru(limits_.max_bytes);
    dropped.insert(dropped.end(), std::make_move_iterator(more.begin()),
                   std::make_move_iterator(more.end()));
  }
  return dropped;
}

std::vector<EmbeddingEntry> EmbeddingCache::evict_lru(std::uint64_t budget_bytes) {
  std::vector<EmbeddingEntry> dropped;
  while (!entries_.empty() && bytes_ > budget_bytes) {
    bytes_ -= entries_.back().bytes;
    dropped.push_back(std::move(entries_.back()));
    entries_.pop_back();
    ++stats_.evictions;
  }
  return dropped;
}

template <typename Pred>
std::vector<EmbeddingEntry> EmbeddingCache::remove_if(Pred pred) {
  std::vector<EmbeddingEntry> dropped;
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (pred(*it)) {
      bytes_ -= it->bytes;
      dropped.push_back(std::move(*it));
      it = entries_.erase(it);
    } else {
      ++it;
    }
  }
  return dropped;
}

std::vector<EmbeddingEntry> EmbeddingCache::invalidate_model(const std::string& model_id) {
  return remove_if([&](const EmbeddingEntry& e) { return e.key.model_id == model_id; });
}

std::vector<EmbeddingEntry> EmbeddingCache::invalidate_image(const std::string& image_id) {
  return remove_if([&](const EmbeddingEntry& e) { return e.key.image_id == image_id; });
}

std::vector<EmbeddingEntry> EmbeddingCache::clear() {
  return remove_if([](const EmbeddingEntry&) { return true; });
}

}  // namespace promptseg
