// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <map>
#include <random>

#include "promptseg/embedding_cache.hpp"
#include "promptseg/embedding_policy.hpp"
#include "promptseg/error.hpp"

namespace promptseg {
namespace {

Region box_region(int w, int h, const Region& box) {
  return embedding_region(w, h, Prompt::box_prompt(box, {0, 0, w, h}));
}

TEST(EmbeddingPolicy, SmallImageIsEmbeddedWhole) {
  EXPECT_EQ(box_region(500, 500, {10, 10, 100, 100}), (Region{0, 0, 500, 500}));
}

TEST(EmbeddingPolicy, RegularBoxScaledTenfold) {
  EXPECT_EQ(box_region(2000, 2000, {950, 950, 100, 100}), (Region{500, 500, 1000, 1000}));
}

TEST(EmbeddingPolicy, ElongatedBoxLongSideScaledByTenThirds) {
  // Centre (1000, 1000), 60 x 300.
  EXPECT_EQ(box_region(4000, 4000, {970, 850, 60, 300}), (Region{700, 500, 600, 1000}));
}

TEST(EmbeddingPolicy, RegionNearBorderIsClipped) {
  EXPECT_EQ(box_region(2000, 2000, {0, 0, 100, 100}), (Region{0, 0, 550, 550}));
}

TEST(EmbeddingPolicy, PointUsesViewportWithMargin) {
  const Prompt p = Prompt::point(1200, 1200, {1000, 1000, 512, 512});
  EXPECT_EQ(embedding_region(3000, 3000, p), (Region{872, 872, 768, 768}));
}

TEST(EmbeddingPolicy, BoundaryOf512IsSmall) {
  EXPECT_EQ(box_region(512, 512, {0, 0, 2, 2}), (Region{0, 0, 512, 512}));
  // Both sides must be within the threshold.
  EXPECT_NE(box_region(400, 900, {0, 0, 2, 2}), (Region{0, 0, 400, 900}));
}

TEST(EmbeddingPolicy, ModelFrameScale) {
  EXPECT_EQ(region_to_model_frame({0, 0, 1024, 1024}), (ScalePair{1.0, 1.0}));
  EXPECT_EQ(region_to_model_frame({0, 0, 512, 2048}), (ScalePair{2.0, 0.5}));
  const ScalePair s = region_to_model_frame({0, 0, 550, 550});
  EXPECT_NEAR(s.sx, 1.8618, 1e-4);
  EXPECT_NEAR(s.sy, 1.8618, 1e-4);
  EXPECT_DOUBLE_EQ(s.sx, 1024.0 / 550.0);
}

TEST(EmbeddingPolicy, ValidateRejectsBadFactors) {
  EmbeddingPolicy p;
  p.aspect_cutoff = 1.0;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.box_scale_regular = 0;
  EXPECT_THROW(p.validate(), Error);
  EXPECT_NO_THROW(EmbeddingPolicy{}.validate());
}

TEST(EmbeddingPolicy, BatchPromptIsRejected) {
  const Prompt p = Prompt::batch({Seed::at(1, 1)}, {0, 0, 10, 10});
  EXPECT_THROW(embedding_region(10, 10, p), Error);
}

Prompt random_prompt(std::mt19937& rng, int w, int h) {
  std::uniform_int_distribution<int> kind(0, 2);
  auto coord = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
  Region view{coord(w), coord(h), 0, 0};
  view.w = 1 + coord(w - view.x0);
  view.h = 1 + coord(h - view.y0);
  switch (kind(rng)) {
    case 0:
      return Prompt::point(coord(w), coord(h), view);
    case 1: {
      std::vector<PromptPoint> pts;
      const int n = 1 + coord(5);
      for (int i = 0; i < n; ++i) {
        pts.push_back({coord(w), coord(h), i % 2 ? Polarity::Background : Polarity::Foreground});
      }
      return Prompt::point_set(pts, view);
    }
    default: {
      Region b{coord(w), coord(h), 0, 0};
      b.w = 1 + coord(w - b.x0);
      b.h = 1 + coord(h - b.y0);
      return Prompt::box_prompt(b, view);
    }
  }
}

TEST(EmbeddingPolicyProperty, RegionContainsPromptExtent) {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> side(1, 5000);
  for (int i = 0; i < 10000; ++i) {
    const int w = side(rng), h = side(rng);
    const Prompt p = random_prompt(rng, w, h);
    const Region r = embedding_region(w, h, p);
    ASSERT_TRUE(r.contains(prompt_extent(p))) << "case " << i;
    ASSERT_TRUE((Region{0, 0, w, h}).contains(r));
    ASSERT_EQ(r, embedding_region(w, h, p));
  }
}

TEST(EmbeddingPolicyProperty, SmallImagesAlwaysWhole) {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> side(1, 512);
  for (int i = 0; i < 2000; ++i) {
    const int w = side(rng), h = side(rng);
    ASSERT_EQ(embedding_region(w, h, random_prompt(rng, w, h)), (Region{0, 0, w, h}));
  }
}

TEST(EmbeddingPolicyProperty, UnclippedAreaScalesWithBox) {
  std::mt19937 rng(13);
  std::uniform_int_distribution<int> half(1, 40);
  const int n = 100000;
  for (int i = 0; i < 2000; ++i) {
    // Even sides keep the scaled span on whole pixels.
    const int bw = 2 * half(rng), bh = 2 * half(rng);
    if (std::max(bw, bh) > 3 * std::min(bw, bh)) continue;
    const Region box{n / 2 - bw / 2, n / 2 - bh / 2, bw, bh};
    const Region r = box_region(n, n, box);
    ASSERT_EQ(r.area(), 100 * box.area()) << bw << "x" << bh;
  }
  for (int i = 0; i < 2000; ++i) {
    const int s = 2 * half(rng);
    const int l = 6 * std::uniform_int_distribution<int>(s / 2 + 1, 200)(rng);
    const bool wide = i % 2 == 0;
    const int bw = wide ? l : s, bh = wide ? s : l;
    const Region box{n / 2 - bw / 2, n / 2 - bh / 2, bw, bh};
    const Region r = box_region(n, n, box);
    ASSERT_EQ(3 * r.area(), 100 * box.area()) << bw << "x" << bh;
  }
}

TEST(EmbeddingPolicyProperty, OddBoxesStayWithinOnePixelPerSide) {
  std::mt19937 rng(17);
  std::uniform_int_distribution<int> side(1, 90);
  const int n = 100000;
  for (int i = 0; i < 2000; ++i) {
    const int bw = side(rng), bh = side(rng);
    const Region r = box_region(n, n, {n / 2, n / 2, bw, bh});
    const bool elongated = std::max(bw, bh) > 3 * std::min(bw, bh);
    const double ew = (elongated && bw > bh) ? bw * 10.0 / 3.0 : bw * 10.0;
    const double eh = (elongated && bh > bw) ? bh * 10.0 / 3.0 : bh * 10.0;
    ASSERT_GE(r.w, ew - 1e-6);
    ASSERT_LE(r.w, ew + 2);
    ASSERT_GE(r.h, eh - 1e-6);
    ASSERT_LE(r.h, eh + 2);
  }
}

EmbeddingEntry entry(const std::string& image, Region region, const std::string& handle,
                     std::uint64_t bytes = 10, const std::string& model = "m") {
  return EmbeddingEntry{{image, 0, region, model}, handle, bytes, {}};
}

TEST(EmbeddingCache, ContainedBoxHits) {
  EmbeddingCache c;
  c.insert(entry("i", {0, 0, 1000, 1000}, "h1"));
  const auto hit = c.lookup(Prompt::box_prompt({100, 100, 50, 50}, {}), "i", "m");
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->handle, "h1");
  EXPECT_EQ(c.stats().hits, 1u);
}

TEST(EmbeddingCache, PointOutsideMisses) {
  EmbeddingCache c;
  c.insert(entry("i", {0, 0, 1000, 1000}, "h1"));
  EXPECT_FALSE(c.lookup(Prompt::point(1500, 500, {}), "i", "m"));
  EXPECT_EQ(c.stats().misses, 1u);
}

TEST(EmbeddingCache, KeyFieldsMustMatch) {
  EmbeddingCache c;
  c.insert(entry("i", {0, 0, 100, 100}, "h1"));
  EXPECT_FALSE(c.lookup(Prompt::point(5, 5, {}), "other", "m"));
  EXPECT_FALSE(c.lookup(Prompt::point(5, 5, {}), "i", "other"));
  EXPECT_FALSE(c.lookup(Prompt::point(5, 5, {}, 1), "i", "m"));
  EXPECT_TRUE(c.lookup(Prompt::point(5, 5, {}), "i", "m"));
}

TEST(EmbeddingCache, MostRecentlyUsedWins) {
  for (int order = 0; order < 2; ++order) {
    EmbeddingCache c;
    const auto a = entry("i", {0, 0, 500, 500}, "a");
    const auto b = entry("i", {0, 0, 800, 800}, "b");
    if (order == 0) {
      c.insert(a);
      c.insert(b);
    } else {
      c.insert(b);
      c.insert(a);
    }
    const auto hit = c.lookup(Prompt::point(10, 10, {}), "i", "m");
    ASSERT_TRUE(hit);
    EXPECT_EQ(hit->handle, order == 0 ? "b" : "a");
  }
}

TEST(EmbeddingCache, LookupRefreshesRecency) {
  EmbeddingCache c(EmbeddingCache::Limits{2, 0});
  c.insert(entry("i", {0, 0, 10, 10}, "a"));
  c.insert(entry("i", {20, 20, 10, 10}, "b"));
  ASSERT_TRUE(c.lookup(Prompt::point(1, 1, {}), "i", "m"));
  const auto evicted = c.insert(entry("i", {40, 40, 10, 10}, "c"));
  ASSERT_EQ(evicted.size(), 1u);
  EXPECT_EQ(evicted[0].handle, "b");
}

TEST(EmbeddingCache, LruEvictionOrder) {
  EmbeddingCache c(EmbeddingCache::Limits{2, 0});
  EXPECT_TRUE(c.insert(entry("i", {0, 0, 10, 10}, "A")).empty());
  EXPECT_TRUE(c.insert(entry("i", {10, 0, 10, 10}, "B")).empty());
  const auto evicted = c.insert(entry("i", {20, 0, 10, 10}, "C"));
  ASSERT_EQ(evicted.size(), 1u);
  EXPECT_EQ(evicted[0].handle, "A");
  EXPECT_EQ(c.stats().evictions, 1u);
}

TEST(EmbeddingCache, EntryLimitIsPerModel) {
  EmbeddingCache c(EmbeddingCache::Limits{1, 0});
  c.insert(entry("i", {0, 0, 10, 10}, "a", 10, "m1"));
  EXPECT_TRUE(c.insert(entry("i", {0, 0, 10, 10}, "b", 10, "m2")).empty());
  EXPECT_EQ(c.size(), 2u);
}

TEST(EmbeddingCache, InvalidateModelRemovesAllItsEntries) {
  EmbeddingCache c;
  c.insert(entry("i", {0, 0, 10, 10}, "a", 10, "m"));
  c.insert(entry("j", {0, 0, 10, 10}, "b", 10, "m"));
  c.insert(entry("i", {0, 0, 10, 10}, "c", 10, "n"));
  const auto gone = c.invalidate_model("m");
  EXPECT_EQ(gone.size(), 2u);
  EXPECT_FALSE(c.lookup(Prompt::point(1, 1, {}), "i", "m"));
  EXPECT_FALSE(c.lookup(Prompt::point(1, 1, {}), "j", "m"));
  EXPECT_TRUE(c.lookup(Prompt::point(1, 1, {}), "i", "n"));
  EXPECT_EQ(c.total_bytes(), 10u);
}

TEST(EmbeddingCache, InvalidateImage) {
  EmbeddingCache c;
  c.insert(entry("i", {0, 0, 10, 10}, "a"));
  c.insert(entry("j", {0, 0, 10, 10}, "b"));
  EXPECT_EQ(c.invalidate_image("i").size(), 1u);
  EXPECT_EQ(c.size(), 1u);
}

TEST(EmbeddingCache, InsertThenLookupSameKeyRoundTrips) {
  EmbeddingCache c;
  c.insert(entry("i", {3, 4, 50, 60}, "handle-7"));
  const auto hit = c.lookup(Prompt::box_prompt({3, 4, 50, 60}, {}), "i", "m");
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->handle, "handle-7");
  EXPECT_EQ(hit->key.region, (Region{3, 4, 50, 60}));
}

TEST(EmbeddingCache, SameKeyReplacesEntry) {
  EmbeddingCache c;
  c.insert(entry("i", {0, 0, 10, 10}, "old", 10));
  const auto evicted = c.insert(entry("i", {0, 0, 10, 10}, "new", 30));
  ASSERT_EQ(evicted.size(), 1u);
  EXPECT_EQ(evicted[0].handle, "old");
  EXPECT_EQ(c.size(), 1u);
  EXPECT_EQ(c.total_bytes(), 30u);
}

TEST(EmbeddingCache, OversizedEntryIsEvictedImmediately) {
  EmbeddingCache c(EmbeddingCache::Limits{4, 100});
  const auto evicted = c.insert(entry("i", {0, 0, 10, 10}, "big", 500));
  ASSERT_EQ(evicted.size(), 1u);
  EXPECT_EQ(c.size(), 0u);
  EXPECT_EQ(c.total_bytes(), 0u);
}

TEST(EmbeddingCacheProperty, ByteBudgetHoldsAfterEveryMutation) {
  std::mt19937 rng(23);
  std::uniform_int_distribution<int> op(0, 9), pos(0, 20), sz(1, 60);
  std::uniform_int_distribution<std::uint64_t> bytes(1, 400);
  for (int run = 0; run < 50; ++run) {
    const std::uint64_t budget = 200 + run * 20;
    EmbeddingCache c(EmbeddingCache::Limits{3, budget});
    for (int step = 0; step < 300; ++step) {
      const int o = op(rng);
      const std::string model = "m" + std::to_string(o % 2);
      const std::string image = "i" + std::to_string(o % 3);
      if (o < 6) {
        const Region r{pos(rng), pos(rng), sz(rng), sz(rng)};
        c.insert(entry(image, r, "h" + std::to_string(step), bytes(rng), model)).size();
      } else if (o < 8) {
        c.lookup(Prompt::point(pos(rng), pos(rng), {}), image, model);
      } else if (o == 8) {
        c.evict_lru(budget / 2);
        ASSERT_LE(c.total_bytes(), budget / 2);
      } else {
        c.invalidate_model(model);
      }
      ASSERT_LE(c.total_bytes(), budget);
      std::uint64_t sum = 0;
      std::map<std::string, int> per_model;
      for (const auto& e : c.entries()) {
        sum += e.bytes;
        ++per_model[e.key.model_id];
      }
      ASSERT_EQ(sum, c.total_bytes());
      for (const auto& [m, count] : per_model) ASSERT_LE(count, 3);
    }
  }
}

}  // namespace
}  // namespace promptseg
