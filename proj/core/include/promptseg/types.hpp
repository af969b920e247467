// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace promptseg {

/// Axis-aligned rectangle in image pixel coordinates. Origin top-left,
/// x rightward, y downward; (x0, y0) inclusive, (x0 + w, y0 + h) exclusive.
struct Region {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;

  int x1() const noexcept { return x0 + w; }
  int y1() const noexcept { return y0 + h; }
  std::int64_t area() const noexcept { return std::int64_t{w} * h; }
  bool empty() const noexcept { return w <= 0 || h <= 0; }

  bool contains(int x, int y) const noexcept {
    return x >= x0 && x < x1() && y >= y0 && y < y1();
  }
  bool contains(const Region& o) const noexcept {
    return o.x0 >= x0 && o.y0 >= y0 && o.x1() <= x1() && o.y1() <= y1();
  }
  bool intersects(const Region& o) const noexcept {
    return std::max(x0, o.x0) < std::min(x1(), o.x1()) &&
           std::max(y0, o.y0) < std::min(y1(), o.y1());
  }

  friend bool operator==(const Region&, const Region&) = default;
};

/// Smallest region covering both.
Region bounding_union(const Region& a, const Region& b) noexcept;

/// Intersection of `r` with the image rectangle [0, width) x [0, height).
/// Throws Error(NoOverlap) when the intersection is empty and
/// Error(InvalidArgument) when `r` is degenerate.
Region clip_region(const Region& r, int width, int height);

enum class Polarity : std::uint8_t { Foreground, Background };

struct PromptPoint {
  int x = 0;
  int y = 0;
  Polarity polarity = Polarity::Foreground;

  friend bool operator==(const PromptPoint&, const PromptPoint&) = default;
};

/// One batch seed: exactly one of point / box is set.
struct Seed {
  std::optional<PromptPoint> point;
  std::optional<Region> box;

  static Seed at(int x, int y) { return Seed{PromptPoint{x, y}, std::nullopt}; }
  static Seed boxed(const Region& r) { return Seed{std::nullopt, r}; }

  friend bool operator==(const Seed&, const Seed&) = default;
};

enum class PromptKind : std::uint8_t { Point, PointSet, Box, BatchSeeds };

struct Prompt {
  PromptKind kind = PromptKind::Point;
  std::vector<PromptPoint> points;
  std::optional<Region> box;
  std::vector<Seed> seeds;
  /// Area visible to the user when the prompt was made.
  Region viewport;
  /// z or t plane within a stack, 0 for plain 2D images.
  int slice = 0;

  static Prompt point(int x, int y, const Region& viewport, int slice = 0);
  static Prompt point_set(std::vector<PromptPoint> pts, const Region& viewport,
                          int slice = 0);
  static Prompt box_prompt(const Region& box, const Region& viewport,
                           int slice = 0);
  static Prompt batch(std::vector<Seed> seeds, const Region& viewport,
                      int slice = 0);

  /// The single-object prompt equivalent to a batch seed.
  static Prompt from_seed(const Seed& seed, const Region& viewport,
                          int slice = 0);

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

/// Throws Error(InvalidArgument) unless the prompt satisfies its kind's
/// shape rules and every coordinate lies inside a width x height image.
void validate_prompt(const Prompt& p, int width, int height);

/// Bounding region of the prompt's points and box (not the viewport).
Region prompt_extent(const Prompt& p);

/// Row-major boolean raster, one byte per pixel (0 or 1).
class Bitmask {
 public:
  Bitmask() = default;
  Bitmask(int width, int height);
  Bitmask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool at(int x, int y) const noexcept {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int x, int y, bool v = true) noexcept {
    bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
  }
  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }
  std::int64_t count() const noexcept;
  bool any() const noexcept;

  friend bool operator==(const Bitmask&, const Bitmask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// A decoded mask in the coordinate frame of `region`.
struct MaskResult {
  Region region;
  Bitmask mask;
  double score = 0.0;
  Prompt prompt_echo;

  MaskResult() = default;
  /// Throws Error(InvalidArgument) if the mask dimensions disagree with the
  /// region or the score is outside [0, 1].
  MaskResult(const Region& region, Bitmask mask, double score, Prompt prompt);

  bool at_image(int x, int y) const noexcept {
    return region.contains(x, y) && mask.at(x - region.x0, y - region.y0);
  }
};

struct Vertex {
  int x = 0;
  int y = 0;
  friend bool operator==(const Vertex&, const Vertex&) = default;
};

/// Closed polygon; the closing edge from back() to front() is implicit.
using Polygon = std::vector<Vertex>;

struct Annotation {
  std::uint64_t id = 0;
  std::string image_id;
  int slice_index = 0;
  Polygon polygon;
  MaskResult mask;
  std::chrono::system_clock::time_point created_at;
};

/// Integer instance raster: 0 background, k >= 1 instance k.
struct LabelImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> labels;

  LabelImage() = default;
  LabelImage(int w, int h)
      : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}

  std::uint32_t at(int x, int y) const noexcept {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  std::uint32_t& at(int x, int y) noexcept {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  std::uint32_t max_label() const noexcept;

  friend bool operator==(const LabelImage&, const LabelImage&) = default;
};

}  // namespace promptseg
