// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/types.hpp"

#include <algorithm>
#include <string>

#include "promptseg/error.hpp"

namespace promptseg {

Region bounding_union(const Region& a, const Region& b) noexcept {
  const int x0 = std::min(a.x0, b.x0);
  const int y0 = std::min(a.y0, b.y0);
  return Region{x0, y0, std::max(a.x1(), b.x1()) - x0,
                std::max(a.y1(), b.y1()) - y0};
}

Region clip_region(const Region& r, int width, int height) {
  if (r.w < 1 || r.h < 1) {
    throw Error(ErrorCode::InvalidArgument, "region must have w >= 1 and h >= 1");
  }
  const int x0 = std::max(r.x0, 0);
  const int y0 = std::max(r.y0, 0);
  const int x1 = std::min(r.x1(), width);
  const int y1 = std::min(r.y1(), height);
  if (x1 <= x0 || y1 <= y0) {
    throw Error(ErrorCode::NoOverlap, "region does not intersect the image");
  }
  return Region{x0, y0, x1 - x0, y1 - y0};
}

Prompt Prompt::point(int x, int y, const Region& viewport, int slice) {
  Prompt p;
  p.kind = PromptKind::Point;
  p.points = {PromptPoint{x, y, Polarity::Foreground}};
  p.viewport = viewport;
  p.slice = slice;
  return p;
}

Prompt Prompt::point_set(std::vector<PromptPoint> pts, const Region& viewport,
                         int slice) {
  Prompt p;
  p.kind = PromptKind::PointSet;
  p.points = std::move(pts);
  p.viewport = viewport;
  p.slice = slice;
  return p;
}

Prompt Prompt::box_prompt(const Region& box, const Region& viewport, int slice) {
  Prompt p;
  p.kind = PromptKind::Box;
  p.box = box;
  p.viewport = viewport;
  p.slice = slice;
  return p;
}

Prompt Prompt::batch(std::vector<Seed> seeds, const Region& viewport, int slice) {
  Prompt p;
  p.kind = PromptKind::BatchSeeds;
  p.seeds = std::move(seeds);
  p.viewport = viewport;
  p.slice = slice;
  return p;
}

Prompt Prompt::from_seed(const Seed& seed, const Region& viewport, int slice) {
  if (seed.box) return box_prompt(*seed.box, viewport, slice);
  if (seed.point) return point(seed.point->x, seed.point->y, viewport, slice);
  throw Error(ErrorCode::InvalidArgument, "seed has neither point nor box");
}

namespace {

void check_point(const PromptPoint& pt, int width, int height) {
  if (pt.x < 0 || pt.y < 0 || pt.x >= width || pt.y >= height) {
    throw Error(ErrorCode::InvalidArgument,
                "point (" + std::to_string(pt.x) + "," + std::to_string(pt.y) +
                    ") outside image");
  }
}

void check_box(const Region& b, int width, int height) {
  if (b.w < 1 || b.h < 1 || b.x0 < 0 || b.y0 < 0 || b.x1() > width ||
      b.y1() > height) {
    throw Error(ErrorCode::InvalidArgument, "box outside image or degenerate");
  }
}

}  // namespace

void validate_prompt(const Prompt& p, int width, int height) {
  switch (p.kind) {
    case PromptKind::Point:
      if (p.points.size() != 1 || p.box || !p.seeds.empty()) {
        throw Error(ErrorCode::InvalidArgument, "point prompt needs exactly one point");
      }
      break;
    case PromptKind::PointSet:
      if (p.points.empty() || p.box || !p.seeds.empty()) {
        throw Error(ErrorCode::InvalidArgument, "point-set prompt needs points only");
      }
      break;
    case PromptKind::Box:
      if (!p.box || !p.points.empty() || !p.seeds.empty()) {
        throw Error(ErrorCode::InvalidArgument, "box prompt needs a box and no points");
      }
      check_box(*p.box, width, height);
      break;
    case PromptKind::BatchSeeds:
      if (p.seeds.empty() || p.box || !p.points.empty()) {
        throw Error(ErrorCode::InvalidArgument, "batch prompt needs at least one seed");
      }
      for (const auto& s : p.seeds) {
        if (s.point.has_value() == s.box.has_value()) {
          throw Error(ErrorCode::InvalidArgument, "seed must be a point or a box");
        }
        if (s.point) check_point(*s.point, width, height);
        if (s.box) check_box(*s.box, width, height);
      }
      break;
  }
  for (const auto& pt : p.points) check_point(pt, width, height);
  if (p.slice < 0) throw Error(ErrorCode::InvalidArgument, "negative slice index");
}

Region prompt_extent(const Prompt& p) {
  std::optional<Region> out;
  auto add = [&out](const Region& r) { out = out ? bounding_union(*out, r) : r; };
  for (const auto& pt : p.points) add(Region{pt.x, pt.y, 1, 1});
  if (p.box) add(*p.box);
  for (const auto& s : p.seeds) {
    if (s.point) add(Region{s.point->x, s.point->y, 1, 1});
    if (s.box) add(*s.box);
  }
  if (!out) throw Error(ErrorCode::InvalidArgument, "prompt has no extent");
  return *out;
}

Bitmask::Bitmask(int width, int height)
    : width_(width), height_(height),
      bits_(static_cast<std::size_t>(width) * height, 0) {
  if (width < 0 || height < 0) {
    throw Error(ErrorCode::InvalidArgument, "negative bitmask dimensions");
  }
}

Bitmask::Bitmask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  if (width < 0 || height < 0 ||
      bits_.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::InvalidArgument, "bitmask size mismatch");
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::int64_t Bitmask::count() const noexcept {
  return std::count(bits_.begin(), bits_.end(), std::uint8_t{1});
}

bool Bitmask::any() const noexcept {
  return std::find(bits_.begin(), bits_.end(), std::uint8_t{1}) != bits_.end();
}

MaskResult::MaskResult(const Region& r, Bitmask m, double s, Prompt prompt)
    : region(r), mask(std::move(m)), score(s), prompt_echo(std::move(prompt)) {
  if (mask.width() != region.w || mask.height() != region.h) {
    throw Error(ErrorCode::InvalidArgument, "mask dimensions differ from region");
  }
  if (!(score >= 0.0 && score <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "mask score outside [0, 1]");
  }
}

std::uint32_t LabelImage::max_label() const noexcept {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
}

}  // namespace promptseg
