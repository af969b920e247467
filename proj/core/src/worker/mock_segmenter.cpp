// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/worker/mock_segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "promptseg/error.hpp"

namespace promptseg::worker {

namespace {

float read_sample(protocol::DType dtype, const std::uint8_t* p) {
  switch (dtype) {
    case protocol::DType::U8: return static_cast<float>(*p);
    case protocol::DType::U16: {
      std::uint16_t v;
      std::memcpy(&v, p, sizeof v);
      return static_cast<float>(v);
    }
    case protocol::DType::F32: {
      float v;
      std::memcpy(&v, p, sizeof v);
      return v;
    }
  }
  return 0.0f;
}

// Scanline fill of the 4-connected {p >= t} component through (sx, sy).
void fill_from(const IntensityPlane& plane, float t, int sx, int sy, Bitmask& out) {
  std::vector<std::pair<int, int>> stack{{sx, sy}};
  const auto on = [&](int x, int y) { return plane.at(x, y) >= t && !out.at(x, y); };
  while (!stack.empty()) {
    auto [x, y] = stack.back();
    stack.pop_back();
    if (!on(x, y)) continue;
    int l = x;
    while (l > 0 && on(l - 1, y)) --l;
    int r = x;
    while (r + 1 < plane.width && on(r + 1, y)) ++r;
    for (int i = l; i <= r; ++i) out.set(i, y);
    for (int ny : {y - 1, y + 1}) {
      if (ny < 0 || ny >= plane.height) continue;
      for (int i = l; i <= r; ++i) {
        if (on(i, ny) && (i == l || !on(i - 1, ny))) stack.emplace_back(i, ny);
      }
    }
  }
}

}  // namespace

IntensityPlane plane_from_tensor(protocol::DType dtype, const std::vector<std::uint64_t>& shape,
                                 std::span<const std::uint8_t> payload) {
  if (shape.size() != 2 && shape.size() != 3) {
    throw Error(ErrorCode::InvalidArgument, "expected a [h, w] or [h, w, c] tensor");
  }
  const std::uint64_t channels = shape.size() == 3 ? shape[2] : 1;
  const std::size_t sz = protocol::dtype_size(dtype);
  if (channels == 0 || shape[0] * shape[1] * channels * sz != payload.size()) {
    throw Error(ErrorCode::InvalidArgument, "tensor shape disagrees with payload size");
  }
  IntensityPlane plane;
  plane.height = static_cast<int>(shape[0]);
  plane.width = static_cast<int>(shape[1]);
  plane.values.resize(static_cast<std::size_t>(plane.width) * plane.height);
  const std::uint8_t* p = payload.data();
  for (float& v : plane.values) {
    float acc = 0;
    for (std::uint64_t c = 0; c < channels; ++c, p += sz) acc += read_sample(dtype, p);
    v = channels == 1 ? acc : acc / static_cast<float>(channels);
  }
  return plane;
}

IntensityPlane plane_from_image(const Image& image, const Region& region) {
  protocol::DType dt = protocol::DType::U8;
  if (image.depth() == BitDepth::U16) dt = protocol::DType::U16;
  if (image.depth() == BitDepth::F32) dt = protocol::DType::F32;
  std::vector<std::uint64_t> shape{static_cast<std::uint64_t>(region.h),
                                   static_cast<std::uint64_t>(region.w)};
  if (image.channels() > 1) shape.push_back(static_cast<std::uint64_t>(image.channels()));
  return plane_from_tensor(dt, shape, image.crop_bytes(region));
}

Bitmask mock_segment(const IntensityPlane& plane, const LocalPrompt& prompt) {
  if (plane.values.empty()) throw Error(ErrorCode::InvalidArgument, "empty region");
  const auto [lo, hi] = std::minmax_element(plane.values.begin(), plane.values.end());
  const float t = (*lo + *hi) / 2.0f;

  std::vector<std::pair<int, int>> seeds;
  for (const PromptPoint& p : prompt.points) {
    if (p.polarity == Polarity::Foreground) seeds.emplace_back(p.x, p.y);
  }
  if (prompt.box) {
    seeds.emplace_back(prompt.box->x0 + prompt.box->w / 2, prompt.box->y0 + prompt.box->h / 2);
  }

  Bitmask out(plane.width, plane.height);
  bool hit = false;
  for (auto [x, y] : seeds) {
    if (x < 0 || y < 0 || x >= plane.width || y >= plane.height) continue;
    if (plane.at(x, y) < t) continue;
    hit = true;
    fill_from(plane, t, x, y, out);
  }
  if (!hit) throw Error(ErrorCode::EmptyMask, "no prompt seed lies on the foreground");
  return out;
}

MaskResult mock_segment(const Image& image, const Region& region, const Prompt& prompt) {
  LocalPrompt local;
  for (PromptPoint p : prompt.points) {
    p.x -= region.x0;
    p.y -= region.y0;
    local.points.push_back(p);
  }
  if (prompt.box) {
    Region b = *prompt.box;
    b.x0 -= region.x0;
    b.y0 -= region.y0;
    local.box = b;
  }
  return MaskResult(region, mock_segment(plane_from_image(image, region), local), 1.0, prompt);
}

LocalPrompt local_prompt(const protocol::ModelPrompt& prompt, const ScalePair& scale) {
  const auto back = [](double m, double s) { return static_cast<int>(std::lround(m / s)); };
  LocalPrompt out;
  for (const protocol::ModelPoint& p : prompt.points) {
    out.points.push_back(PromptPoint{back(p.x, scale.sx), back(p.y, scale.sy),
                                     p.foreground ? Polarity::Foreground : Polarity::Background});
  }
  if (prompt.box) {
    const int x0 = back(prompt.box->x0, scale.sx);
    const int y0 = back(prompt.box->y0, scale.sy);
    out.box = Region{x0, y0, back(prompt.box->x1, scale.sx) - x0,
                     back(prompt.box->y1, scale.sy) - y0};
  }
  return out;
}

}  // namespace promptseg::worker
