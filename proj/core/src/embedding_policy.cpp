// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/embedding_policy.hpp"

#include <algorithm>
#include <cmath>

#include "promptseg/config.hpp"
#include "promptseg/error.hpp"

namespace promptseg {

namespace {

// Snaps values within 1e-6 of an integer before rounding, so that e.g.
// 300 * (10 / 3) lands on 1000 rather than 1001.
double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-6 ? r : v;
}

// Interval of length `scaled` centred on the box centre, widened outward to
// whole pixels.
std::pair<int, int> centred_span(int start, int length, double scaled) {
  const double centre = start + length / 2.0;
  const double half = snap(scaled) / 2.0;
  const int lo = static_cast<int>(std::floor(snap(centre - half)));
  const int hi = static_cast<int>(std::ceil(snap(centre + half)));
  return {lo, hi - lo};
}

}  // namespace

void EmbeddingPolicy::validate() const {
  if (small_image_threshold < 1 || !(box_scale_regular > 0) ||
      !(box_scale_long_side > 0) || !(point_viewport_margin >= 0) ||
      !(aspect_cutoff > 1)) {
    throw Error(ErrorCode::InvalidArgument, "invalid embedding policy constants");
  }
  if (model_input_size != 1024) {
    throw Error(ErrorCode::InvalidArgument, "model input size is fixed at 1024");
  }
}

EmbeddingPolicy EmbeddingPolicy::from_config(const Config& cfg) {
  EmbeddingPolicy p;
  p.small_image_threshold =
      static_cast<int>(cfg.get_int("embedding.small_threshold", p.small_image_threshold));
  p.box_scale_regular = cfg.get_double("embedding.box_scale", p.box_scale_regular);
  p.box_scale_long_side = cfg.get_double("embedding.long_side_scale", p.box_scale_long_side);
  p.aspect_cutoff = cfg.get_double("embedding.aspect_cutoff", p.aspect_cutoff);
  p.point_viewport_margin = cfg.get_double("embedding.point_margin", p.point_viewport_margin);
  p.validate();
  return p;
}

Region embedding_region(int width, int height, const Prompt& prompt,
                        const EmbeddingPolicy& policy) {
  if (prompt.kind == PromptKind::BatchSeeds) {
    throw Error(ErrorCode::InvalidArgument,
                "batch prompts are resolved per seed; pass a single-seed prompt");
  }
  validate_prompt(prompt, width, height);
  const Region whole{0, 0, width, height};

  if (width <= policy.small_image_threshold && height <= policy.small_image_threshold) {
    return whole;
  }

  if (prompt.kind == PromptKind::Box) {
    const Region& b = *prompt.box;
    const int long_side = std::max(b.w, b.h);
    const int short_side = std::min(b.w, b.h);
    double sw = b.w * policy.box_scale_regular;
    double sh = b.h * policy.box_scale_regular;
    if (static_cast<double>(long_side) > policy.aspect_cutoff * short_side) {
      if (b.w >= b.h) {
        sw = b.w * policy.box_scale_long_side;
      } else {
        sh = b.h * policy.box_scale_long_side;
      }
    }
    auto [x0, w] = centred_span(b.x0, b.w, std::max(sw, static_cast<double>(b.w)));
    auto [y0, h] = centred_span(b.y0, b.h, std::max(sh, static_cast<double>(b.h)));
    return clip_region(Region{x0, y0, w, h}, width, height);
  }

  // Point prompts: the viewport plus a margin, grown to cover every point.
  Region view = prompt.viewport;
  if (view.empty()) view = whole;
  const int mx = static_cast<int>(std::lround(view.w * policy.point_viewport_margin));
  const int my = static_cast<int>(std::lround(view.h * policy.point_viewport_margin));
  Region grown{view.x0 - mx, view.y0 - my, view.w + 2 * mx, view.h + 2 * my};
  grown = bounding_union(grown, prompt_extent(prompt));
  return clip_region(grown, width, height);
}

ScalePair region_to_model_frame(const Region& r, const EmbeddingPolicy& policy) {
  if (r.w < 1 || r.h < 1) throw Error(ErrorCode::InvalidArgument, "degenerate region");
  return ScalePair{static_cast<double>(policy.model_input_size) / r.w,
                   static_cast<double>(policy.model_input_size) / r.h};
}

}  // namespace promptseg
