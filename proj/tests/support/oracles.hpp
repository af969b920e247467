// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

// Reference implementations used only by tests. They are deliberately
// written differently from the library code they check.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "promptseg/image.hpp"
#include "promptseg/types.hpp"

namespace promptseg::testing {

/// Breadth-first 4-connected labeling; labels follow the raster order of
/// each component's first pixel.
LabelImage label_components(const Bitmask& mask);

/// Pixels of the largest component (ties: first in raster order).
Bitmask largest_component_oracle(const Bitmask& mask);

/// |A and B| / (|A| + |B| - |A and B|), computed pixel by pixel; 1 for two
/// empty masks.
double iou_oracle(const Bitmask& a, const Bitmask& b);

/// Even-odd point-in-polygon by ray casting, evaluated at every pixel center.
Bitmask rasterize_oracle(const Polygon& poly, const Region& frame);

/// Bit-at-a-time CRC-32 (reflected polynomial 0xEDB88320).
std::uint32_t crc32_oracle(const std::uint8_t* data, std::size_t n);

/// Bernoulli(p) mask.
Bitmask random_mask(std::mt19937& rng, int w, int h, double p);

/// Synthetic scene of K non-overlapping bright discs on a darker background.
struct DiscScene {
  ImageRef image;
  Bitmask truth;
  /// One center seed per disc, ordered by the raster position of each
  /// disc's first pixel.
  std::vector<Seed> seeds;
};
DiscScene make_disc_scene(std::mt19937& rng, int w, int h, int k, int min_r = 8, int max_r = 24);

/// Filled disc of radius r centered on pixel (cx, cy).
Bitmask disc_mask(int w, int h, int cx, int cy, int r);

/// Shared-memory segments of this library currently present.
std::vector<std::string> live_segments();

}  // namespace promptseg::testing
