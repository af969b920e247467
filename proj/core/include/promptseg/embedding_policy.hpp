// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>

#include "promptseg/image.hpp"
#include "promptseg/types.hpp"

namespace promptseg {

class Config;

/// Constants that decide which part of an image is sent to the encoder.
struct EmbeddingPolicy {
  /// Images with both sides <= this are always embedded whole.
  int small_image_threshold = 512;
  /// Per-side scale for boxes whose aspect ratio is <= aspect_cutoff.
  double box_scale_regular = 10.0;
  /// Scale of the longer side of elongated boxes (the shorter keeps box_scale_regular).
  double box_scale_long_side = 10.0 / 3.0;
  double aspect_cutoff = 3.0;
  /// Margin added on each side of the viewport for point prompts, as a
  /// fraction of the viewport size.
  double point_viewport_margin = 0.25;
  /// Side of the square model input; fixed.
  int model_input_size = 1024;

  /// Throws Error(InvalidArgument) on non-positive factors or cutoff <= 1.
  void validate() const;

  /// Defaults overridden by the embedding.* keys of `cfg`.
  static EmbeddingPolicy from_config(const Config& cfg);
};

/// The region of `img` to encode for `prompt`. BatchSeeds prompts are
/// resolved seed by seed by the caller; passing one here is an error.
Region embedding_region(int width, int height, const Prompt& prompt,
                        const EmbeddingPolicy& policy = {});
inline Region embedding_region(const Image& img, const Prompt& prompt,
                               const EmbeddingPolicy& policy = {}) {
  return embedding_region(img.width(), img.height(), prompt, policy);
}

struct ScalePair {
  double sx = 1.0;
  double sy = 1.0;
  friend bool operator==(const ScalePair&, const ScalePair&) = default;
};

/// Factors mapping region-local pixels onto the model's square input.
ScalePair region_to_model_frame(const Region& r, const EmbeddingPolicy& policy = {});

}  // namespace promptseg
