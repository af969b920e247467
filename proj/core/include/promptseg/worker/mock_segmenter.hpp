// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "promptseg/image.hpp"
#include "promptseg/protocol/message.hpp"
#include "promptseg/types.hpp"

namespace promptseg::worker {

/// Per-pixel intensity of a region (channel mean for multi-channel data).
struct IntensityPlane {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  float at(int x, int y) const noexcept {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

/// Interprets a payload shaped [h, w] or [h, w, c].
IntensityPlane plane_from_tensor(protocol::DType dtype, const std::vector<std::uint64_t>& shape,
                                 std::span<const std::uint8_t> payload);
IntensityPlane plane_from_image(const Image& image, const Region& region);

/// Prompt in region-local pixel coordinates.
struct LocalPrompt {
  std::vector<PromptPoint> points;
  std::optional<Region> box;
};

/// Deterministic threshold segmenter used in place of a real model.
///
/// T = (min + max) / 2 over the plane. The mask is the union of the
/// 4-connected components of {p >= T} that contain a foreground point, or
/// the box center (x0 + w/2, y0 + h/2) for a box. Score is always 1.
/// Throws Error(EmptyMask) if no seed lies on a pixel >= T.
Bitmask mock_segment(const IntensityPlane& plane, const LocalPrompt& prompt);

/// Same rule applied to `region` of `image` with a prompt in image
/// coordinates.
MaskResult mock_segment(const Image& image, const Region& region, const Prompt& prompt);

/// Maps a model-frame prompt back to region-local pixels; inverse of the
/// scaling the core applies before Decode.
LocalPrompt local_prompt(const protocol::ModelPrompt& prompt, const ScalePair& scale);

}  // namespace promptseg::worker
