// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "promptseg/types.hpp"

namespace promptseg {

/// Row-major run lengths alternating background and foreground, starting
/// with a (possibly zero-length) background run. Runs sum to width * height.
struct Rle {
  int width = 0;
  int height = 0;
  std::vector<std::uint64_t> counts;
  friend bool operator==(const Rle&, const Rle&) = default;
};

Rle rle_encode(const Bitmask& mask);
/// Throws Error(InvalidArgument) if the runs do not cover the frame exactly.
Bitmask rle_decode(const Rle& rle);

/// The mask of `m` pasted into a width x height frame (pixels outside the
/// frame are dropped).
Bitmask to_image_frame(const MaskResult& m, int width, int height);

}  // namespace promptseg
