// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/session/rle.hpp"

#include <algorithm>

#include "promptseg/error.hpp"

namespace promptseg {

Rle rle_encode(const Bitmask& mask) {
  Rle out{mask.width(), mask.height(), {}};
  std::uint8_t current = 0;
  std::uint64_t run = 0;
  for (std::uint8_t b : mask.bits()) {
    const std::uint8_t v = b != 0;
    if (v != current) {
      out.counts.push_back(run);
      run = 0;
      current = v;
    }
    ++run;
  }
  out.counts.push_back(run);
  return out;
}

Bitmask rle_decode(const Rle& rle) {
  if (rle.width < 0 || rle.height < 0) throw Error(ErrorCode::InvalidArgument, "negative size");
  const std::uint64_t total = static_cast<std::uint64_t>(rle.width) * rle.height;
  std::vector<std::uint8_t> bits;
  bits.reserve(total);
  std::uint8_t v = 0;
  for (std::uint64_t c : rle.counts) {
    if (c > total - bits.size()) {
      throw Error(ErrorCode::InvalidArgument, "RLE runs exceed the frame");
    }
    bits.insert(bits.end(), c, v);
    v ^= 1;
  }
  if (bits.size() != total) throw Error(ErrorCode::InvalidArgument, "RLE runs do not fill the frame");
  return Bitmask(rle.width, rle.height, std::move(bits));
}

Bitmask to_image_frame(const MaskResult& m, int width, int height) {
  Bitmask out(width, height);
  const Region& r = m.region;
  const int ys = std::max(0, r.y0), ye = std::min(height, r.y1());
  const int xs = std::max(0, r.x0), xe = std::min(width, r.x1());
  for (int y = ys; y < ye; ++y) {
    for (int x = xs; x < xe; ++x) {
      if (m.mask.at(x - r.x0, y - r.y0)) out.set(x, y);
    }
  }
  return out;
}

}  // namespace promptseg
