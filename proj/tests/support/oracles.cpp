// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"

#include <algorithm>
#include <deque>

#include "promptseg/protocol/shm.hpp"

namespace promptseg::testing {

LabelImage label_components(const Bitmask& mask) {
  LabelImage out(mask.width(), mask.height());
  std::uint32_t next = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y) || out.at(x, y) != 0) continue;
      ++next;
      std::deque<std::pair<int, int>> q{{x, y}};
      out.at(x, y) = next;
      while (!q.empty()) {
        const auto [cx, cy] = q.front();
        q.pop_front();
        const int nb[4][2] = {{cx + 1, cy}, {cx - 1, cy}, {cx, cy + 1}, {cx, cy - 1}};
        for (const auto& n : nb) {
          if (n[0] < 0 || n[1] < 0 || n[0] >= mask.width() || n[1] >= mask.height()) continue;
          if (!mask.at(n[0], n[1]) || out.at(n[0], n[1]) != 0) continue;
          out.at(n[0], n[1]) = next;
          q.emplace_back(n[0], n[1]);
        }
      }
    }
  }
  return out;
}

Bitmask largest_component_oracle(const Bitmask& mask) {
  const LabelImage labels = label_components(mask);
  std::vector<std::int64_t> sizes(labels.max_label() + 1, 0);
  for (std::uint32_t l : labels.labels) ++sizes[l];
  std::uint32_t best = 0;
  for (std::uint32_t l = 1; l < sizes.size(); ++l) {
    if (best == 0 || sizes[l] > sizes[best]) best = l;
  }
  Bitmask out(mask.width(), mask.height());
  if (best == 0) return out;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) out.set(x, y, labels.at(x, y) == best);
  }
  return out;
}

double iou_oracle(const Bitmask& a, const Bitmask& b) {
  std::int64_t na = 0, nb = 0, both = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      na += a.at(x, y);
      nb += b.at(x, y);
      both += a.at(x, y) && b.at(x, y);
    }
  }
  const std::int64_t uni = na + nb - both;
  return uni == 0 ? 1.0 : static_cast<double>(both) / static_cast<double>(uni);
}

Bitmask rasterize_oracle(const Polygon& poly, const Region& frame) {
  Bitmask out(frame.w, frame.h);
  const std::size_t n = poly.size();
  for (int y = 0; y < frame.h; ++y) {
    for (int x = 0; x < frame.w; ++x) {
      const double px = frame.x0 + x + 0.5, py = frame.y0 + y + 0.5;
      bool inside = false;
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double xi = poly[i].x, yi = poly[i].y, xj = poly[j].x, yj = poly[j].y;
        if ((yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi) inside = !inside;
      }
      out.set(x, y, inside);
    }
  }
  return out;
}

std::uint32_t crc32_oracle(const std::uint8_t* data, std::size_t n) {
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i) {
    c ^= data[i];
    for (int k = 0; k < 8; ++k) c = (c & 1u) ? (c >> 1) ^ 0xEDB88320u : c >> 1;
  }
  return ~c;
}

Bitmask random_mask(std::mt19937& rng, int w, int h, double p) {
  std::bernoulli_distribution coin(p);
  Bitmask m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m.set(x, y, coin(rng));
  }
  return m;
}

Bitmask disc_mask(int w, int h, int cx, int cy, int r) {
  Bitmask m(w, h);
  for (int y = std::max(0, cy - r); y <= std::min(h - 1, cy + r); ++y) {
    for (int x = std::max(0, cx - r); x <= std::min(w - 1, cx + r); ++x) {
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) m.set(x, y);
    }
  }
  return m;
}

DiscScene make_disc_scene(std::mt19937& rng, int w, int h, int k, int min_r, int max_r) {
  struct Disc {
    int cx, cy, r;
  };
  std::vector<Disc> discs;
  std::uniform_int_distribution<int> rad(min_r, max_r);
  for (int attempt = 0; static_cast<int>(discs.size()) < k && attempt < 100000; ++attempt) {
    const int r = rad(rng);
    std::uniform_int_distribution<int> ux(r + 1, w - r - 2), uy(r + 1, h - r - 2);
    const Disc d{ux(rng), uy(rng), r};
    // Keep a gap of at least two pixels so discs never touch.
    const bool clear = std::all_of(discs.begin(), discs.end(), [&](const Disc& o) {
      const int dx = o.cx - d.cx, dy = o.cy - d.cy, gap = o.r + d.r + 3;
      return dx * dx + dy * dy > gap * gap;
    });
    if (clear) discs.push_back(d);
  }
  // Raster order of the first pixel is the topmost row, then leftmost
  // column; for discs that is (cy - r, cx).
  std::sort(discs.begin(), discs.end(), [](const Disc& a, const Disc& b) {
    return std::make_pair(a.cy - a.r, a.cx) < std::make_pair(b.cy - b.r, b.cx);
  });
  DiscScene scene;
  scene.truth = Bitmask(w, h);
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h, 40);
  for (const Disc& d : discs) {
    const Bitmask m = disc_mask(w, h, d.cx, d.cy, d.r);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (m.at(x, y)) {
          scene.truth.set(x, y);
          px[static_cast<std::size_t>(y) * w + x] = 220;
        }
      }
    }
    scene.seeds.push_back(Seed::at(d.cx, d.cy));
  }
  scene.image = make_gray8("discs", w, h, std::move(px));
  return scene;
}

std::vector<std::string> live_segments() { return protocol::list_segments(protocol::kSegmentPrefix); }

}  // namespace promptseg::testing
