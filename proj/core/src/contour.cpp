// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/contour.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "promptseg/error.hpp"

namespace promptseg {

namespace {

// Scanline flood fill over 4-neighbours; writes `label` into `labels` for
// every pixel reached and returns the pixel count.
std::int64_t flood(const Bitmask& mask, std::vector<std::uint32_t>& labels, int sx,
                   int sy, std::uint32_t label) {
  const int w = mask.width();
  const int h = mask.height();
  auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
  std::vector<std::pair<int, int>> stack{{sx, sy}};
  std::int64_t count = 0;
  while (!stack.empty()) {
    auto [x, y] = stack.back();
    stack.pop_back();
    if (labels[idx(x, y)] != 0 || !mask.at(x, y)) continue;
    int l = x;
    while (l > 0 && mask.at(l - 1, y) && labels[idx(l - 1, y)] == 0) --l;
    int r = x;
    while (r + 1 < w && mask.at(r + 1, y) && labels[idx(r + 1, y)] == 0) ++r;
    for (int i = l; i <= r; ++i) labels[idx(i, y)] = label;
    count += r - l + 1;
    for (int ny : {y - 1, y + 1}) {
      if (ny < 0 || ny >= h) continue;
      bool prev = false;
      for (int i = l; i <= r; ++i) {
        const bool open = mask.at(i, ny) && labels[idx(i, ny)] == 0;
        if (open && !prev) stack.emplace_back(i, ny);
        prev = open;
      }
    }
  }
  return count;
}

Bitmask select_label(const std::vector<std::uint32_t>& labels, int w, int h,
                     std::uint32_t label) {
  Bitmask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (labels[static_cast<std::size_t>(y) * w + x] == label) out.set(x, y);
    }
  }
  return out;
}

enum Dir : std::uint8_t { kEast = 0, kSouth = 1, kWest = 2, kNorth = 3 };
constexpr std::array<int, 4> kDx{1, 0, -1, 0};
constexpr std::array<int, 4> kDy{0, 1, 0, -1};

// Directed crack edges around a component, component on the right-hand side.
class EdgeSet {
 public:
  explicit EdgeSet(const Bitmask& c)
      : vw_(c.width() + 1), out_(static_cast<std::size_t>(vw_) * (c.height() + 1), 0) {
    auto fg = [&c](int x, int y) {
      return x >= 0 && y >= 0 && x < c.width() && y < c.height() && c.at(x, y);
    };
    for (int y = 0; y < c.height(); ++y) {
      for (int x = 0; x < c.width(); ++x) {
        if (!c.at(x, y)) continue;
        if (!fg(x, y - 1)) add(x, y, kEast);
        if (!fg(x + 1, y)) add(x + 1, y, kSouth);
        if (!fg(x, y + 1)) add(x + 1, y + 1, kWest);
        if (!fg(x - 1, y)) add(x, y + 1, kNorth);
      }
    }
  }

  bool take(int x, int y, Dir d) {
    auto& bits = out_[index(x, y)];
    const std::uint8_t bit = static_cast<std::uint8_t>(1u << d);
    if (!(bits & bit)) return false;
    bits = static_cast<std::uint8_t>(bits & ~bit);
    --remaining_;
    return true;
  }

  bool has(int x, int y, Dir d) const {
    return (out_[index(x, y)] >> d) & 1u;
  }

  std::int64_t remaining() const noexcept { return remaining_; }

  // First vertex (row-major) with an unused outgoing edge.
  bool next_start(int& x, int& y, Dir& d) const {
    for (std::size_t i = 0; i < out_.size(); ++i) {
      if (out_[i] == 0) continue;
      x = static_cast<int>(i % vw_);
      y = static_cast<int>(i / vw_);
      for (std::uint8_t k = 0; k < 4; ++k) {
        if ((out_[i] >> k) & 1u) {
          d = static_cast<Dir>(k);
          return true;
        }
      }
    }
    return false;
  }

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * vw_ + x;
  }
  void add(int x, int y, Dir d) {
    out_[index(x, y)] |= static_cast<std::uint8_t>(1u << d);
    ++remaining_;
  }

  int vw_;
  std::vector<std::uint8_t> out_;
  std::int64_t remaining_ = 0;
};

// Follows one closed loop of edges. At a diagonal pinch the right turn is
// taken, which keeps diagonal-only neighbours apart (4-connected foreground).
std::vector<Vertex> walk_loop(EdgeSet& edges, int sx, int sy, Dir sd) {
  std::vector<Vertex> loop;
  int x = sx, y = sy;
  Dir d = sd;
  edges.take(x, y, d);
  for (;;) {
    loop.push_back({x, y});
    x += kDx[d];
    y += kDy[d];
    if (x == sx && y == sy && !edges.has(x, y, static_cast<Dir>((d + 1) % 4)) &&
        !edges.has(x, y, d) && !edges.has(x, y, static_cast<Dir>((d + 3) % 4))) {
      break;
    }
    bool moved = false;
    for (int turn : {1, 0, 3}) {
      const Dir nd = static_cast<Dir>((d + turn) % 4);
      if (edges.take(x, y, nd)) {
        d = nd;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return loop;
}

int sign(int v) { return (v > 0) - (v < 0); }

Polygon drop_collinear(const std::vector<Vertex>& pts) {
  const std::size_t n = pts.size();
  if (n < 4) return pts;
  Polygon out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vertex& a = pts[(i + n - 1) % n];
    const Vertex& b = pts[i];
    const Vertex& c = pts[(i + 1) % n];
    const bool same = sign(b.x - a.x) == sign(c.x - b.x) &&
                      sign(b.y - a.y) == sign(c.y - b.y);
    if (!same) out.push_back(b);
  }
  return out;
}

}  // namespace

Bitmask component_at(const Bitmask& mask, int x, int y) {
  if (x < 0 || y < 0 || x >= mask.width() || y >= mask.height() || !mask.at(x, y)) {
    return Bitmask(mask.width(), mask.height());
  }
  std::vector<std::uint32_t> labels(mask.bits().size(), 0);
  flood(mask, labels, x, y, 1);
  return select_label(labels, mask.width(), mask.height(), 1);
}

Bitmask largest_component(const Bitmask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<std::uint32_t> labels(mask.bits().size(), 0);
  std::uint32_t next = 1, best = 0;
  std::int64_t best_count = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y) || labels[static_cast<std::size_t>(y) * w + x] != 0) continue;
      const std::int64_t n = flood(mask, labels, x, y, next);
      if (n > best_count) {
        best_count = n;
        best = next;
      }
      ++next;
    }
  }
  if (best == 0) return Bitmask(w, h);
  return select_label(labels, w, h, best);
}

Polygon trace_component(const Bitmask& component, int ox, int oy) {
  EdgeSet edges(component);
  int sx, sy;
  Dir sd;
  if (!edges.next_start(sx, sy, sd)) {
    throw Error(ErrorCode::EmptyMask, "mask has no foreground pixels");
  }
  // The first row-major vertex with an edge is the top-left corner of the
  // first pixel, and its only outgoing edge heads east: the outer loop.
  std::vector<Vertex> merged = walk_loop(edges, sx, sy, sd);

  std::vector<std::vector<Vertex>> holes;
  while (edges.remaining() > 0 && edges.next_start(sx, sy, sd)) {
    auto loop = walk_loop(edges, sx, sy, sd);
    auto top_left = std::min_element(loop.begin(), loop.end(), [](auto& a, auto& b) {
      return a.y != b.y ? a.y < b.y : a.x < b.x;
    });
    std::rotate(loop.begin(), top_left, loop.end());
    holes.push_back(std::move(loop));
  }
  std::sort(holes.begin(), holes.end(), [](const auto& a, const auto& b) {
    return a.front().y != b.front().y ? a.front().y < b.front().y
                                      : a.front().x < b.front().x;
  });

  auto fg = [&component](int x, int y) {
    return x >= 0 && y >= 0 && x < component.width() && y < component.height() &&
           component.at(x, y);
  };
  for (const auto& hole : holes) {
    const Vertex v = hole.front();
    int y = v.y;
    while (y > 0 && fg(v.x - 1, y - 1) && fg(v.x, y - 1)) --y;
    const Vertex anchor{v.x, y};
    auto at = std::find(merged.begin(), merged.end(), anchor);
    if (at == merged.end()) {
      throw Error(ErrorCode::InvalidArgument, "contour bridge anchor not found");
    }
    // ..., anchor, hole..., hole.front(), anchor, ...
    std::vector<Vertex> splice(hole.begin(), hole.end());
    splice.push_back(v);
    splice.push_back(anchor);
    merged.insert(at + 1, splice.begin(), splice.end());
  }

  Polygon poly = drop_collinear(merged);
  for (auto& p : poly) {
    p.x += ox;
    p.y += oy;
  }
  return poly;
}

Polygon mask_to_polygon(const MaskResult& m) {
  if (!m.mask.any()) throw Error(ErrorCode::EmptyMask, "mask has no foreground pixels");
  return trace_component(largest_component(m.mask), m.region.x0, m.region.y0);
}

Bitmask rasterize_polygon(const Polygon& poly, const Region& frame) {
  Bitmask out(std::max(frame.w, 0), std::max(frame.h, 0));
  const std::size_t n = poly.size();
  if (n < 3) return out;
  std::vector<double> xs;
  for (int row = 0; row < frame.h; ++row) {
    const double sy = frame.y0 + row + 0.5;
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Vertex& a = poly[i];
      const Vertex& b = poly[(i + 1) % n];
      if (a.y == b.y) continue;
      const bool crosses = (a.y <= sy && sy < b.y) || (b.y <= sy && sy < a.y);
      if (!crosses) continue;
      xs.push_back(a.x + (sy - a.y) * static_cast<double>(b.x - a.x) / (b.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      // Pixel px is inside when its center px + 0.5 lies in [xs[k], xs[k+1]).
      const int first = static_cast<int>(std::ceil(xs[k] - 0.5)) - frame.x0;
      const int last = static_cast<int>(std::ceil(xs[k + 1] - 0.5)) - frame.x0;
      for (int px = std::max(first, 0); px < std::min(last, frame.w); ++px) {
        out.set(px, row);
      }
    }
  }
  return out;
}

double polygon_area(const Polygon& poly) noexcept {
  const std::size_t n = poly.size();
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vertex& a = poly[i];
    const Vertex& b = poly[(i + 1) % n];
    twice += static_cast<double>(a.x) * b.y - static_cast<double>(b.x) * a.y;
  }
  return twice / 2.0;
}

Region polygon_bounds(const Polygon& poly) {
  if (poly.empty()) throw Error(ErrorCode::InvalidArgument, "empty polygon");
  int x0 = std::numeric_limits<int>::max(), y0 = x0;
  int x1 = std::numeric_limits<int>::min(), y1 = x1;
  for (const auto& v : poly) {
    x0 = std::min(x0, v.x);
    y0 = std::min(y0, v.y);
    x1 = std::max(x1, v.x);
    y1 = std::max(y1, v.y);
  }
  return Region{x0, y0, x1 - x0, y1 - y0};
}

}  // namespace promptseg
