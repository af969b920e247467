// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "promptseg/types.hpp"

namespace promptseg {

/// The 4-connected foreground component containing (x, y); empty mask if
/// (x, y) is background.
Bitmask component_at(const Bitmask& mask, int x, int y);

/// Largest 4-connected foreground component. Ties go to the component
/// whose first pixel comes first in row-major order.
Bitmask largest_component(const Bitmask& mask);

/// Outline of a single 4-connected component (pixels outside the component
/// count as background, 8-connected). Vertices are pixel corners offset by
/// (ox, oy); collinear vertices are dropped.
///
/// The walk starts at the top-left corner of the first pixel in row-major
/// order and heads +x, keeping the component on the right-hand side in
/// y-down coordinates; the shoelace area of the result is therefore
/// positive. Holes are stitched into the single outline through zero-width
/// vertical bridges, so even-odd filling reproduces the component exactly.
Polygon trace_component(const Bitmask& component, int ox, int oy);

/// Outline of the largest component of `m.mask`, in image coordinates.
/// Throws Error(EmptyMask) if no pixel is set.
Polygon mask_to_polygon(const MaskResult& m);

/// Even-odd fill sampled at pixel centers, over the pixels of `frame`.
Bitmask rasterize_polygon(const Polygon& poly, const Region& frame);

/// Signed shoelace area (positive for the tracer's orientation).
double polygon_area(const Polygon& poly) noexcept;

Region polygon_bounds(const Polygon& poly);

}  // namespace promptseg
