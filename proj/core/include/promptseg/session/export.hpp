// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptseg/types.hpp"

namespace promptseg {

enum class ExportFormat : std::uint8_t { LabelPng, PolygonJson, RleJson };

std::string_view to_string(ExportFormat f) noexcept;
/// "label-png", "polygon-json" or "rle-json"; throws InvalidArgument otherwise.
ExportFormat parse_export_format(std::string_view s);
std::string_view content_type(ExportFormat f) noexcept;

/// Composite of the annotations on `slice`; later annotations overwrite
/// earlier ones and each pixel carries its annotation id.
LabelImage composite_labels(const std::vector<Annotation>& annotations, int width, int height,
                            int slice = 0);

/// Serialises annotations in one of the export formats (see FORMATS.md).
/// label-png covers `slice` only; the JSON formats cover every slice.
/// Errors: TooManyInstances (label-png with an id above 65535).
std::vector<std::uint8_t> export_annotations(const std::vector<Annotation>& annotations,
                                             int width, int height, ExportFormat format,
                                             int slice = 0);

/// UTC, millisecond precision: 2024-01-31T12:00:00.000Z
std::string format_timestamp(std::chrono::system_clock::time_point t);

/// The polygon-json record of one annotation.
nlohmann::json annotation_to_json(const Annotation& a);
nlohmann::json polygon_to_json(const Polygon& p);
Polygon polygon_from_json(const nlohmann::json& j);
nlohmann::json region_to_json(const Region& r);
Region region_from_json(const nlohmann::json& j);
nlohmann::json label_image_to_json(const LabelImage& labels);

}  // namespace promptseg
