// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/session/export.hpp"

#include <ctime>

#include "promptseg/error.hpp"
#include "promptseg/image_io.hpp"
#include "promptseg/session/rle.hpp"

namespace promptseg {

using nlohmann::json;

std::string_view to_string(ExportFormat f) noexcept {
  switch (f) {
    case ExportFormat::LabelPng: return "label-png";
    case ExportFormat::PolygonJson: return "polygon-json";
    case ExportFormat::RleJson: return "rle-json";
  }
  return "?";
}

ExportFormat parse_export_format(std::string_view s) {
  if (s == "label-png") return ExportFormat::LabelPng;
  if (s == "polygon-json") return ExportFormat::PolygonJson;
  if (s == "rle-json") return ExportFormat::RleJson;
  throw Error(ErrorCode::InvalidArgument, "unknown export format '" + std::string(s) + "'");
}

std::string_view content_type(ExportFormat f) noexcept {
  return f == ExportFormat::LabelPng ? "image/png" : "application/json";
}

LabelImage composite_labels(const std::vector<Annotation>& annotations, int width, int height,
                            int slice) {
  LabelImage out(width, height);
  for (const Annotation& a : annotations) {
    if (a.slice_index != slice) continue;
    const Region& r = a.mask.region;
    for (int y = std::max(0, r.y0); y < std::min(height, r.y1()); ++y) {
      for (int x = std::max(0, r.x0); x < std::min(width, r.x1()); ++x) {
        if (a.mask.mask.at(x - r.x0, y - r.y0)) out.at(x, y) = static_cast<std::uint32_t>(a.id);
      }
    }
  }
  return out;
}

std::string format_timestamp(std::chrono::system_clock::time_point t) {
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms % 1000));
  return out;
}

json polygon_to_json(const Polygon& p) {
  json arr = json::array();
  for (const Vertex& v : p) arr.push_back({v.x, v.y});
  return arr;
}

Polygon polygon_from_json(const json& j) {
  Polygon p;
  for (const auto& v : j) p.push_back(Vertex{v.at(0).get<int>(), v.at(1).get<int>()});
  return p;
}

json region_to_json(const Region& r) { return json{r.x0, r.y0, r.w, r.h}; }

Region region_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw Error(ErrorCode::InvalidArgument, "region must be [x0, y0, w, h]");
  }
  return Region{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

json annotation_to_json(const Annotation& a) {
  return json{{"id", a.id},
              {"image_id", a.image_id},
              {"slice_index", a.slice_index},
              {"polygon", polygon_to_json(a.polygon)},
              {"score", a.mask.score},
              {"region", region_to_json(a.mask.region)},
              {"created_at", format_timestamp(a.created_at)}};
}

json label_image_to_json(const LabelImage& labels) {
  return json{{"width", labels.width}, {"height", labels.height}, {"labels", labels.labels}};
}

std::vector<std::uint8_t> export_annotations(const std::vector<Annotation>& annotations,
                                             int width, int height, ExportFormat format,
                                             int slice) {
  json doc;
  switch (format) {
    case ExportFormat::LabelPng:
      return encode_label_png(composite_labels(annotations, width, height, slice));
    case ExportFormat::PolygonJson: {
      json list = json::array();
      for (const Annotation& a : annotations) list.push_back(annotation_to_json(a));
      doc = json{{"format", "promptseg-polygons"}, {"version", 1}, {"width", width},
                 {"height", height}, {"annotations", std::move(list)}};
      break;
    }
    case ExportFormat::RleJson: {
      json list = json::array();
      for (const Annotation& a : annotations) {
        const Rle rle = rle_encode(to_image_frame(a.mask, width, height));
        list.push_back(json{{"id", a.id}, {"slice_index", a.slice_index}, {"counts", rle.counts}});
      }
      doc = json{{"format", "promptseg-rle"}, {"version", 1}, {"width", width},
                 {"height", height}, {"order", "row-major"}, {"annotations", std::move(list)}};
      break;
    }
  }
  const std::string text = doc.dump();
  return {text.begin(), text.end()};
}

}  // namespace promptseg
