// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/session/persistence.hpp"

#include <fstream>

#include "promptseg/digest.hpp"
#include "promptseg/error.hpp"
#include "promptseg/image_io.hpp"
#include "promptseg/session/rle.hpp"

namespace promptseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json annotation_record(const Annotation& a) {
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      a.created_at.time_since_epoch())
                      .count();
  return json{{"id", a.id},
              {"slice_index", a.slice_index},
              {"polygon", polygon_to_json(a.polygon)},
              {"score", a.mask.score},
              {"region", region_to_json(a.mask.region)},
              {"mask_counts", rle_encode(a.mask.mask).counts},
              {"created_at_ms", ms}};
}

Annotation annotation_from_record(const json& j, const std::string& image_id) {
  Annotation a;
  a.id = j.at("id").get<std::uint64_t>();
  a.image_id = image_id;
  a.slice_index = j.at("slice_index").get<int>();
  a.polygon = polygon_from_json(j.at("polygon"));
  const Region region = region_from_json(j.at("region"));
  Bitmask mask = rle_decode(Rle{region.w, region.h,
                                j.at("mask_counts").get<std::vector<std::uint64_t>>()});
  a.mask = MaskResult(region, std::move(mask), j.at("score").get<double>(), Prompt{});
  a.created_at = std::chrono::system_clock::time_point(
      std::chrono::milliseconds(j.at("created_at_ms").get<std::int64_t>()));
  return a;
}

}  // namespace

json session_to_json(const Session& session) {
  json annotations = json::array();
  for (const Annotation& a : session.annotations()) annotations.push_back(annotation_record(a));
  json views = json::array();
  for (const ViewConfig& v : session.views()) {
    views.push_back(json{{"viewport", region_to_json(v.viewport)}, {"slice", v.slice}});
  }
  const ImageStack& img = session.image();
  return json{{"version", kSessionFileVersion},
              {"session_id", session.id()},
              {"model_id", session.model_id()},
              {"image",
               {{"id", img.id},
                {"source", img.source},
                {"sha256", img.sha256},
                {"width", img.width()},
                {"height", img.height()},
                {"slices", img.slices.size()}}},
              {"next_annotation_id", session.next_annotation_id()},
              {"annotations", std::move(annotations)},
              {"views", std::move(views)}};
}

fs::path session_path(const fs::path& data_dir, const std::string& session_id) {
  return data_dir / "sessions" / (session_id + ".json");
}

fs::path save_session(const Session& session, const fs::path& data_dir) {
  const fs::path path = session_path(data_dir, session.id());
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + path.parent_path().string());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << session_to_json(session).dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename " + tmp.string());
  return path;
}

std::shared_ptr<const ImageStack> load_image_reference(const std::string& image_id,
                                                       const std::string& source,
                                                       const std::string& sha256) {
  if (source.empty()) {
    throw Error(ErrorCode::NotFound, "image " + image_id + " has no source path");
  }
  ImageStack stack = load_image(source, image_id);
  if (!sha256.empty() && stack.sha256 != sha256) {
    throw Error(ErrorCode::HashMismatch, source + " changed since the session was saved");
  }
  return std::make_shared<const ImageStack>(std::move(stack));
}

std::unique_ptr<Session> load_session(const fs::path& file,
                                      std::shared_ptr<worker::WorkerManager> workers,
                                      SessionOptions options, const ImageResolver& resolver) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, file.string() + ": " + e.what());
  }
  try {
    if (doc.at("version").get<int>() != kSessionFileVersion) {
      throw Error(ErrorCode::InvalidArgument, "unsupported session file version");
    }
    const json& img = doc.at("image");
    const std::string image_id = img.at("id").get<std::string>();
    auto image = resolver(image_id, img.value("source", ""), img.value("sha256", ""));
    auto session = std::make_unique<Session>(doc.at("session_id").get<std::string>(), image,
                                             doc.at("model_id").get<std::string>(),
                                             std::move(workers), std::move(options));
    std::vector<Annotation> annotations;
    for (const json& a : doc.at("annotations")) {
      annotations.push_back(annotation_from_record(a, image->id));
    }
    std::vector<ViewConfig> views;
    for (const json& v : doc.at("views")) {
      views.push_back(ViewConfig{region_from_json(v.at("viewport")), v.at("slice").get<int>()});
    }
    session->restore(std::move(annotations), std::move(views),
                     doc.at("next_annotation_id").get<std::uint64_t>());
    return session;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, file.string() + ": " + e.what());
  }
}

}  // namespace promptseg
