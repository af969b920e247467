// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "promptseg/session/session.hpp"

namespace promptseg {

inline constexpr int kSessionFileVersion = 1;

/// Session document: image reference (id, source path, sha256), model,
/// annotations with their masks, remembered views. Undo history is not
/// persisted. Layout in FORMATS.md.
nlohmann::json session_to_json(const Session& session);

/// <data_dir>/sessions/<session_id>.json
std::filesystem::path session_path(const std::filesystem::path& data_dir,
                                   const std::string& session_id);

/// Writes atomically (temp file + rename) and returns the path.
std::filesystem::path save_session(const Session& session, const std::filesystem::path& data_dir);

/// Locates the pixels of a persisted image reference.
using ImageResolver = std::function<std::shared_ptr<const ImageStack>(
    const std::string& image_id, const std::string& source, const std::string& sha256)>;

/// Loads the image from `source` and checks its digest (HashMismatch if the
/// file changed since the session was saved).
std::shared_ptr<const ImageStack> load_image_reference(const std::string& image_id,
                                                       const std::string& source,
                                                       const std::string& sha256);

/// Errors: IoError, InvalidArgument (unknown version or bad document),
/// plus those of the resolver and of Session construction.
std::unique_ptr<Session> load_session(const std::filesystem::path& file,
                                      std::shared_ptr<worker::WorkerManager> workers,
                                      SessionOptions options = {},
                                      const ImageResolver& resolver = load_image_reference);

}  // namespace promptseg
