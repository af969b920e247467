// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace promptseg::worker {

inline constexpr const char* kMockModelId = "mock";

struct WeightFile {
  std::string url;
  std::string filename;
  /// Lower-case hex SHA-256. Empty means "not pinned": the digest seen at
  /// first install is recorded and enforced from then on.
  std::string sha256;
};

/// Dependencies for the model's isolated Python environment.
struct EnvRecipe {
  std::string python_version;
  std::vector<std::string> packages;
};

struct ModelSpec {
  std::string model_id;
  std::string display_name;
  double download_size_mb = 0;
  /// Seconds to encode one image on the reference workstation. Reference
  /// metadata only; absolute timings vary with hardware.
  double nominal_encode_s = 0;
  bool enabled = true;
  std::vector<WeightFile> weights;
  EnvRecipe env;

  bool is_mock() const noexcept { return model_id == kMockModelId; }
};

/// Supported models in table order, followed by the mock backend.
const std::vector<ModelSpec>& registry();

/// Throws Error(UnknownModel).
const ModelSpec& find_model(const std::string& model_id);
const ModelSpec& find_model(const std::vector<ModelSpec>& models, const std::string& model_id);

}  // namespace promptseg::worker
