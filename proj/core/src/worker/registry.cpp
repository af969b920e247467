// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/worker/registry.hpp"

#include "promptseg/error.hpp"

namespace promptseg::worker {

namespace {

EnvRecipe sam2_env() {
  return {"3.11", {"torch", "torchvision", "numpy",
                   "git+https://github.com/facebookresearch/sam2.git"}};
}

std::vector<ModelSpec> build_registry() {
  const std::string sam2_base = "https://dl.fbaipublicfiles.com/segment_anything_2/092824/";
  std::vector<ModelSpec> out;
  out.push_back({"sam2-tiny", "SAM-2 Tiny", 148.7, 1.14, true,
                 {{sam2_base + "sam2.1_hiera_tiny.pt", "sam2.1_hiera_tiny.pt", ""}},
                 sam2_env()});
  out.push_back({"sam2-small", "SAM-2 Small", 175.8, 1.39, true,
                 {{sam2_base + "sam2.1_hiera_small.pt", "sam2.1_hiera_small.pt", ""}},
                 sam2_env()});
  out.push_back({"sam2-large", "SAM-2 Large", 856.4, 5.59, true,
                 {{sam2_base + "sam2.1_hiera_large.pt", "sam2.1_hiera_large.pt", ""}},
                 sam2_env()});
  out.push_back({"efficient-sam", "EfficientSAM", 105.7, 3.19, true,
                 {{"https://github.com/yformer/EfficientSAM/raw/main/weights/efficient_sam_vits.pt.zip",
                   "efficient_sam_vits.pt.zip", ""}},
                 {"3.11", {"torch", "torchvision", "numpy",
                           "git+https://github.com/yformer/EfficientSAM.git"}}});
  out.push_back({"efficientvit-sam-l2", "EfficientViTSAM-l2", 245.7, 0.74, true,
                 {{"https://huggingface.co/han-cai/efficientvit-sam/resolve/main/efficientvit_sam_l2.pt",
                   "efficientvit_sam_l2.pt", ""}},
                 {"3.11", {"torch", "torchvision", "numpy",
                           "git+https://github.com/mit-han-lab/efficientvit.git"}}});
  out.push_back({kMockModelId, "Mock (threshold segmenter)", 0.0, 0.0, true, {}, {}});
  return out;
}

}  // namespace

const std::vector<ModelSpec>& registry() {
  static const std::vector<ModelSpec> models = build_registry();
  return models;
}

const ModelSpec& find_model(const std::vector<ModelSpec>& models, const std::string& model_id) {
  for (const auto& m : models) {
    if (m.model_id == model_id) return m;
  }
  throw Error(ErrorCode::UnknownModel, "unknown model: " + model_id);
}

const ModelSpec& find_model(const std::string& model_id) {
  return find_model(registry(), model_id);
}

}  // namespace promptseg::worker
