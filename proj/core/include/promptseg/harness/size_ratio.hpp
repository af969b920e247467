// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "promptseg/image.hpp"
#include "promptseg/types.hpp"
#include "promptseg/worker/manager.hpp"

namespace promptseg::harness {

enum class ObjectKind : std::uint8_t { Square, Disc };

struct HarnessConfig {
  std::vector<int> image_sizes{500, 1000, 2000, 3000, 4000};
  std::vector<int> object_sizes = default_object_sizes();
  ObjectKind object_kind = ObjectKind::Square;
  std::string backend = "mock";
  std::uint8_t background = 64;
  std::uint8_t foreground = 200;
  int trials = 1;
  /// Encode the whole image instead of the policy region.
  bool whole_image_embed = false;
  /// Run cells concurrently; honoured for the mock backend only.
  bool parallel = false;

  /// 26, 52, ..., 442.
  static std::vector<int> default_object_sizes();
  /// Throws InvalidArgument unless every object fits every image and trials >= 1.
  void validate() const;
};

struct CellResult {
  int object_size = 0;
  int image_size = 0;
  double iou = 0;
  /// Mean wall-clock encode time over the trials.
  double encode_s = 0;
  /// Empty on success; failed cells score 0.
  std::string error;
  friend bool operator==(const CellResult&, const CellResult&) = default;
};

/// Rows are object sizes, columns image sizes.
struct MatrixResult {
  std::vector<int> object_sizes;
  std::vector<int> image_sizes;
  std::vector<CellResult> cells;

  const CellResult& at(std::size_t row, std::size_t col) const {
    return cells[row * image_sizes.size() + col];
  }
  std::vector<std::vector<double>> scores() const;
  friend bool operator==(const MatrixResult&, const MatrixResult&) = default;
};

/// Centered object of `object_size` on a square `image_size` canvas.
Bitmask synth_object_mask(int image_size, int object_size, ObjectKind kind);
ImageRef synth_image(const Bitmask& object, std::uint8_t background, std::uint8_t foreground,
                     const std::string& id);
/// Tight bounding box of the set pixels; throws EmptyMask for an empty mask.
Region mask_bounds(const Bitmask& mask);

/// Intersection over union of equally sized masks; two empty masks score 1.
double iou(const Bitmask& a, const Bitmask& b);

/// Runs every cell through a full session: synthesize, box-prompt with the
/// exact bounding box, annotate, score.
MatrixResult run_matrix(const HarnessConfig& cfg, std::shared_ptr<worker::WorkerManager> workers);

/// A cell is bold when it is the maximum of its row or at least 0.95.
std::vector<std::vector<bool>> bold_cells(const std::vector<std::vector<double>>& scores);
/// Plain-text table with bold cells wrapped in asterisks.
std::string format_table(const MatrixResult& m);

/// CSV with header object_size,image_size,iou,encode_s,error. Doubles are
/// written with 17 significant digits so reading back is lossless.
void write_csv(const MatrixResult& m, std::ostream& out);
MatrixResult read_csv(std::istream& in);

/// Published detection scores for the default grid (rows: object sizes,
/// columns: image sizes), used to compare real-backend runs.
const std::vector<std::vector<double>>& reference_scores();

/// Fraction of rows whose maximum lies in a column that is also a maximum
/// of the same row in `reference`.
double row_max_agreement(const std::vector<std::vector<double>>& scores,
                         const std::vector<std::vector<double>>& reference);

struct EncodeTiming {
  std::string model_id;
  double nominal_s = 0;
  double measured_s = 0;
  std::string error;
};

/// Encodes one synthetic image_size^2 image per backend, whole-image.
std::vector<EncodeTiming> encode_times(const std::vector<std::string>& backends,
                                       std::shared_ptr<worker::WorkerManager> workers,
                                       int image_size = 1000, int trials = 1);
std::string format_encode_table(const std::vector<EncodeTiming>& rows);

}  // namespace promptseg::harness
