// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "promptseg/types.hpp"

namespace promptseg {

enum class BitDepth : std::uint8_t { U8, U16, F32 };

std::size_t bytes_per_sample(BitDepth d) noexcept;

/// One immutable 2D plane: a plain image or one slice of a stack.
/// Samples are row-major, channel-interleaved, native byte order.
class Image {
 public:
  Image(std::string id, int width, int height, int channels, BitDepth depth,
        int slice_index, std::vector<std::uint8_t> data);

  const std::string& id() const noexcept { return id_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  BitDepth depth() const noexcept { return depth_; }
  int slice_index() const noexcept { return slice_index_; }
  Region bounds() const noexcept { return Region{0, 0, width_, height_}; }
  std::span<const std::uint8_t> bytes() const noexcept { return data_; }

  double sample(int x, int y, int c) const noexcept;
  /// Mean over channels.
  double intensity(int x, int y) const noexcept;

  /// Contiguous copy of the samples inside `r` (must lie within bounds).
  std::vector<std::uint8_t> crop_bytes(const Region& r) const;

 private:
  std::string id_;
  int width_;
  int height_;
  int channels_;
  BitDepth depth_;
  int slice_index_;
  std::vector<std::uint8_t> data_;
};

using ImageRef = std::shared_ptr<const Image>;

/// A 2D image (one slice) or a z/t stack of equally sized planes.
struct ImageStack {
  std::string id;
  std::vector<ImageRef> slices;
  /// Where the pixels came from (file path or upload name); may be empty.
  std::string source;
  /// SHA-256 of the encoded file bytes, empty for synthetic images.
  std::string sha256;

  int width() const noexcept { return slices.front()->width(); }
  int height() const noexcept { return slices.front()->height(); }
  /// Throws Error(InvalidArgument) on an out-of-range slice.
  const ImageRef& slice(int index) const;
};

/// Builds a stack from raw planes, assigning `id` and slice indices.
ImageStack make_stack(std::string id, int width, int height, int channels,
                      BitDepth depth, std::vector<std::vector<std::uint8_t>> planes);

/// Convenience for tests and synthetic inputs: single-slice 8-bit gray.
ImageRef make_gray8(std::string id, int width, int height,
                    std::vector<std::uint8_t> pixels);

/// Session-wide registry of loaded images; ids are unique within a store.
class ImageStore {
 public:
  /// Stores the stack under a fresh id (ignoring stack.id) and returns it.
  std::string add(ImageStack stack);
  /// Stores under the caller's id; throws InvalidArgument if taken.
  void add_with_id(ImageStack stack);
  std::shared_ptr<const ImageStack> get(const std::string& id) const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const ImageStack>> images_;
  std::uint64_t next_id_ = 1;
};

}  // namespace promptseg
