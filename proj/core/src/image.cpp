// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/image.hpp"

#include <cstring>

#include "promptseg/error.hpp"

namespace promptseg {

std::size_t bytes_per_sample(BitDepth d) noexcept {
  switch (d) {
    case BitDepth::U8: return 1;
    case BitDepth::U16: return 2;
    case BitDepth::F32: return 4;
  }
  return 1;
}

Image::Image(std::string id, int width, int height, int channels, BitDepth depth,
             int slice_index, std::vector<std::uint8_t> data)
    : id_(std::move(id)), width_(width), height_(height), channels_(channels),
      depth_(depth), slice_index_(slice_index), data_(std::move(data)) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidArgument, "image must be at least 1x1");
  }
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::Unsupported, "only 1 or 3 channel images are supported");
  }
  if (slice_index < 0) throw Error(ErrorCode::InvalidArgument, "negative slice index");
  const std::size_t expected = static_cast<std::size_t>(width) * height * channels *
                               bytes_per_sample(depth);
  if (data_.size() != expected) {
    throw Error(ErrorCode::InvalidArgument, "pixel buffer size does not match dimensions");
  }
}

double Image::sample(int x, int y, int c) const noexcept {
  const std::size_t idx =
      (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  switch (depth_) {
    case BitDepth::U8:
      return data_[idx];
    case BitDepth::U16: {
      std::uint16_t v;
      std::memcpy(&v, data_.data() + idx * 2, 2);
      return v;
    }
    case BitDepth::F32: {
      float v;
      std::memcpy(&v, data_.data() + idx * 4, 4);
      return v;
    }
  }
  return 0.0;
}

double Image::intensity(int x, int y) const noexcept {
  if (channels_ == 1) return sample(x, y, 0);
  double sum = 0.0;
  for (int c = 0; c < channels_; ++c) sum += sample(x, y, c);
  return sum / channels_;
}

std::vector<std::uint8_t> Image::crop_bytes(const Region& r) const {
  if (!bounds().contains(r) || r.empty()) {
    throw Error(ErrorCode::InvalidArgument, "crop region outside image");
  }
  const std::size_t px = static_cast<std::size_t>(channels_) * bytes_per_sample(depth_);
  const std::size_t row = static_cast<std::size_t>(r.w) * px;
  std::vector<std::uint8_t> out(row * r.h);
  for (int y = 0; y < r.h; ++y) {
    const std::size_t src = (static_cast<std::size_t>(r.y0 + y) * width_ + r.x0) * px;
    std::memcpy(out.data() + row * y, data_.data() + src, row);
  }
  return out;
}

const ImageRef& ImageStack::slice(int index) const {
  if (index < 0 || index >= static_cast<int>(slices.size())) {
    throw Error(ErrorCode::InvalidArgument,
                "slice " + std::to_string(index) + " out of range for image " + id);
  }
  return slices[static_cast<std::size_t>(index)];
}

ImageStack make_stack(std::string id, int width, int height, int channels,
                      BitDepth depth, std::vector<std::vector<std::uint8_t>> planes) {
  if (planes.empty()) throw Error(ErrorCode::InvalidArgument, "image has no planes");
  ImageStack stack;
  stack.id = id;
  for (std::size_t i = 0; i < planes.size(); ++i) {
    stack.slices.push_back(std::make_shared<const Image>(
        id, width, height, channels, depth, static_cast<int>(i), std::move(planes[i])));
  }
  return stack;
}

ImageRef make_gray8(std::string id, int width, int height,
                    std::vector<std::uint8_t> pixels) {
  return std::make_shared<const Image>(std::move(id), width, height, 1, BitDepth::U8,
                                       0, std::move(pixels));
}

namespace {

ImageStack rebind(ImageStack stack, const std::string& id) {
  for (auto& s : stack.slices) {
    std::vector<std::uint8_t> bytes(s->bytes().begin(), s->bytes().end());
    s = std::make_shared<const Image>(id, s->width(), s->height(), s->channels(),
                                      s->depth(), s->slice_index(), std::move(bytes));
  }
  stack.id = id;
  return stack;
}

}  // namespace

std::string ImageStore::add(ImageStack stack) {
  std::lock_guard lock(mutex_);
  std::string id;
  do {
    id = "img-" + std::to_string(next_id_++);
  } while (images_.count(id) != 0);
  if (stack.id != id) stack = rebind(std::move(stack), id);
  images_[id] = std::make_shared<const ImageStack>(std::move(stack));
  return id;
}

void ImageStore::add_with_id(ImageStack stack) {
  if (stack.slices.empty()) throw Error(ErrorCode::InvalidArgument, "image has no planes");
  std::lock_guard lock(mutex_);
  if (images_.count(stack.id) != 0) {
    throw Error(ErrorCode::InvalidArgument, "image id already in use: " + stack.id);
  }
  const std::string id = stack.id;
  images_[id] = std::make_shared<const ImageStack>(std::move(stack));
}

std::shared_ptr<const ImageStack> ImageStore::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = images_.find(id);
  if (it == images_.end()) throw Error(ErrorCode::NotFound, "unknown image " + id);
  return it->second;
}

}  // namespace promptseg
