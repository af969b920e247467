// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "promptseg/protocol/message.hpp"

namespace promptseg::protocol {

/// Prefix of every segment this library creates (without the leading '/').
inline constexpr std::string_view kSegmentPrefix = "promptseg-";

std::uint32_t crc32(std::span<const std::uint8_t> bytes) noexcept;

/// A mapped POSIX shared-memory segment. The creating side owns the name
/// and unlinks it on destruction; opened segments are only unmapped.
class SharedSegment {
 public:
  /// Throws SegmentBusy if the name exists.
  static SharedSegment create(const std::string& name, std::size_t size);
  /// Throws SegmentMissing if the name does not exist.
  static SharedSegment open(const std::string& name, bool writable);

  SharedSegment() = default;
  SharedSegment(SharedSegment&& other) noexcept;
  SharedSegment& operator=(SharedSegment&& other) noexcept;
  SharedSegment(const SharedSegment&) = delete;
  SharedSegment& operator=(const SharedSegment&) = delete;
  ~SharedSegment();

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return size_; }
  std::span<std::uint8_t> data() noexcept { return {static_cast<std::uint8_t*>(addr_), size_}; }
  std::span<const std::uint8_t> data() const noexcept {
    return {static_cast<const std::uint8_t*>(addr_), size_};
  }
  bool owner() const noexcept { return owner_; }

  /// Removes the name now (the mapping stays valid until destruction).
  void unlink() noexcept;

 private:
  void reset() noexcept;

  std::string name_;
  void* addr_ = nullptr;
  std::size_t size_ = 0;
  bool owner_ = false;
};

/// A segment written by this side together with its header.
struct WrittenTensor {
  SharedSegment segment;
  TensorHeader header;
};

/// Creates `name` and copies `payload` into it. Throws SegmentBusy if the
/// name is taken and InvalidArgument if the payload size disagrees with
/// dtype x shape.
WrittenTensor shm_write(const std::string& name, DType dtype,
                        std::vector<std::uint64_t> shape,
                        std::span<const std::uint8_t> payload);

/// Fills an existing segment (e.g. one created by the peer) and returns the
/// header describing what was written.
TensorHeader shm_fill(const std::string& name, DType dtype, std::vector<std::uint64_t> shape,
                      std::span<const std::uint8_t> payload);

/// Copies the payload out after verifying size and checksum.
/// Throws SegmentMissing or ChecksumMismatch.
std::vector<std::uint8_t> shm_read(const TensorHeader& header);

/// Zero-copy read: maps the segment and verifies its checksum; the view is
/// valid while the returned segment lives.
SharedSegment shm_map_verified(const TensorHeader& header);

/// Names of existing segments starting with `prefix` (leading '/' omitted).
std::vector<std::string> list_segments(std::string_view prefix);

}  // namespace promptseg::protocol
