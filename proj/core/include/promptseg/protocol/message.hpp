// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "promptseg/embedding_policy.hpp"
#include "promptseg/types.hpp"

namespace promptseg::protocol {

inline constexpr int kProtocolVersion = 1;

enum class MessageKind : std::uint8_t {
  Hello,
  LoadModel,
  Encode,
  Decode,
  ReleaseEmbedding,
  Shutdown,
  Ok,
  Error,
  Progress,
};

std::string_view to_string(MessageKind k) noexcept;
std::optional<MessageKind> parse_kind(std::string_view s) noexcept;
bool is_request(MessageKind k) noexcept;
bool is_terminal_reply(MessageKind k) noexcept;

enum class DType : std::uint8_t { U8, U16, F32 };

std::string_view to_string(DType d) noexcept;
std::optional<DType> parse_dtype(std::string_view s) noexcept;
std::size_t dtype_size(DType d) noexcept;

/// Describes a payload living in a shared-memory segment. Payloads are
/// row-major, little-endian; `checksum` is the CRC-32 (zlib polynomial) of
/// the payload bytes.
struct TensorHeader {
  DType dtype = DType::U8;
  std::vector<std::uint64_t> shape;
  std::uint32_t checksum = 0;
  std::string shm_name;

  std::uint64_t element_count() const noexcept;
  std::uint64_t byte_size() const noexcept { return element_count() * dtype_size(dtype); }

  friend bool operator==(const TensorHeader&, const TensorHeader&) = default;
};

struct ModelPoint {
  double x = 0;
  double y = 0;
  bool foreground = true;
  friend bool operator==(const ModelPoint&, const ModelPoint&) = default;
};

/// Corners in model-input coordinates.
struct ModelBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  friend bool operator==(const ModelBox&, const ModelBox&) = default;
};

/// A prompt expressed in the 1024x1024 model frame.
struct ModelPrompt {
  std::vector<ModelPoint> points;
  std::optional<ModelBox> box;
  friend bool operator==(const ModelPrompt&, const ModelPrompt&) = default;
};

/// One control frame. Which optional fields are meaningful depends on
/// `kind`; see PROTOCOL.md for the per-kind field table.
struct ControlMessage {
  std::uint64_t msg_id = 0;
  MessageKind kind = MessageKind::Hello;

  std::optional<std::int64_t> version;
  std::optional<std::string> model_id;
  std::optional<std::string> path;
  std::optional<TensorHeader> tensor;
  std::optional<TensorHeader> output;
  std::optional<Region> region;
  std::optional<ModelPrompt> prompt;
  std::optional<ScalePair> scale;
  std::optional<std::string> embedding_handle;
  std::optional<double> score;
  std::optional<std::uint64_t> bytes;
  std::optional<std::uint64_t> retained;
  std::optional<double> elapsed_s;
  std::optional<double> percent;
  std::optional<std::string> phase;
  std::optional<std::string> code;
  std::optional<std::string> message;

  friend bool operator==(const ControlMessage&, const ControlMessage&) = default;
};

ControlMessage make_ok(std::uint64_t msg_id);
ControlMessage make_error(std::uint64_t msg_id, std::string code, std::string message);

}  // namespace promptseg::protocol
