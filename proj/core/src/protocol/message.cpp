// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/protocol/message.hpp"

#include <array>
#include <utility>

namespace promptseg::protocol {

namespace {

constexpr std::array<std::pair<MessageKind, std::string_view>, 9> kKinds{{
    {MessageKind::Hello, "Hello"},
    {MessageKind::LoadModel, "LoadModel"},
    {MessageKind::Encode, "Encode"},
    {MessageKind::Decode, "Decode"},
    {MessageKind::ReleaseEmbedding, "ReleaseEmbedding"},
    {MessageKind::Shutdown, "Shutdown"},
    {MessageKind::Ok, "Ok"},
    {MessageKind::Error, "Error"},
    {MessageKind::Progress, "Progress"},
}};

}  // namespace

std::string_view to_string(MessageKind k) noexcept {
  for (const auto& [kind, name] : kKinds) {
    if (kind == k) return name;
  }
  return "?";
}

std::optional<MessageKind> parse_kind(std::string_view s) noexcept {
  for (const auto& [kind, name] : kKinds) {
    if (name == s) return kind;
  }
  return std::nullopt;
}

bool is_request(MessageKind k) noexcept {
  return k != MessageKind::Ok && k != MessageKind::Error && k != MessageKind::Progress;
}

bool is_terminal_reply(MessageKind k) noexcept {
  return k == MessageKind::Ok || k == MessageKind::Error;
}

std::string_view to_string(DType d) noexcept {
  switch (d) {
    case DType::U8: return "u8";
    case DType::U16: return "u16";
    case DType::F32: return "f32";
  }
  return "?";
}

std::optional<DType> parse_dtype(std::string_view s) noexcept {
  if (s == "u8") return DType::U8;
  if (s == "u16") return DType::U16;
  if (s == "f32") return DType::F32;
  return std::nullopt;
}

std::size_t dtype_size(DType d) noexcept {
  switch (d) {
    case DType::U8: return 1;
    case DType::U16: return 2;
    case DType::F32: return 4;
  }
  return 1;
}

std::uint64_t TensorHeader::element_count() const noexcept {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

ControlMessage make_ok(std::uint64_t msg_id) {
  ControlMessage m;
  m.msg_id = msg_id;
  m.kind = MessageKind::Ok;
  return m;
}

ControlMessage make_error(std::uint64_t msg_id, std::string code, std::string message) {
  ControlMessage m;
  m.msg_id = msg_id;
  m.kind = MessageKind::Error;
  m.code = std::move(code);
  m.message = std::move(message);
  return m;
}

}  // namespace promptseg::protocol
