// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/error.hpp"

#include <array>
#include <utility>

namespace promptseg {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 26> kNames{{
    {ErrorCode::InvalidArgument, "InvalidArgument"},
    {ErrorCode::NoOverlap, "NoOverlap"},
    {ErrorCode::EmptyMask, "EmptyMask"},
    {ErrorCode::MalformedFrame, "MalformedFrame"},
    {ErrorCode::UnknownKind, "UnknownKind"},
    {ErrorCode::DuplicateMsgId, "DuplicateMsgId"},
    {ErrorCode::ProtocolMismatch, "ProtocolMismatch"},
    {ErrorCode::ChecksumMismatch, "ChecksumMismatch"},
    {ErrorCode::SegmentMissing, "SegmentMissing"},
    {ErrorCode::SegmentBusy, "SegmentBusy"},
    {ErrorCode::UnknownModel, "UnknownModel"},
    {ErrorCode::NotInstalled, "NotInstalled"},
    {ErrorCode::HashMismatch, "HashMismatch"},
    {ErrorCode::DownloadFailed, "DownloadFailed"},
    {ErrorCode::EnvBootstrapFailed, "EnvBootstrapFailed"},
    {ErrorCode::SpawnFailed, "SpawnFailed"},
    {ErrorCode::HandshakeTimeout, "HandshakeTimeout"},
    {ErrorCode::WorkerDied, "WorkerDied"},
    {ErrorCode::WorkerError, "WorkerError"},
    {ErrorCode::EncodeFailed, "EncodeFailed"},
    {ErrorCode::NothingToUndo, "NothingToUndo"},
    {ErrorCode::NothingToRedo, "NothingToRedo"},
    {ErrorCode::TooManyInstances, "TooManyInstances"},
    {ErrorCode::NotFound, "NotFound"},
    {ErrorCode::IoError, "IoError"},
    {ErrorCode::Unsupported, "Unsupported"},
}};

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Unknown";
}

bool parse_error_code(std::string_view name, ErrorCode& out) noexcept {
  for (const auto& [c, n] : kNames) {
    if (n == name) {
      out = c;
      return true;
    }
  }
  return false;
}

}  // namespace promptseg
