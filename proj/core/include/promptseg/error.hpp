// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace promptseg {

/// Stable error codes. The string form (to_string) is part of the HTTP API
/// and of the worker protocol, so existing names must never change.
enum class ErrorCode {
  InvalidArgument,
  NoOverlap,
  EmptyMask,
  MalformedFrame,
  UnknownKind,
  DuplicateMsgId,
  ProtocolMismatch,
  ChecksumMismatch,
  SegmentMissing,
  SegmentBusy,
  UnknownModel,
  NotInstalled,
  HashMismatch,
  DownloadFailed,
  EnvBootstrapFailed,
  SpawnFailed,
  HandshakeTimeout,
  WorkerDied,
  WorkerError,
  EncodeFailed,
  NothingToUndo,
  NothingToRedo,
  TooManyInstances,
  NotFound,
  IoError,
  Unsupported,
};

std::string_view to_string(ErrorCode code) noexcept;
bool parse_error_code(std::string_view name, ErrorCode& out) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string detail = {})
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace promptseg
