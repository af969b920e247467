// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "promptseg/protocol/message.hpp"

namespace promptseg::protocol {

/// One compact JSON object terminated by '\n'. Object keys are emitted in
/// sorted order, so encoding is deterministic.
std::string encode_frame(const ControlMessage& msg);

/// Decodes exactly one frame, which must end with a single '\n'.
/// Errors: MalformedFrame (syntax, schema, or missing terminator) and
/// UnknownKind.
ControlMessage decode_frame(std::string_view frame);

/// Splits a byte stream into frames. A trailing partial line is MalformedFrame.
std::vector<ControlMessage> decode_stream(std::string_view bytes);

/// Incremental line splitter for a pipe.
class FrameReader {
 public:
  void feed(std::string_view bytes) { buffer_.append(bytes); }
  /// Pops the next complete line (including '\n') if one is buffered.
  bool next_line(std::string& line);
  bool has_partial() const noexcept { return !buffer_.empty(); }

 private:
  std::string buffer_;
};

/// Enforces msg_id rules for one direction of a channel.
///
/// Requests: ids strictly increase. Replies: carry the id of the request they
/// answer, are non-decreasing, and each id gets at most one terminal reply
/// (Progress frames may repeat an id before its terminal reply).
/// Violations throw Error(DuplicateMsgId).
class SequenceChecker {
 public:
  void check(const ControlMessage& msg);

 private:
  bool any_request_ = false;
  std::uint64_t last_request_ = 0;
  bool any_reply_ = false;
  std::uint64_t last_reply_ = 0;
  std::set<std::uint64_t> terminated_;
};

/// Verifies that terminal replies form a bijection onto requests by msg_id.
/// Returns an empty string when the trace is well paired, else a description
/// of the first violation.
std::string check_pairing(const std::vector<ControlMessage>& requests,
                          const std::vector<ControlMessage>& replies);

}  // namespace promptseg::protocol
