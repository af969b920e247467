// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "promptseg/embedding_policy.hpp"
#include "promptseg/image.hpp"
#include "promptseg/protocol/frame.hpp"
#include "promptseg/protocol/message.hpp"
#include "promptseg/worker/process.hpp"

namespace promptseg::worker {

enum class WorkerState : std::uint8_t { Installing, Starting, Ready, Busy, Dead };

std::string_view to_string(WorkerState s) noexcept;

struct EncodeReply {
  std::string handle;
  std::uint64_t bytes = 0;
  double elapsed_s = 0;
};

struct DecodeReply {
  Bitmask mask;
  double score = 0;
  /// Worker-side compute time as reported by the worker.
  double elapsed_s = 0;
};

struct TraceEntry {
  bool outbound = true;
  protocol::ControlMessage msg;
};

using EncodeProgress = std::function<void(double percent, const std::string& phase)>;

/// Core side of one worker process. Requests are serialised: one request is
/// in flight at a time and callers queue on an internal mutex in arrival
/// order. Every shared-memory segment of a request is created and unlinked
/// by this side, named "promptseg-<channel>-<msg_id>[-suffix]".
class WorkerClient {
 public:
  struct Options {
    std::chrono::milliseconds handshake_timeout{10000};
    std::chrono::milliseconds reply_timeout{std::chrono::minutes(10)};
    std::chrono::milliseconds shutdown_grace{2000};
  };

  WorkerClient(std::string model_id, std::unique_ptr<ChildProcess> process, Options options);
  WorkerClient(std::string model_id, std::unique_ptr<ChildProcess> process)
      : WorkerClient(std::move(model_id), std::move(process), Options{}) {}
  ~WorkerClient();

  WorkerClient(const WorkerClient&) = delete;
  WorkerClient& operator=(const WorkerClient&) = delete;

  /// Hello exchange. Errors: HandshakeTimeout, ProtocolMismatch, WorkerDied.
  void handshake();

  /// Ships the region's pixels through shared memory and returns the
  /// worker's embedding handle. Errors: EncodeFailed, WorkerDied.
  EncodeReply encode(const Image& image, const Region& region,
                     const EncodeProgress& progress = {});

  /// Decodes `prompt` (already in model coordinates) against `handle`; the
  /// mask comes back at region resolution. Errors: EmptyMask, WorkerError,
  /// ChecksumMismatch, WorkerDied.
  DecodeReply decode(const std::string& handle, const Region& region,
                     const protocol::ModelPrompt& prompt, const ScalePair& scale);

  void release(const std::string& handle);

  /// Shutdown handshake, then waits for exit; escalates to SIGKILL after the
  /// grace period. Idempotent.
  void shutdown();

  const std::string& model_id() const noexcept { return model_id_; }
  const std::string& channel() const noexcept { return channel_; }
  std::string segment_prefix() const;
  pid_t pid() const noexcept { return pid_; }
  WorkerState state() const noexcept { return state_.load(); }
  bool alive() const noexcept { return state() != WorkerState::Dead; }
  /// Embedding count from the worker's most recent Ok reply.
  std::uint64_t retained() const noexcept { return retained_.load(); }
  std::uint64_t sent(protocol::MessageKind kind) const;

  void set_tracing(bool on);
  std::vector<TraceEntry> trace() const;

 private:
  protocol::ControlMessage roundtrip(protocol::ControlMessage request,
                                     std::chrono::milliseconds timeout,
                                     const EncodeProgress& progress = {});
  void record(bool outbound, const protocol::ControlMessage& msg);
  void mark_dead() noexcept;

  std::string model_id_;
  std::unique_ptr<ChildProcess> process_;
  Options options_;
  std::string channel_;
  pid_t pid_;
  std::atomic<WorkerState> state_{WorkerState::Starting};
  std::atomic<std::uint64_t> retained_{0};

  std::mutex request_mutex_;
  std::uint64_t next_id_ = 1;
  protocol::SequenceChecker inbound_;

  mutable std::mutex stats_mutex_;
  std::map<protocol::MessageKind, std::uint64_t> sent_;
  bool tracing_ = false;
  std::vector<TraceEntry> trace_;
};

}  // namespace promptseg::worker
