// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/worker/client.hpp"

#include <signal.h>
#include <unistd.h>

#include <cstring>

#include "promptseg/error.hpp"
#include "promptseg/protocol/shm.hpp"

namespace promptseg::worker {

using protocol::ControlMessage;
using protocol::MessageKind;

namespace {

std::string make_channel_token() {
  static std::atomic<std::uint64_t> counter{0};
  return std::to_string(::getpid()) + "x" + std::to_string(++counter);
}

protocol::DType dtype_of(BitDepth d) {
  switch (d) {
    case BitDepth::U8: return protocol::DType::U8;
    case BitDepth::U16: return protocol::DType::U16;
    case BitDepth::F32: return protocol::DType::F32;
  }
  return protocol::DType::U8;
}

[[noreturn]] void throw_worker_error(const ControlMessage& reply) {
  const std::string code = reply.code.value_or("WorkerError");
  const std::string text = reply.message.value_or("worker reported an error");
  ErrorCode parsed;
  if (parse_error_code(code, parsed)) throw Error(parsed, text, code);
  throw Error(ErrorCode::WorkerError, code + ": " + text, code);
}

}  // namespace

std::string_view to_string(WorkerState s) noexcept {
  switch (s) {
    case WorkerState::Installing: return "Installing";
    case WorkerState::Starting: return "Starting";
    case WorkerState::Ready: return "Ready";
    case WorkerState::Busy: return "Busy";
    case WorkerState::Dead: return "Dead";
  }
  return "?";
}

WorkerClient::WorkerClient(std::string model_id, std::unique_ptr<ChildProcess> process,
                           Options options)
    : model_id_(std::move(model_id)), process_(std::move(process)), options_(options),
      channel_(make_channel_token()), pid_(process_->pid()) {}

WorkerClient::~WorkerClient() {
  try {
    shutdown();
  } catch (...) {
  }
}

std::string WorkerClient::segment_prefix() const {
  return std::string(protocol::kSegmentPrefix) + channel_ + "-";
}

std::uint64_t WorkerClient::sent(MessageKind kind) const {
  std::lock_guard lock(stats_mutex_);
  auto it = sent_.find(kind);
  return it == sent_.end() ? 0 : it->second;
}

void WorkerClient::set_tracing(bool on) {
  std::lock_guard lock(stats_mutex_);
  tracing_ = on;
  if (!on) trace_.clear();
}

std::vector<TraceEntry> WorkerClient::trace() const {
  std::lock_guard lock(stats_mutex_);
  return trace_;
}

void WorkerClient::record(bool outbound, const ControlMessage& msg) {
  std::lock_guard lock(stats_mutex_);
  if (outbound) ++sent_[msg.kind];
  if (tracing_) trace_.push_back({outbound, msg});
}

void WorkerClient::mark_dead() noexcept {
  state_ = WorkerState::Dead;
  retained_ = 0;
  if (process_) {
    process_->kill(SIGKILL);
    process_->wait_for(std::chrono::milliseconds(2000));
  }
}

ControlMessage WorkerClient::roundtrip(ControlMessage request,
                                       std::chrono::milliseconds timeout,
                                       const EncodeProgress& progress) {
  // Caller holds request_mutex_.
  if (state() == WorkerState::Dead) {
    throw Error(ErrorCode::WorkerDied, "worker for " + model_id_ + " is not running");
  }
  request.msg_id = next_id_++;
  const WorkerState before = state();
  if (before == WorkerState::Ready) state_ = WorkerState::Busy;
  try {
    record(true, request);
    process_->write_all(protocol::encode_frame(request));
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      auto line = process_->read_line(std::max(left, std::chrono::milliseconds(0)));
      if (!line) {
        const ErrorCode code = request.kind == MessageKind::Hello ? ErrorCode::HandshakeTimeout
                                                                  : ErrorCode::WorkerDied;
        mark_dead();
        throw Error(code, "no reply from worker within timeout");
      }
      ControlMessage reply = protocol::decode_frame(*line);
      inbound_.check(reply);
      record(false, reply);
      if (reply.msg_id != request.msg_id) {
        throw Error(ErrorCode::MalformedFrame, "reply id " + std::to_string(reply.msg_id) +
                                                   " does not match request " +
                                                   std::to_string(request.msg_id));
      }
      if (reply.kind == MessageKind::Progress) {
        if (progress) progress(reply.percent.value_or(0), reply.phase.value_or(""));
        continue;
      }
      if (reply.retained) retained_ = *reply.retained;
      if (state() == WorkerState::Busy) state_ = WorkerState::Ready;
      return reply;
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::WorkerDied || e.code() == ErrorCode::MalformedFrame ||
        e.code() == ErrorCode::DuplicateMsgId || e.code() == ErrorCode::UnknownKind) {
      mark_dead();
    }
    if (e.code() != ErrorCode::WorkerDied && e.code() != ErrorCode::HandshakeTimeout &&
        state() == WorkerState::Dead) {
      throw Error(ErrorCode::WorkerDied, std::string("worker protocol failure: ") + e.what());
    }
    throw;
  }
}

void WorkerClient::handshake() {
  std::lock_guard lock(request_mutex_);
  ControlMessage hello;
  hello.kind = MessageKind::Hello;
  hello.version = protocol::kProtocolVersion;
  hello.model_id = model_id_;
  const ControlMessage reply = roundtrip(hello, options_.handshake_timeout);
  if (reply.kind == MessageKind::Error) {
    mark_dead();
    throw_worker_error(reply);
  }
  if (reply.version.value_or(-1) != protocol::kProtocolVersion) {
    mark_dead();
    throw Error(ErrorCode::ProtocolMismatch,
                "worker speaks protocol version " + std::to_string(reply.version.value_or(-1)));
  }
  state_ = WorkerState::Ready;
}

EncodeReply WorkerClient::encode(const Image& image, const Region& region,
                                 const EncodeProgress& progress) {
  std::lock_guard lock(request_mutex_);
  if (!image.bounds().contains(region) || region.empty()) {
    throw Error(ErrorCode::InvalidArgument, "encode region outside image");
  }
  ControlMessage req;
  req.kind = MessageKind::Encode;
  req.model_id = model_id_;
  req.region = region;

  // Rows are copied straight from the image into the segment.
  const std::size_t px = static_cast<std::size_t>(image.channels()) * bytes_per_sample(image.depth());
  const std::size_t row = px * region.w;
  const std::string name = segment_prefix() + std::to_string(next_id_);
  protocol::SharedSegment seg = protocol::SharedSegment::create(name, row * region.h);
  const auto src = image.bytes();
  for (int y = 0; y < region.h; ++y) {
    const std::size_t off = (static_cast<std::size_t>(region.y0 + y) * image.width() + region.x0) * px;
    std::memcpy(seg.data().data() + row * y, src.data() + off, row);
  }
  protocol::TensorHeader header;
  header.dtype = dtype_of(image.depth());
  header.shape = {static_cast<std::uint64_t>(region.h), static_cast<std::uint64_t>(region.w)};
  if (image.channels() > 1) header.shape.push_back(static_cast<std::uint64_t>(image.channels()));
  header.checksum = protocol::crc32(seg.data());
  header.shm_name = name;
  req.tensor = header;

  const ControlMessage reply = roundtrip(req, options_.reply_timeout, progress);
  if (reply.kind == MessageKind::Error) {
    if (reply.code && *reply.code == "ChecksumMismatch") throw_worker_error(reply);
    throw Error(ErrorCode::EncodeFailed,
                reply.code.value_or("Error") + ": " + reply.message.value_or(""),
                reply.code.value_or(""));
  }
  if (!reply.embedding_handle) {
    throw Error(ErrorCode::EncodeFailed, "worker did not return an embedding handle");
  }
  return EncodeReply{*reply.embedding_handle, reply.bytes.value_or(0),
                     reply.elapsed_s.value_or(0)};
}

DecodeReply WorkerClient::decode(const std::string& handle, const Region& region,
                                 const protocol::ModelPrompt& prompt, const ScalePair& scale) {
  std::lock_guard lock(request_mutex_);
  const std::string name = segment_prefix() + std::to_string(next_id_) + "-mask";
  const std::size_t n = static_cast<std::size_t>(region.w) * region.h;
  protocol::SharedSegment seg = protocol::SharedSegment::create(name, n);

  ControlMessage req;
  req.kind = MessageKind::Decode;
  req.embedding_handle = handle;
  req.region = region;
  req.prompt = prompt;
  req.scale = scale;
  protocol::TensorHeader out;
  out.dtype = protocol::DType::U8;
  out.shape = {static_cast<std::uint64_t>(region.h), static_cast<std::uint64_t>(region.w)};
  out.shm_name = name;
  req.output = out;

  const ControlMessage reply = roundtrip(req, options_.reply_timeout);
  if (reply.kind == MessageKind::Error) throw_worker_error(reply);
  if (!reply.tensor || reply.tensor->shm_name != name || reply.tensor->shape != out.shape ||
      reply.tensor->dtype != protocol::DType::U8) {
    throw Error(ErrorCode::WorkerError, "decode reply does not describe the mask segment");
  }
  std::vector<std::uint8_t> bits(seg.data().begin(), seg.data().begin() + static_cast<std::ptrdiff_t>(n));
  if (protocol::crc32(bits) != reply.tensor->checksum) {
    throw Error(ErrorCode::ChecksumMismatch, "mask checksum mismatch on " + name);
  }
  return DecodeReply{Bitmask(region.w, region.h, std::move(bits)), reply.score.value_or(0),
                     reply.elapsed_s.value_or(0)};
}

void WorkerClient::release(const std::string& handle) {
  std::lock_guard lock(request_mutex_);
  ControlMessage req;
  req.kind = MessageKind::ReleaseEmbedding;
  req.embedding_handle = handle;
  const ControlMessage reply = roundtrip(req, options_.reply_timeout);
  if (reply.kind == MessageKind::Error) throw_worker_error(reply);
}

void WorkerClient::shutdown() {
  std::lock_guard lock(request_mutex_);
  if (!process_) return;
  if (state() != WorkerState::Dead) {
    try {
      ControlMessage req;
      req.kind = MessageKind::Shutdown;
      roundtrip(req, options_.shutdown_grace);
    } catch (const Error&) {
    }
  }
  process_->close_stdin();
  if (!process_->wait_for(options_.shutdown_grace)) {
    process_->kill(SIGKILL);
    process_->wait_for(std::chrono::milliseconds(2000));
  }
  state_ = WorkerState::Dead;
  retained_ = 0;
  process_.reset();
}

}  // namespace promptseg::worker
