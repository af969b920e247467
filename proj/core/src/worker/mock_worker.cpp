// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/worker/mock_worker.hpp"

#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <map>
#include <thread>

#include "promptseg/error.hpp"
#include "promptseg/protocol/frame.hpp"
#include "promptseg/protocol/shm.hpp"
#include "promptseg/worker/mock_segmenter.hpp"

namespace promptseg::worker {

using protocol::ControlMessage;
using protocol::MessageKind;

namespace {

bool write_all(int fd, const std::string& s) {
  std::size_t off = 0;
  while (off < s.size()) {
    const ssize_t n = ::write(fd, s.data() + off, s.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

void sleep_ms(int ms) {
  if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

int int_arg(const std::vector<std::string>& args, std::size_t& i) {
  if (i + 1 >= args.size()) {
    throw Error(ErrorCode::InvalidArgument, "missing value for " + args[i]);
  }
  return std::stoi(args[++i]);
}

class MockServer {
 public:
  MockServer(int out_fd, const MockWorkerOptions& options) : out_(out_fd), options_(options) {}

  bool send(const ControlMessage& msg) { return write_all(out_, protocol::encode_frame(msg)); }

  // Returns false when the loop should stop.
  bool handle(const ControlMessage& req) {
    ++requests_;
    if (options_.crash_after != 0 && requests_ >= options_.crash_after) ::_exit(70);
    try {
      switch (req.kind) {
        case MessageKind::Hello: return on_hello(req);
        case MessageKind::LoadModel: return send(ok(req.msg_id));
        case MessageKind::Encode: return on_encode(req);
        case MessageKind::Decode: return on_decode(req);
        case MessageKind::ReleaseEmbedding: return on_release(req);
        case MessageKind::Shutdown:
          planes_.clear();
          send(ok(req.msg_id));
          return false;
        default:
          return send(protocol::make_error(req.msg_id, "UnknownKind",
                                           "not a request kind"));
      }
    } catch (const Error& e) {
      return send(protocol::make_error(req.msg_id, std::string(to_string(e.code())), e.what()));
    }
  }

 private:
  ControlMessage ok(std::uint64_t id) const {
    ControlMessage m = protocol::make_ok(id);
    m.retained = planes_.size();
    return m;
  }

  bool on_hello(const ControlMessage& req) {
    sleep_ms(options_.hello_delay_ms);
    ControlMessage m = ok(req.msg_id);
    m.version = options_.protocol_version;
    m.model_id = options_.model_id;
    return send(m);
  }

  bool on_encode(const ControlMessage& req) {
    if (!req.tensor) {
      return send(protocol::make_error(req.msg_id, "BadPrompt", "Encode without tensor"));
    }
    const auto start = std::chrono::steady_clock::now();
    ControlMessage progress;
    progress.msg_id = req.msg_id;
    progress.kind = MessageKind::Progress;
    progress.percent = 0;
    progress.phase = "encode";
    if (!send(progress)) return false;

    const std::vector<std::uint8_t> payload = protocol::shm_read(*req.tensor);
    IntensityPlane plane = plane_from_tensor(req.tensor->dtype, req.tensor->shape, payload);
    sleep_ms(options_.encode_delay_ms);

    const std::string handle = "emb-" + std::to_string(++next_handle_);
    const std::uint64_t bytes = plane.values.size() * sizeof(float);
    planes_.emplace(handle, std::move(plane));
    ControlMessage m = ok(req.msg_id);
    m.embedding_handle = handle;
    m.bytes = bytes;
    m.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return send(m);
  }

  bool on_decode(const ControlMessage& req) {
    const auto it = req.embedding_handle ? planes_.find(*req.embedding_handle) : planes_.end();
    if (it == planes_.end()) {
      return send(protocol::make_error(req.msg_id, "BadHandle", "unknown embedding handle"));
    }
    const IntensityPlane& plane = it->second;
    if (!req.prompt || !req.scale || !req.output ||
        req.output->shape != std::vector<std::uint64_t>{static_cast<std::uint64_t>(plane.height),
                                                        static_cast<std::uint64_t>(plane.width)}) {
      return send(protocol::make_error(req.msg_id, "BadPrompt",
                                       "Decode needs prompt, scale and a matching output"));
    }
    const auto start = std::chrono::steady_clock::now();
    sleep_ms(options_.decode_delay_ms);
    const Bitmask mask = mock_segment(plane, local_prompt(*req.prompt, *req.scale));
    protocol::TensorHeader header =
        protocol::shm_fill(req.output->shm_name, protocol::DType::U8, req.output->shape, mask.bits());
    if (options_.corrupt_masks && !mask.bits().empty()) {
      protocol::SharedSegment seg = protocol::SharedSegment::open(header.shm_name, true);
      seg.data()[0] ^= 0xFF;
    }
    ControlMessage m = ok(req.msg_id);
    m.tensor = header;
    m.score = 1.0;
    m.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return send(m);
  }

  bool on_release(const ControlMessage& req) {
    if (!req.embedding_handle || planes_.erase(*req.embedding_handle) == 0) {
      return send(protocol::make_error(req.msg_id, "BadHandle", "unknown embedding handle"));
    }
    return send(ok(req.msg_id));
  }

  int out_;
  MockWorkerOptions options_;
  std::map<std::string, IntensityPlane> planes_;
  std::uint64_t next_handle_ = 0;
  std::uint64_t requests_ = 0;
};

}  // namespace

MockWorkerOptions parse_mock_worker_args(const std::vector<std::string>& args) {
  MockWorkerOptions o;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--model") {
      if (i + 1 >= args.size()) throw Error(ErrorCode::InvalidArgument, "missing value for --model");
      o.model_id = args[++i];
    } else if (a == "--crash-after") {
      o.crash_after = static_cast<std::uint64_t>(int_arg(args, i));
    } else if (a == "--encode-delay-ms") {
      o.encode_delay_ms = int_arg(args, i);
    } else if (a == "--decode-delay-ms") {
      o.decode_delay_ms = int_arg(args, i);
    } else if (a == "--hello-delay-ms") {
      o.hello_delay_ms = int_arg(args, i);
    } else if (a == "--protocol-version") {
      o.protocol_version = int_arg(args, i);
    } else if (a == "--corrupt-masks") {
      o.corrupt_masks = true;
    } else if (a == "--weights") {
      ++i;  // accepted for command-line parity with real workers
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown argument " + a);
    }
  }
  return o;
}

int run_mock_worker(int in_fd, int out_fd, const MockWorkerOptions& options) {
  MockServer server(out_fd, options);
  protocol::FrameReader reader;
  std::string line;
  char buf[4096];
  for (;;) {
    while (reader.next_line(line)) {
      ControlMessage req;
      try {
        req = protocol::decode_frame(line);
      } catch (const Error& e) {
        // The request id is unknown, so the error carries id 0.
        if (!server.send(protocol::make_error(0, std::string(to_string(e.code())), e.what()))) {
          return 1;
        }
        continue;
      }
      if (!server.handle(req)) return 0;
    }
    const ssize_t n = ::read(in_fd, buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR) continue;
      return 1;
    }
    if (n == 0) return 0;
    reader.feed(std::string_view(buf, static_cast<std::size_t>(n)));
  }
}

}  // namespace promptseg::worker
