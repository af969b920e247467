// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace promptseg::worker {

/// Behaviour switches for the mock worker. The fault options exist for
/// tests of the supervising side.
struct MockWorkerOptions {
  std::string model_id = "mock";
  /// Exit abruptly on receipt of the N-th request (0 = never).
  std::uint64_t crash_after = 0;
  int encode_delay_ms = 0;
  int decode_delay_ms = 0;
  /// Delay before answering Hello.
  int hello_delay_ms = 0;
  /// Version announced in the Hello reply.
  int protocol_version = 1;
  /// Flip one mask byte after computing its checksum.
  bool corrupt_masks = false;
};

/// Parses the mock worker's argv (without argv[0]):
///   --model ID --crash-after N --encode-delay-ms N --decode-delay-ms N
///   --hello-delay-ms N --protocol-version N --corrupt-masks
MockWorkerOptions parse_mock_worker_args(const std::vector<std::string>& args);

/// Serves the worker protocol on the given descriptors until Shutdown or
/// end of input. Returns the process exit status.
int run_mock_worker(int in_fd, int out_fd, const MockWorkerOptions& options);

}  // namespace promptseg::worker
