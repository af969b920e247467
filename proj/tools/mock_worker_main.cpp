// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

// Deterministic stand-in for an inference worker; speaks the worker
// protocol on stdin/stdout.

#include <unistd.h>

#include <iostream>
#include <string>
#include <vector>

#include "promptseg/error.hpp"
#include "promptseg/worker/mock_worker.hpp"

int main(int argc, char** argv) {
  try {
    const std::vector<std::string> args(argv + 1, argv + argc);
    const auto options = promptseg::worker::parse_mock_worker_args(args);
    return promptseg::worker::run_mock_worker(STDIN_FILENO, STDOUT_FILENO, options);
  } catch (const promptseg::Error& e) {
    std::cerr << "promptseg-mock-worker: " << e.what() << '\n';
    return 1;
  }
}
