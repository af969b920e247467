// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "promptseg/types.hpp"

namespace promptseg::cli {

/// One seed row: "point,x,y[,slice]" or "box,x,y,w,h[,slice]".
struct SeedRow {
  /// 1-based line number in the file.
  int line = 0;
  Seed seed;
  int slice = 0;
};

/// Parses seed CSV text. Blank lines, lines starting with '#', and a
/// leading header row whose first field is "kind" are skipped. Throws
/// Error(InvalidArgument) naming the line for a malformed row; bounds are
/// checked later against the image.
std::vector<SeedRow> parse_seed_csv(std::string_view text);
std::vector<SeedRow> read_seed_file(const std::filesystem::path& path);

}  // namespace promptseg::cli
