// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "seed_file.hpp"

#include <charconv>

#include "promptseg/error.hpp"
#include "promptseg/image_io.hpp"

namespace promptseg::cli {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

int to_int(std::string_view s, int line) {
  s = trim(s);
  int v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    throw Error(ErrorCode::InvalidArgument,
                "seed line " + std::to_string(line) + ": '" + std::string(s) + "' is not an integer");
  }
  return v;
}

}  // namespace

std::vector<SeedRow> parse_seed_csv(std::string_view text) {
  std::vector<SeedRow> rows;
  int line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;

    std::vector<std::string_view> f;
    for (std::size_t pos = 0;;) {
      const std::size_t comma = line.find(',', pos);
      f.push_back(trim(line.substr(pos, comma == std::string_view::npos ? comma : comma - pos)));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (rows.empty() && f[0] == "kind") continue;

    SeedRow row;
    row.line = line_no;
    if (f[0] == "point" && (f.size() == 3 || f.size() == 4)) {
      row.seed = Seed::at(to_int(f[1], line_no), to_int(f[2], line_no));
      if (f.size() == 4) row.slice = to_int(f[3], line_no);
    } else if (f[0] == "box" && (f.size() == 5 || f.size() == 6)) {
      row.seed = Seed::boxed(Region{to_int(f[1], line_no), to_int(f[2], line_no),
                                    to_int(f[3], line_no), to_int(f[4], line_no)});
      if (f.size() == 6) row.slice = to_int(f[5], line_no);
    } else {
      throw Error(ErrorCode::InvalidArgument,
                  "seed line " + std::to_string(line_no) +
                      ": expected point,x,y[,slice] or box,x,y,w,h[,slice]");
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<SeedRow> read_seed_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_seed_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace promptseg::cli
