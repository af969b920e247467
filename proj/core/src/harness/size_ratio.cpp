// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/harness/size_ratio.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "promptseg/error.hpp"
#include "promptseg/session/rle.hpp"
#include "promptseg/session/session.hpp"
#include "promptseg/worker/registry.hpp"

namespace promptseg::harness {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Splits one CSV record; quoted fields may contain separators and newlines.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool quoted = false, any = false;
  for (int ch; (ch = in.get()) != EOF;) {
    any = true;
    const char c = static_cast<char>(ch);
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      fields.push_back(std::move(field));
      return true;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (any) fields.push_back(std::move(field));
  return any;
}

CellResult run_cell(const HarnessConfig& cfg, int object_size, int image_size, std::size_t ordinal,
                    const std::shared_ptr<worker::WorkerManager>& workers) {
  CellResult cell{object_size, image_size, 0.0, 0.0, {}};
  try {
    const Bitmask truth = synth_object_mask(image_size, object_size, cfg.object_kind);
    const Region box = mask_bounds(truth);
    auto stack = std::make_shared<ImageStack>();
    stack->id = "harness-" + std::to_string(image_size) + "-" + std::to_string(object_size);
    stack->slices.push_back(synth_image(truth, cfg.background, cfg.foreground, stack->id));
    SessionOptions opts;
    opts.whole_image_embed = cfg.whole_image_embed;
    double iou_sum = 0, encode_sum = 0;
    for (int t = 0; t < cfg.trials; ++t) {
      Session session("harness-" + std::to_string(ordinal) + "-" + std::to_string(t), stack,
                      cfg.backend, workers, opts);
      const Annotation a =
          session.annotate_live(Prompt::box_prompt(box, Region{0, 0, image_size, image_size}));
      iou_sum += iou(to_image_frame(a.mask, image_size, image_size), truth);
      encode_sum += session.counters().encode_seconds;
    }
    cell.iou = iou_sum / cfg.trials;
    cell.encode_s = encode_sum / cfg.trials;
  } catch (const Error& e) {
    cell.iou = 0;
    cell.error = std::string(to_string(e.code())) + ": " + e.what();
  }
  return cell;
}

}  // namespace

std::vector<int> HarnessConfig::default_object_sizes() {
  std::vector<int> out;
  for (int s = 26; s <= 442; s += 26) out.push_back(s);
  return out;
}

void HarnessConfig::validate() const {
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be >= 1");
  if (image_sizes.empty() || object_sizes.empty()) {
    throw Error(ErrorCode::InvalidArgument, "empty size list");
  }
  for (int img : image_sizes) {
    for (int obj : object_sizes) {
      if (obj < 1 || obj > img) {
        throw Error(ErrorCode::InvalidArgument, "object " + std::to_string(obj) +
                                                    " does not fit image " + std::to_string(img));
      }
    }
  }
  if (background >= foreground) {
    throw Error(ErrorCode::InvalidArgument, "foreground must be brighter than background");
  }
}

std::vector<std::vector<double>> MatrixResult::scores() const {
  std::vector<std::vector<double>> out(object_sizes.size(),
                                       std::vector<double>(image_sizes.size(), 0.0));
  for (std::size_t r = 0; r < object_sizes.size(); ++r) {
    for (std::size_t c = 0; c < image_sizes.size(); ++c) out[r][c] = at(r, c).iou;
  }
  return out;
}

Bitmask synth_object_mask(int image_size, int object_size, ObjectKind kind) {
  if (object_size < 1 || object_size > image_size) {
    throw Error(ErrorCode::InvalidArgument, "object does not fit the image");
  }
  Bitmask m(image_size, image_size);
  const int x0 = (image_size - object_size) / 2;
  const double c = x0 + object_size / 2.0;
  const double r2 = (object_size / 2.0) * (object_size / 2.0);
  for (int y = x0; y < x0 + object_size; ++y) {
    for (int x = x0; x < x0 + object_size; ++x) {
      if (kind == ObjectKind::Square) {
        m.set(x, y);
      } else {
        const double dx = x + 0.5 - c, dy = y + 0.5 - c;
        if (dx * dx + dy * dy <= r2) m.set(x, y);
      }
    }
  }
  return m;
}

ImageRef synth_image(const Bitmask& object, std::uint8_t background, std::uint8_t foreground,
                     const std::string& id) {
  std::vector<std::uint8_t> px(object.bits().size());
  std::transform(object.bits().begin(), object.bits().end(), px.begin(),
                 [&](std::uint8_t b) { return b ? foreground : background; });
  return make_gray8(id, object.width(), object.height(), std::move(px));
}

Region mask_bounds(const Bitmask& mask) {
  int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) throw Error(ErrorCode::EmptyMask, "mask has no pixels");
  return Region{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

double iou(const Bitmask& a, const Bitmask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::InvalidArgument, "iou of differently sized masks");
  }
  std::int64_t inter = 0, uni = 0;
  const auto& x = a.bits();
  const auto& y = b.bits();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool p = x[i] != 0, q = y[i] != 0;
    inter += p && q;
    uni += p || q;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

MatrixResult run_matrix(const HarnessConfig& cfg, std::shared_ptr<worker::WorkerManager> workers) {
  cfg.validate();
  MatrixResult m;
  m.object_sizes = cfg.object_sizes;
  m.image_sizes = cfg.image_sizes;
  const std::size_t cols = cfg.image_sizes.size();
  const std::size_t n = cfg.object_sizes.size() * cols;
  m.cells.resize(n);
  const auto cell_at = [&](std::size_t i) {
    return run_cell(cfg, cfg.object_sizes[i / cols], cfg.image_sizes[i % cols], i, workers);
  };
  const bool parallel = cfg.parallel && cfg.backend == worker::kMockModelId;
  const unsigned threads = parallel ? std::max(1u, std::thread::hardware_concurrency()) : 1u;
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) m.cells[i] = cell_at(i);
    return m;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) m.cells[i] = cell_at(i);
    });
  }
  for (auto& th : pool) th.join();
  return m;
}

std::vector<std::vector<bool>> bold_cells(const std::vector<std::vector<double>>& scores) {
  std::vector<std::vector<bool>> out;
  for (const auto& row : scores) {
    const double mx = row.empty() ? 0.0 : *std::max_element(row.begin(), row.end());
    std::vector<bool> b;
    for (double v : row) b.push_back(v == mx || v >= 0.95);
    out.push_back(std::move(b));
  }
  return out;
}

std::string format_table(const MatrixResult& m) {
  const auto bold = bold_cells(m.scores());
  std::ostringstream out;
  char buf[64];
  out << "object \\ image";
  for (int s : m.image_sizes) {
    std::snprintf(buf, sizeof buf, " %11s", (std::to_string(s) + "x" + std::to_string(s)).c_str());
    out << buf;
  }
  out << '\n';
  for (std::size_t r = 0; r < m.object_sizes.size(); ++r) {
    std::snprintf(buf, sizeof buf, "%-14s",
                  (std::to_string(m.object_sizes[r]) + "x" + std::to_string(m.object_sizes[r])).c_str());
    out << buf;
    for (std::size_t c = 0; c < m.image_sizes.size(); ++c) {
      char cell[32];
      std::snprintf(cell, sizeof cell, bold[r][c] ? "*%.3f*" : "%.3f", m.at(r, c).iou);
      std::snprintf(buf, sizeof buf, " %11s", cell);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

void write_csv(const MatrixResult& m, std::ostream& out) {
  out << "object_size,image_size,iou,encode_s,error\n";
  for (const CellResult& c : m.cells) {
    out << c.object_size << ',' << c.image_size << ',' << fmt17(c.iou) << ',' << fmt17(c.encode_s)
        << ',' << csv_quote(c.error) << '\n';
  }
}

MatrixResult read_csv(std::istream& in) {
  std::vector<std::string> f;
  if (!read_record(in, f) || f.size() != 5 || f[0] != "object_size") {
    throw Error(ErrorCode::InvalidArgument, "not a size-ratio CSV");
  }
  MatrixResult m;
  std::vector<CellResult> cells;
  while (read_record(in, f)) {
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != 5) throw Error(ErrorCode::InvalidArgument, "CSV row needs 5 fields");
    try {
      cells.push_back(CellResult{std::stoi(f[0]), std::stoi(f[1]), std::stod(f[2]),
                                 std::stod(f[3]), f[4]});
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::InvalidArgument, "bad number in CSV row");
    }
  }
  for (const CellResult& c : cells) {
    if (std::find(m.object_sizes.begin(), m.object_sizes.end(), c.object_size) == m.object_sizes.end()) {
      m.object_sizes.push_back(c.object_size);
    }
    if (std::find(m.image_sizes.begin(), m.image_sizes.end(), c.image_size) == m.image_sizes.end()) {
      m.image_sizes.push_back(c.image_size);
    }
  }
  if (cells.size() != m.object_sizes.size() * m.image_sizes.size()) {
    throw Error(ErrorCode::InvalidArgument, "CSV does not describe a full matrix");
  }
  m.cells.resize(cells.size());
  const std::size_t cols = m.image_sizes.size();
  for (const CellResult& c : cells) {
    const std::size_t r = static_cast<std::size_t>(
        std::find(m.object_sizes.begin(), m.object_sizes.end(), c.object_size) - m.object_sizes.begin());
    const std::size_t k = static_cast<std::size_t>(
        std::find(m.image_sizes.begin(), m.image_sizes.end(), c.image_size) - m.image_sizes.begin());
    m.cells[r * cols + k] = c;
  }
  return m;
}

const std::vector<std::vector<double>>& reference_scores() {
  static const std::vector<std::vector<double>> kScores{
      {0.808, 0.828, 0.828, 0.828, 0.828}, {0.927, 0.930, 0.930, 0.930, 0.930},
      {0.956, 0.944, 0.933, 0.933, 0.933}, {0.953, 0.959, 0.929, 0.929, 0.929},
      {0.968, 0.958, 0.932, 0.920, 0.920}, {0.967, 0.969, 0.927, 0.903, 0.903},
      {0.969, 0.974, 0.936, 0.912, 0.873}, {0.969, 0.977, 0.929, 0.892, 0.871},
      {0.975, 0.970, 0.957, 0.921, 0.868}, {0.611, 0.976, 0.946, 0.898, 0.879},
      {0.612, 0.978, 0.940, 0.911, 0.898}, {0.542, 0.972, 0.954, 0.907, 0.888},
      {0.429, 0.976, 0.951, 0.922, 0.910}, {0.566, 0.969, 0.965, 0.979, 0.899},
      {0.974, 0.979, 0.976, 0.919, 0.913}, {0.000, 0.976, 0.974, 0.903, 0.891},
      {0.459, 0.983, 0.976, 0.931, 0.907},
  };
  return kScores;
}

double row_max_agreement(const std::vector<std::vector<double>>& scores,
                         const std::vector<std::vector<double>>& reference) {
  if (scores.size() != reference.size() || scores.empty()) {
    throw Error(ErrorCode::InvalidArgument, "matrices differ in row count");
  }
  std::size_t agree = 0;
  for (std::size_t r = 0; r < scores.size(); ++r) {
    const auto& a = scores[r];
    const auto& b = reference[r];
    if (a.size() != b.size() || a.empty()) {
      throw Error(ErrorCode::InvalidArgument, "matrices differ in column count");
    }
    const double ma = *std::max_element(a.begin(), a.end());
    const double mb = *std::max_element(b.begin(), b.end());
    for (std::size_t c = 0; c < a.size(); ++c) {
      if (a[c] == ma && b[c] == mb) {
        ++agree;
        break;
      }
    }
  }
  return static_cast<double>(agree) / static_cast<double>(scores.size());
}

std::vector<EncodeTiming> encode_times(const std::vector<std::string>& backends,
                                       std::shared_ptr<worker::WorkerManager> workers,
                                       int image_size, int trials) {
  const int obj = std::max(1, image_size / 10);
  const Bitmask truth = synth_object_mask(image_size, obj, ObjectKind::Square);
  auto stack = std::make_shared<ImageStack>();
  stack->id = "encode-times";
  stack->slices.push_back(synth_image(truth, 64, 200, stack->id));
  const Region box = mask_bounds(truth);

  std::vector<EncodeTiming> out;
  std::size_t ordinal = 0;
  for (const std::string& id : backends) {
    EncodeTiming row;
    row.model_id = id;
    try {
      row.nominal_s = worker::find_model(id).nominal_encode_s;
      SessionOptions opts;
      opts.whole_image_embed = true;
      double sum = 0;
      for (int t = 0; t < std::max(1, trials); ++t) {
        Session s("encode-times-" + std::to_string(ordinal++), stack, id, workers, opts);
        s.annotate_live(Prompt::box_prompt(box, stack->slices[0]->bounds()));
        sum += s.counters().encode_seconds;
      }
      row.measured_s = sum / std::max(1, trials);
    } catch (const Error& e) {
      row.error = std::string(to_string(e.code())) + ": " + e.what();
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string format_encode_table(const std::vector<EncodeTiming>& rows) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-22s %12s %12s  %s\n", "model", "nominal_s", "measured_s", "note");
  out << buf;
  for (const EncodeTiming& r : rows) {
    std::snprintf(buf, sizeof buf, "%-22s %12.2f %12.3f  %s\n", r.model_id.c_str(), r.nominal_s,
                  r.measured_s, r.error.c_str());
    out << buf;
  }
  return out.str();
}

}  // namespace promptseg::harness
