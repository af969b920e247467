// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/image_io.hpp"

#include <png.h>
#include <tiffio.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>

#include "promptseg/digest.hpp"
#include "promptseg/error.hpp"

namespace promptseg {

namespace {

struct MemReader {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;
};

void png_read_mem(png_structp png, png_bytep out, png_size_t len) {
  auto* r = static_cast<MemReader*>(png_get_io_ptr(png));
  if (r->pos + len > r->data.size()) png_error(png, "truncated PNG");
  std::memcpy(out, r->data.data() + r->pos, len);
  r->pos += len;
}

void png_write_mem(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void png_flush_noop(png_structp) {}

[[noreturn]] void png_fail(png_structp, png_const_charp msg) {
  throw Error(ErrorCode::IoError, std::string("PNG: ") + msg);
}

void png_warn(png_structp, png_const_charp) {}

bool is_little_endian() {
  const std::uint16_t probe = 1;
  std::uint8_t first;
  std::memcpy(&first, &probe, 1);
  return first == 1;
}

ImageStack decode_png(std::span<const std::uint8_t> bytes, const std::string& id) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw Error(ErrorCode::IoError, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  MemReader reader{bytes};
  png_set_read_fn(png, &reader, png_read_mem);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (bit_depth == 16 && is_little_endian()) png_set_swap(png);
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::Unsupported, "unsupported PNG channel layout");
  }
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<std::uint8_t> data(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = data.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  std::vector<std::vector<std::uint8_t>> planes;
  planes.push_back(std::move(data));
  return make_stack(id, width, height, channels, depth == 16 ? BitDepth::U16 : BitDepth::U8,
                    std::move(planes));
}

tsize_t tiff_read(thandle_t h, tdata_t buf, tsize_t size) {
  auto* r = static_cast<MemReader*>(h);
  const std::size_t n = std::min<std::size_t>(size, r->data.size() - r->pos);
  std::memcpy(buf, r->data.data() + r->pos, n);
  r->pos += n;
  return static_cast<tsize_t>(n);
}
tsize_t tiff_write(thandle_t, tdata_t, tsize_t) { return 0; }
toff_t tiff_seek(thandle_t h, toff_t off, int whence) {
  auto* r = static_cast<MemReader*>(h);
  std::size_t base = 0;
  if (whence == SEEK_CUR) base = r->pos;
  if (whence == SEEK_END) base = r->data.size();
  r->pos = std::min<std::size_t>(base + off, r->data.size());
  return r->pos;
}
int tiff_close(thandle_t) { return 0; }
toff_t tiff_size(thandle_t h) { return static_cast<MemReader*>(h)->data.size(); }
int tiff_map(thandle_t, tdata_t*, toff_t*) { return 0; }
void tiff_unmap(thandle_t, tdata_t, toff_t) {}

ImageStack decode_tiff(std::span<const std::uint8_t> bytes, const std::string& id) {
  TIFFSetWarningHandler(nullptr);
  MemReader reader{bytes};
  std::unique_ptr<TIFF, void (*)(TIFF*)> tif(
      TIFFClientOpen("memory", "rm", &reader, tiff_read, tiff_write, tiff_seek,
                     tiff_close, tiff_size, tiff_map, tiff_unmap),
      TIFFClose);
  if (!tif) throw Error(ErrorCode::IoError, "cannot open TIFF");

  int width = 0, height = 0, channels = 0;
  BitDepth depth = BitDepth::U8;
  std::vector<std::vector<std::uint8_t>> planes;
  do {
    std::uint32_t w = 0, h = 0;
    std::uint16_t spp = 1, bps = 8, fmt = SAMPLEFORMAT_UINT, planar = PLANARCONFIG_CONTIG;
    TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
    TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bps);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLEFORMAT, &fmt);
    TIFFGetFieldDefaulted(tif.get(), TIFFTAG_PLANARCONFIG, &planar);
    if (planar != PLANARCONFIG_CONTIG) throw Error(ErrorCode::Unsupported, "planar TIFF");
    if (spp != 1 && spp != 3) throw Error(ErrorCode::Unsupported, "TIFF channel layout");
    BitDepth d;
    if (bps == 8 && fmt == SAMPLEFORMAT_UINT) d = BitDepth::U8;
    else if (bps == 16 && fmt == SAMPLEFORMAT_UINT) d = BitDepth::U16;
    else if (bps == 32 && fmt == SAMPLEFORMAT_IEEEFP) d = BitDepth::F32;
    else throw Error(ErrorCode::Unsupported, "TIFF sample format");
    if (planes.empty()) {
      width = static_cast<int>(w);
      height = static_cast<int>(h);
      channels = spp;
      depth = d;
    } else if (static_cast<int>(w) != width || static_cast<int>(h) != height ||
               spp != channels || d != depth) {
      throw Error(ErrorCode::Unsupported, "TIFF pages differ in shape");
    }
    const std::size_t row = static_cast<std::size_t>(w) * spp * bytes_per_sample(d);
    std::vector<std::uint8_t> plane(row * h);
    for (std::uint32_t y = 0; y < h; ++y) {
      if (TIFFReadScanline(tif.get(), plane.data() + row * y, y) < 0) {
        throw Error(ErrorCode::IoError, "TIFF scanline read failed");
      }
    }
    planes.push_back(std::move(plane));
  } while (TIFFReadDirectory(tif.get()));
  return make_stack(id, width, height, channels, depth, std::move(planes));
}

std::vector<std::uint8_t> encode_png(int width, int height, int depth,
                                     std::span<const std::uint8_t> raw) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw Error(ErrorCode::IoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  png_set_write_fn(png, &out, png_write_mem, png_flush_noop);
  png_set_IHDR(png, info, width, height, depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (depth == 16 && is_little_endian()) png_set_swap(png);
  const std::size_t row = static_cast<std::size_t>(width) * (depth / 8);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(raw.data() + row * y));
  }
  png_write_end(png, nullptr);
  return out;
}

}  // namespace

ImageStack decode_image(std::span<const std::uint8_t> bytes, const std::string& id) {
  static constexpr std::uint8_t kPng[] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kPng, 4) == 0) {
    ImageStack stack = decode_png(bytes, id);
    stack.sha256 = sha256_hex(bytes);
    return stack;
  }
  if (bytes.size() >= 4 && ((bytes[0] == 'I' && bytes[1] == 'I') ||
                            (bytes[0] == 'M' && bytes[1] == 'M'))) {
    ImageStack stack = decode_tiff(bytes, id);
    stack.sha256 = sha256_hex(bytes);
    return stack;
  }
  throw Error(ErrorCode::Unsupported, "unrecognized image format (expected PNG or TIFF)");
}

ImageStack load_image(const std::filesystem::path& path, const std::string& id) {
  const auto bytes = read_file(path);
  ImageStack stack = decode_image(bytes, id);
  stack.source = path.string();
  return stack;
}

std::vector<std::uint8_t> encode_png_gray8(int width, int height,
                                           std::span<const std::uint8_t> pixels) {
  if (pixels.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::InvalidArgument, "pixel count mismatch");
  }
  return encode_png(width, height, 8, pixels);
}

std::vector<std::uint8_t> encode_png_gray16(int width, int height,
                                            std::span<const std::uint16_t> pixels) {
  if (pixels.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::InvalidArgument, "pixel count mismatch");
  }
  const auto* raw = reinterpret_cast<const std::uint8_t*>(pixels.data());
  return encode_png(width, height, 16, std::span<const std::uint8_t>(raw, pixels.size() * 2));
}

std::vector<std::uint8_t> encode_label_png(const LabelImage& labels) {
  std::vector<std::uint16_t> px(labels.labels.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    if (labels.labels[i] > 65535) {
      throw Error(ErrorCode::TooManyInstances, "label value exceeds 16-bit range");
    }
    px[i] = static_cast<std::uint16_t>(labels.labels[i]);
  }
  return encode_png_gray16(labels.width, labels.height, px);
}

LabelImage decode_label_png(std::span<const std::uint8_t> bytes) {
  const ImageStack stack = decode_png(bytes, "labels");
  const auto& img = *stack.slices.front();
  if (img.channels() != 1) throw Error(ErrorCode::Unsupported, "label PNG must be gray");
  LabelImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out.at(x, y) = static_cast<std::uint32_t>(img.sample(x, y, 0));
    }
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace promptseg
