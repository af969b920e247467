// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "promptseg/image.hpp"
#include "promptseg/types.hpp"

namespace promptseg {

/// Decodes PNG (8/16-bit gray or RGB; alpha dropped, palettes expanded) or
/// TIFF (8/16-bit or 32-bit float, gray or RGB, one slice per directory).
/// Format is sniffed from the magic bytes.
ImageStack decode_image(std::span<const std::uint8_t> bytes, const std::string& id);
ImageStack load_image(const std::filesystem::path& path, const std::string& id);

/// Single-channel PNG, bit depth 8 or 16. Samples are given in native order.
std::vector<std::uint8_t> encode_png_gray8(int width, int height,
                                           std::span<const std::uint8_t> pixels);
std::vector<std::uint8_t> encode_png_gray16(int width, int height,
                                            std::span<const std::uint16_t> pixels);

/// 16-bit label PNG; throws Error(TooManyInstances) if any label > 65535.
std::vector<std::uint8_t> encode_label_png(const LabelImage& labels);
LabelImage decode_label_png(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace promptseg
