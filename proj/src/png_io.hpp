#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace polarpose::detail {

// Decoded PNG with samples widened to uint16 regardless of stored depth;
// bit_depth records the file's depth (8 or 16) for normalization.
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 (gray) or 3 (rgb); alpha is stripped on read
  int bit_depth = 0;
  std::vector<std::uint16_t> pixels;  // row-major, interleaved

  std::uint16_t max_value() const { return bit_depth == 8 ? 255 : 65535; }
};

PngImage read_png(const std::filesystem::path& path);

// channels in {1, 3}, bit_depth in {8, 16}; values must fit the depth.
void write_png(const std::filesystem::path& path, int width, int height,
               int channels, int bit_depth, const std::uint16_t* pixels);

}  // namespace polarpose::detail
