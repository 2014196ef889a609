#include "png_io.hpp"

#include <png.h>

#include <cstdio>
#include <csetjmp>
#include <memory>

#include "polarpose/error.hpp"

namespace polarpose::detail {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_raise(png_structp png, png_const_charp msg) {
  // Jump back to the setjmp point; message retrieval happens there.
  (void)msg;
  png_longjmp(png, 1);
}

void png_ignore_warning(png_structp, png_const_charp) {}

}  // namespace

PngImage read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw LoadError("cannot open " + path.string());

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_raise, png_ignore_warning);
  if (!png) throw LoadError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw LoadError("libpng init failed");
  }

  PngImage out;
  std::vector<png_bytep> row_ptrs;
  std::vector<std::uint8_t> raw;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw LoadError("corrupt PNG: " + path.string());
  }

  png_init_io(png, file.get());
  png_read_info(png, info);

  png_byte color = png_get_color_type(png, info);
  png_byte depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  if (out.channels != 1 && out.channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw LoadError("unsupported PNG channel count in " + path.string());
  }

  const std::size_t stride = png_get_rowbytes(png, info);
  raw.resize(stride * out.height);
  row_ptrs.resize(out.height);
  for (int y = 0; y < out.height; ++y) row_ptrs[y] = raw.data() + stride * y;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t count =
      static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.pixels.resize(count);
  if (out.bit_depth == 16) {
    for (std::size_t i = 0; i < count; ++i)  // PNG stores 16-bit big-endian
      out.pixels[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
  } else {
    for (std::size_t i = 0; i < count; ++i) out.pixels[i] = raw[i];
  }
  return out;
}

void write_png(const std::filesystem::path& path, int width, int height,
               int channels, int bit_depth, const std::uint16_t* pixels) {
  if (channels != 1 && channels != 3)
    throw SaveError("PNG writer supports 1 or 3 channels");
  if (bit_depth != 8 && bit_depth != 16)
    throw SaveError("PNG writer supports 8 or 16 bit depth");

  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw SaveError("cannot write " + path.string());

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_raise, png_ignore_warning);
  if (!png) throw SaveError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw SaveError("libpng init failed");
  }

  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  std::vector<std::uint8_t> raw;
  std::vector<png_bytep> row_ptrs;
  raw.resize(count * (bit_depth / 8));
  if (bit_depth == 16) {
    for (std::size_t i = 0; i < count; ++i) {
      raw[2 * i] = static_cast<std::uint8_t>(pixels[i] >> 8);
      raw[2 * i + 1] = static_cast<std::uint8_t>(pixels[i] & 0xff);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i)
      raw[i] = static_cast<std::uint8_t>(pixels[i] & 0xff);
  }
  const std::size_t stride =
      static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  row_ptrs.resize(height);
  for (int y = 0; y < height; ++y) row_ptrs[y] = raw.data() + stride * y;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw SaveError("PNG write failed: " + path.string());
  }

  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, bit_depth,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace polarpose::detail
