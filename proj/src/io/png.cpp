#include "lfdeocc/io/png.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

namespace lfdeocc::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

struct RawPng {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
  char message[256] = {};
};

void on_error(png_structp png, png_const_charp msg) {
  auto* raw = static_cast<RawPng*>(png_get_error_ptr(png));
  std::snprintf(raw->message, sizeof raw->message, "%s", msg);
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

// No objects with destructors live in this frame, so the longjmp from libpng
// on error is safe.
bool decode(std::FILE* file, RawPng* raw) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, raw, on_error, on_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, file);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_swap(png);  // host order, little-endian targets only
  png_read_update_info(png, info);

  raw->width = png_get_image_width(png, info);
  raw->height = png_get_image_height(png, info);
  raw->channels = png_get_channels(png, info);
  raw->bit_depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  raw->pixels.resize(row_bytes * raw->height);
  raw->rows.resize(raw->height);
  for (png_uint_32 y = 0; y < raw->height; ++y) raw->rows[y] = raw->pixels.data() + y * row_bytes;
  png_read_image(png, raw->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool encode(std::FILE* file, RawPng* raw) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, raw, on_error, on_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  static constexpr int kColor[] = {PNG_COLOR_TYPE_GRAY, PNG_COLOR_TYPE_GRAY_ALPHA, PNG_COLOR_TYPE_RGB,
                                   PNG_COLOR_TYPE_RGB_ALPHA};
  png_init_io(png, file);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, raw->width, raw->height, 8, kColor[raw->channels - 1], PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, raw->rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

std::uint8_t to_byte(float v) {
  const float c = std::isnan(v) ? 0.0f : std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

float quantize8(float v) { return static_cast<float>(to_byte(v)) / 255.0f; }

Image read_png(const std::filesystem::path& path) {
  File file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError(path, "cannot open for reading");
  png_byte signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw IoError(path, "not a PNG file");
  }
  std::rewind(file.get());
  RawPng raw;
  if (!decode(file.get(), &raw)) {
    throw IoError(path, std::string("PNG decode failed") + (raw.message[0] ? std::string(": ") + raw.message : ""));
  }
  const std::size_t h = raw.height;
  const std::size_t w = raw.width;
  const std::size_t c = static_cast<std::size_t>(raw.channels);
  Image img(h, w, c);
  const bool wide = raw.bit_depth == 16;
  for (std::size_t y = 0; y < h; ++y) {
    const png_byte* row = raw.rows[y];
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < c; ++k) {
        const std::size_t i = x * c + k;
        if (wide) {
          std::uint16_t v;
          std::memcpy(&v, row + 2 * i, 2);
          img.at(k, y, x) = static_cast<float>(v) / 65535.0f;
        } else {
          img.at(k, y, x) = static_cast<float>(row[i]) / 255.0f;
        }
      }
    }
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.empty() || img.channels() < 1 || img.channels() > 4) {
    throw IoError(path, "can only write non-empty images with 1 to 4 channels");
  }
  RawPng raw;
  raw.width = static_cast<png_uint_32>(img.width());
  raw.height = static_cast<png_uint_32>(img.height());
  raw.channels = static_cast<int>(img.channels());
  const std::size_t c = img.channels();
  const std::size_t row_bytes = img.width() * c;
  raw.pixels.resize(row_bytes * img.height());
  raw.rows.resize(img.height());
  for (std::size_t y = 0; y < img.height(); ++y) {
    raw.rows[y] = raw.pixels.data() + y * row_bytes;
    for (std::size_t x = 0; x < img.width(); ++x) {
      for (std::size_t k = 0; k < c; ++k) raw.rows[y][x * c + k] = to_byte(img.at(k, y, x));
    }
  }
  File file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError(path, "cannot open for writing");
  if (!encode(file.get(), &raw)) {
    throw IoError(path, std::string("PNG encode failed") + (raw.message[0] ? std::string(": ") + raw.message : ""));
  }
  if (std::fflush(file.get()) != 0) throw IoError(path, "write failed");
}

}  // namespace lfdeocc::io
