#pragma once

#include <filesystem>
#include <stdexcept>

#include "lfdeocc/image.hpp"

namespace lfdeocc::io {

class IoError : public std::runtime_error {
 public:
  IoError(std::filesystem::path path, const std::string& message)
      : std::runtime_error(path.string() + ": " + message), path_(std::move(path)) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Reads an 8- or 16-bit PNG into [0, 1] floats. Palette and low-bit gray
/// images are expanded; a tRNS chunk becomes an alpha channel. The channel
/// count follows the file (1 gray, 2 gray+alpha, 3 RGB, 4 RGBA).
Image read_png(const std::filesystem::path& path);

/// Writes an 8-bit PNG with 1 to 4 channels; values are clamped to [0, 1]
/// and quantized as round(v * 255). Output bytes depend only on the image.
void write_png(const std::filesystem::path& path, const Image& img);

/// The value write_png stores for v, mapped back to [0, 1].
float quantize8(float v);

}  // namespace lfdeocc::io
