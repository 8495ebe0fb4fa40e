#include "lfdeocc/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lfdeocc {

Image::Image(std::size_t height, std::size_t width, std::size_t channels, float fill)
    : height_(height), width_(width), channels_(channels), data_(height * width * channels, fill) {
  if (channels == 0) throw std::invalid_argument("Image: channel count must be at least 1");
  if (!std::isfinite(fill)) throw std::invalid_argument("Image: fill value must be finite");
}

Image::Image(std::size_t height, std::size_t width, std::size_t channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (channels == 0) throw std::invalid_argument("Image: channel count must be at least 1");
  if (data_.size() != height * width * channels) {
    throw std::invalid_argument("Image: data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(height) + "x" +
                                std::to_string(width) + "x" + std::to_string(channels));
  }
  if (!all_finite()) throw std::invalid_argument("Image: data contains non-finite values");
}

bool Image::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Image crop(const Image& img, std::size_t top, std::size_t left, std::size_t height, std::size_t width) {
  if (top + height > img.height() || left + width > img.width()) {
    throw std::invalid_argument("crop: window exceeds image bounds");
  }
  Image out(height, width, img.channels());
  for (std::size_t c = 0; c < img.channels(); ++c) {
    for (std::size_t y = 0; y < height; ++y) {
      const float* src = &img.plane(c)[(top + y) * img.width() + left];
      std::copy(src, src + width, &out.plane(c)[y * width]);
    }
  }
  return out;
}

Image extract_channel(const Image& img, std::size_t channel) {
  if (channel >= img.channels()) throw std::invalid_argument("extract_channel: channel out of range");
  Image out(img.height(), img.width(), 1);
  std::ranges::copy(img.plane(channel), out.plane(0).begin());
  return out;
}

Image to_rgb(const Image& img) {
  switch (img.channels()) {
    case 3:
      return img;
    case 1:
    case 2: {
      Image out(img.height(), img.width(), 3);
      for (std::size_t c = 0; c < 3; ++c) std::ranges::copy(img.plane(0), out.plane(c).begin());
      return out;
    }
    case 4: {
      Image out(img.height(), img.width(), 3);
      for (std::size_t c = 0; c < 3; ++c) std::ranges::copy(img.plane(c), out.plane(c).begin());
      return out;
    }
    default:
      throw std::invalid_argument("to_rgb: unsupported channel count " + std::to_string(img.channels()));
  }
}

}  // namespace lfdeocc
