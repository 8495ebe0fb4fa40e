#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lfdeocc {

/// Planar float image. Channel c, row y, column x lives at
/// data[(c * height + y) * width + x]. Intensities are nominally in [0, 1].
class Image {
 public:
  Image() = default;
  Image(std::size_t height, std::size_t width, std::size_t channels, float fill = 0.0f);
  Image(std::size_t height, std::size_t width, std::size_t channels, std::vector<float> data);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t pixel_count() const { return height_ * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * height_ + y) * width_ + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * height_ + y) * width_ + x];
  }

  std::span<float> plane(std::size_t c) { return {data_.data() + c * pixel_count(), pixel_count()}; }
  std::span<const float> plane(std::size_t c) const {
    return {data_.data() + c * pixel_count(), pixel_count()};
  }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  bool all_finite() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<float> data_;
};

/// Copies a rectangular window. Throws std::invalid_argument if the window
/// leaves the image.
Image crop(const Image& img, std::size_t top, std::size_t left, std::size_t height, std::size_t width);

/// Single-channel image holding the chosen channel.
Image extract_channel(const Image& img, std::size_t channel);

/// Gray images are replicated to three channels, RGB is returned as-is, and
/// an alpha channel (2 or 4 channels) is dropped.
Image to_rgb(const Image& img);

}  // namespace lfdeocc
