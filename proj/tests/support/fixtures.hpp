#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lfdeocc/light_field.hpp"
#include "lfdeocc/mask_embed.hpp"
#include "lfdeocc/nn/tensor.hpp"
#include "lfdeocc/training.hpp"

namespace lfdeocc::fixtures {

/// A continuous texture: per channel, 0.5 plus a sum of sinusoids whose
/// amplitudes add up to at most 0.4, so values stay inside [0.1, 0.9].
class Texture {
 public:
  struct Wave {
    double fy, fx, phase, amplitude;
  };

  /// max_freq is in cycles per pixel.
  static Texture random(std::uint64_t seed, std::size_t channels = 3, std::size_t waves = 4, double max_freq = 0.08);

  double operator()(std::size_t c, double y, double x) const;
  std::size_t channels() const { return waves_.size(); }

 private:
  std::vector<std::vector<Wave>> waves_;
};

/// out(c, y, x) = tex(c, y + dy, x + dx)
Image render(const Texture& tex, std::size_t height, std::size_t width, double dy = 0.0, double dx = 0.0);

/// Fronto-parallel plane at the given disparity, rendered analytically:
/// view(offset)(y, x) = tex(y - d * drow, x - d * dcol).
LightField plane_light_field(const Texture& tex, AngularGrid grid, std::size_t height, std::size_t width,
                             double disparity);

/// Fence occluder: binary alpha of horizontal and vertical bars, rgb is
/// uniform noise in [lo, hi].
MaskAsset fence_mask(std::size_t height, std::size_t width, std::uint64_t seed, std::size_t period = 12,
                     std::size_t bar = 3, float lo = 0.0f, float hi = 1.0f);
/// Only vertical bars.
MaskAsset bars_mask(std::size_t height, std::size_t width, std::uint64_t seed, std::size_t period, std::size_t bar);
MaskAsset constant_mask(std::size_t height, std::size_t width, float rgb, float alpha, std::string id = "const");

/// Uniform noise image.
Image noise_image(std::size_t height, std::size_t width, std::size_t channels, std::uint64_t seed, float lo = 0.0f,
                  float hi = 1.0f);

nn::Tensor64 random_tensor64(nn::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0);
nn::Tensor random_tensor(nn::Shape shape, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f);

/// Synthesized desk-scale scenes: smooth textured background planes at a
/// disparity in [-1, 0], one fence occluder layer.
struct DeskScene {
  SynthesisResult synth;
  double background_disparity = 0.0;
};
std::vector<DeskScene> desk_scenes(std::size_t count, std::uint64_t seed, std::size_t size = 64);
std::vector<TrainingSample> to_samples(const std::vector<DeskScene>& scenes);

/// Removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Exact byte comparison of two files.
bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b);
/// Byte comparison of two directory trees (relative paths and contents).
bool same_tree(const std::filesystem::path& a, const std::filesystem::path& b);

}  // namespace lfdeocc::fixtures
