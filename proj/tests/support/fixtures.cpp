#include "fixtures.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

namespace lfdeocc::fixtures {

namespace fs = std::filesystem;

Texture Texture::random(std::uint64_t seed, std::size_t channels, std::size_t waves, double max_freq) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq(-max_freq, max_freq);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> weight(0.5, 1.0);
  Texture t;
  t.waves_.resize(channels);
  for (auto& ws : t.waves_) {
    double total = 0.0;
    for (std::size_t k = 0; k < waves; ++k) {
      ws.push_back({freq(rng), freq(rng), phase(rng), weight(rng)});
      total += ws.back().amplitude;
    }
    for (Wave& w : ws) w.amplitude *= 0.4 / total;
  }
  return t;
}

double Texture::operator()(std::size_t c, double y, double x) const {
  double v = 0.5;
  for (const Wave& w : waves_[c]) v += w.amplitude * std::sin(2.0 * std::numbers::pi * (w.fy * y + w.fx * x) + w.phase);
  return v;
}

Image render(const Texture& tex, std::size_t height, std::size_t width, double dy, double dx) {
  Image img(height, width, tex.channels());
  for (std::size_t c = 0; c < tex.channels(); ++c) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        img.at(c, y, x) = static_cast<float>(tex(c, static_cast<double>(y) + dy, static_cast<double>(x) + dx));
      }
    }
  }
  return img;
}

LightField plane_light_field(const Texture& tex, AngularGrid grid, std::size_t height, std::size_t width,
                             double disparity) {
  std::vector<Image> views;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const AngularOffset o = grid.offset(i);
    views.push_back(render(tex, height, width, -disparity * o.drow, -disparity * o.dcol));
  }
  return LightField(grid, std::move(views));
}

Image noise_image(std::size_t height, std::size_t width, std::size_t channels, std::uint64_t seed, float lo, float hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  Image img(height, width, channels);
  for (float& v : img.data()) v = u(rng);
  return img;
}

MaskAsset fence_mask(std::size_t height, std::size_t width, std::uint64_t seed, std::size_t period, std::size_t bar,
                     float lo, float hi) {
  MaskAsset m{noise_image(height, width, 3, seed, lo, hi), Image(height, width, 1), "fence"};
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      m.alpha.at(0, y, x) = (y % period < bar || x % period < bar) ? 1.0f : 0.0f;
    }
  }
  return m;
}

MaskAsset bars_mask(std::size_t height, std::size_t width, std::uint64_t seed, std::size_t period, std::size_t bar) {
  MaskAsset m{noise_image(height, width, 3, seed), Image(height, width, 1), "bars"};
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) m.alpha.at(0, y, x) = x % period < bar ? 1.0f : 0.0f;
  }
  return m;
}

MaskAsset constant_mask(std::size_t height, std::size_t width, float rgb, float alpha, std::string id) {
  return {Image(height, width, 3, rgb), Image(height, width, 1, alpha), std::move(id)};
}

nn::Tensor64 random_tensor64(nn::Shape shape, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  nn::Tensor64 t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

nn::Tensor random_tensor(nn::Shape shape, std::uint64_t seed, float lo, float hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  nn::Tensor t(std::move(shape));
  for (float& v : t.data()) v = u(rng);
  return t;
}

std::vector<DeskScene> desk_scenes(std::size_t count, std::uint64_t seed, std::size_t size) {
  const AngularGrid grid{5, 5};
  std::vector<MaskAsset> masks;
  for (std::size_t k = 0; k < 4; ++k) {
    masks.push_back(fence_mask(48, 48, derive_seed(seed, 1000 + k), 10 + 2 * k, 3));
    masks.back().id = "fence" + std::to_string(k);
  }
  SynthesisConfig cfg;
  cfg.layer_count = 1;
  std::vector<DeskScene> out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t s = derive_seed(seed, i);
    std::mt19937_64 rng(s);
    const double d = std::uniform_real_distribution<double>(-1.0, 0.0)(rng);
    const LightField lf = plane_light_field(Texture::random(derive_seed(s, 1)), grid, size, size, d);
    cfg.seed = derive_seed(s, 2);
    out.push_back({synthesize(lf, masks, cfg), d});
  }
  return out;
}

std::vector<TrainingSample> to_samples(const std::vector<DeskScene>& scenes) {
  std::vector<TrainingSample> out;
  for (const DeskScene& s : scenes) out.push_back({s.synth.occluded, s.synth.gt});
  return out;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("lfdeocc_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary);
  std::ifstream fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  const std::vector<char> da((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::vector<char> db((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  return da == db;
}

bool same_tree(const fs::path& a, const fs::path& b) {
  auto list = [](const fs::path& root) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root));
    }
    std::ranges::sort(files);
    return files;
  };
  const auto fa = list(a);
  if (fa != list(b) || fa.empty()) return false;
  return std::ranges::all_of(fa, [&](const fs::path& rel) { return same_bytes(a / rel, b / rel); });
}

}  // namespace lfdeocc::fixtures
