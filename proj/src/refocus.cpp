#include "lfdeocc/refocus.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lfdeocc {

std::size_t Refocused::hole_count() const {
  return static_cast<std::size_t>(std::count(holes.begin(), holes.end(), std::uint8_t{1}));
}

namespace {

// Views are refocused by undoing the parallax of the chosen plane.
ShiftedImage align_view(const LightField& lf, std::size_t index, double disparity) {
  const AngularOffset off = lf.grid().offset(index);
  return shift_view(lf.view(index), off, -disparity);
}

}  // namespace

Refocused sa_average(const LightField& lf, double disparity) {
  const std::size_t h = lf.height();
  const std::size_t w = lf.width();
  const std::size_t channels = lf.channels();
  const std::size_t plane = h * w;
  std::vector<double> sum(plane * channels, 0.0);
  std::vector<double> weight(plane, 0.0);
  for (std::size_t k = 0; k < lf.view_count(); ++k) {
    const ShiftedImage s = align_view(lf, k, disparity);
    auto v = s.validity.data();
    for (std::size_t p = 0; p < plane; ++p) weight[p] += v[p];
    auto d = s.image.data();
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += d[i];
  }
  Refocused out{Image(h, w, channels), std::vector<std::uint8_t>(plane, 0)};
  for (std::size_t p = 0; p < plane; ++p) {
    if (weight[p] <= 0.0) {
      out.holes[p] = 1;
      continue;
    }
    for (std::size_t c = 0; c < channels; ++c) {
      out.image.plane(c)[p] = static_cast<float>(sum[c * plane + p] / weight[p]);
    }
  }
  return out;
}

Refocused sa_median(const LightField& lf, double disparity) {
  const std::size_t h = lf.height();
  const std::size_t w = lf.width();
  const std::size_t channels = lf.channels();
  const std::size_t plane = h * w;
  std::vector<ShiftedImage> aligned;
  aligned.reserve(lf.view_count());
  for (std::size_t k = 0; k < lf.view_count(); ++k) aligned.push_back(align_view(lf, k, disparity));

  Refocused out{Image(h, w, channels), std::vector<std::uint8_t>(plane, 0)};
  std::vector<float> samples;
  samples.reserve(aligned.size());
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t p = 0; p < plane; ++p) {
      samples.clear();
      for (const ShiftedImage& s : aligned) {
        const float valid = s.validity.data()[p];
        if (valid <= 0.5f) continue;
        const float v = s.image.plane(c)[p];
        samples.push_back(valid == 1.0f ? v : static_cast<float>(static_cast<double>(v) / valid));
      }
      if (samples.empty()) {
        out.holes[p] = 1;
        continue;
      }
      const auto mid = samples.begin() + static_cast<std::ptrdiff_t>((samples.size() - 1) / 2);
      std::nth_element(samples.begin(), mid, samples.end());
      out.image.plane(c)[p] = *mid;
    }
  }
  return out;
}

std::vector<Image> focal_stack(const LightField& lf, std::span<const double> disparities) {
  if (disparities.empty()) throw std::invalid_argument("focal_stack: empty disparity list");
  std::vector<Image> stack;
  stack.reserve(disparities.size());
  for (double d : disparities) stack.push_back(sa_average(lf, d).image);
  return stack;
}

double mean_gradient_magnitude(const Image& img, std::optional<std::span<const std::uint8_t>> region) {
  const std::size_t h = img.height();
  const std::size_t w = img.width();
  if (region && region->size() != h * w) throw std::invalid_argument("mean_gradient_magnitude: region size mismatch");
  auto inside = [&](std::size_t y, std::size_t x) { return !region || (*region)[y * w + x] != 0; };
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + 1 < h; ++y) {
    for (std::size_t x = 0; x + 1 < w; ++x) {
      if (!inside(y, x) || !inside(y, x + 1) || !inside(y + 1, x)) continue;
      double g = 0.0;
      for (std::size_t c = 0; c < img.channels(); ++c) {
        const double dx = double(img.at(c, y, x + 1)) - img.at(c, y, x);
        const double dy = double(img.at(c, y + 1, x)) - img.at(c, y, x);
        g += std::sqrt(dx * dx + dy * dy);
      }
      total += g / static_cast<double>(img.channels());
      ++count;
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace lfdeocc
