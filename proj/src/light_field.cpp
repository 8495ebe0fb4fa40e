#include "lfdeocc/light_field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lfdeocc {

AngularCoord AngularGrid::center() const {
  if (!has_center()) {
    throw std::invalid_argument("angular grid " + std::to_string(rows) + "x" + std::to_string(cols) +
                                " has no center view (dimensions must be odd)");
  }
  return {(rows - 1) / 2, (cols - 1) / 2};
}

AngularOffset AngularGrid::offset(AngularCoord coord) const {
  const AngularCoord c = center();
  return {static_cast<int>(coord.row) - static_cast<int>(c.row),
          static_cast<int>(coord.col) - static_cast<int>(c.col)};
}

LightField::LightField(AngularGrid grid, std::vector<Image> views) : grid_(grid), views_(std::move(views)) {
  if (grid_.rows == 0 || grid_.cols == 0) throw std::invalid_argument("LightField: empty angular grid");
  if (views_.size() != grid_.size()) {
    throw std::invalid_argument("LightField: expected " + std::to_string(grid_.size()) + " views, got " +
                                std::to_string(views_.size()));
  }
  for (const Image& v : views_) {
    if (!v.same_shape(views_.front())) throw std::invalid_argument("LightField: views differ in dimensions");
  }
  if (views_.front().empty()) throw std::invalid_argument("LightField: empty views");
}

namespace {

// Bilinear taps along one axis for a uniform shift: output index i samples
// source coordinate i - shift.
struct AxisTaps {
  std::vector<long> base;   // floor of the source coordinate
  std::vector<double> frac; // weight of base + 1
};

AxisTaps axis_taps(std::size_t extent, double shift) {
  AxisTaps taps;
  taps.base.resize(extent);
  taps.frac.resize(extent);
  const double fl = std::floor(-shift);
  const double fr = -shift - fl;
  // Clamp far-away bases so the long conversion cannot overflow; such taps are
  // out of bounds either way.
  const double limit = static_cast<double>(extent) + 2.0;
  for (std::size_t i = 0; i < extent; ++i) {
    const double b = std::clamp(static_cast<double>(i) + fl, -limit, limit);
    taps.base[i] = static_cast<long>(b);
    taps.frac[i] = fr;
  }
  return taps;
}

}  // namespace

ShiftedImage shift_view(const Image& img, AngularOffset offset, double disparity) {
  if (!std::isfinite(disparity)) throw std::invalid_argument("shift_view: non-finite disparity");
  const std::size_t h = img.height();
  const std::size_t w = img.width();
  const AxisTaps ty = axis_taps(h, disparity * offset.drow);
  const AxisTaps tx = axis_taps(w, disparity * offset.dcol);

  ShiftedImage out{Image(h, w, img.channels()), Image(h, w, 1)};
  const long lh = static_cast<long>(h);
  const long lw = static_cast<long>(w);
  auto inside = [](long v, long n) { return v >= 0 && v < n; };

  for (std::size_t y = 0; y < h; ++y) {
    const long y0 = ty.base[y];
    const double fy = ty.frac[y];
    const double wy[2] = {1.0 - fy, fy};
    const bool iny[2] = {inside(y0, lh), inside(y0 + 1, lh)};
    for (std::size_t x = 0; x < w; ++x) {
      const long x0 = tx.base[x];
      const double fx = tx.frac[x];
      const double wx[2] = {1.0 - fx, fx};
      const bool inx[2] = {inside(x0, lw), inside(x0 + 1, lw)};
      double valid = 0.0;
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          if (iny[a] && inx[b]) valid += wy[a] * wx[b];
        }
      }
      out.validity.at(0, y, x) = static_cast<float>(valid);
      for (std::size_t c = 0; c < img.channels(); ++c) {
        double acc = 0.0;
        for (int a = 0; a < 2; ++a) {
          if (!iny[a] || wy[a] == 0.0) continue;
          double row = 0.0;
          for (int b = 0; b < 2; ++b) {
            if (!inx[b] || wx[b] == 0.0) continue;
            row += wx[b] * img.at(c, static_cast<std::size_t>(y0 + a), static_cast<std::size_t>(x0 + b));
          }
          acc += wy[a] * row;
        }
        out.image.at(c, y, x) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

std::pair<std::size_t, std::size_t> rectify_margin(const AngularGrid& grid, double d0) {
  const double mr = std::ceil(std::abs(d0) * grid.max_abs_drow());
  const double mc = std::ceil(std::abs(d0) * grid.max_abs_dcol());
  return {static_cast<std::size_t>(mr), static_cast<std::size_t>(mc)};
}

LightField rectify(const LightField& lf, double d0) {
  if (!std::isfinite(d0)) throw std::invalid_argument("rectify: non-finite disparity");
  const AngularGrid& grid = lf.grid();
  grid.center();
  const double max_shift = std::abs(d0) * std::max(grid.max_abs_drow(), grid.max_abs_dcol());
  const double limit = static_cast<double>(std::min(lf.height(), lf.width())) / 2.0;
  if (max_shift >= limit) {
    throw std::invalid_argument("rectify: disparity " + std::to_string(d0) + " shifts views by " +
                                std::to_string(max_shift) + " px, crop would be empty");
  }
  const auto [mr, mc] = rectify_margin(grid, d0);
  if (2 * mr >= lf.height() || 2 * mc >= lf.width()) throw std::invalid_argument("rectify: crop would be empty");
  const std::size_t out_h = lf.height() - 2 * mr;
  const std::size_t out_w = lf.width() - 2 * mc;

  std::vector<Image> views;
  views.reserve(lf.view_count());
  for (std::size_t i = 0; i < lf.view_count(); ++i) {
    const AngularOffset off = grid.offset(i);
    if (d0 == 0.0 || (off.drow == 0 && off.dcol == 0)) {
      views.push_back(crop(lf.view(i), mr, mc, out_h, out_w));
    } else {
      views.push_back(crop(shift_view(lf.view(i), off, -d0).image, mr, mc, out_h, out_w));
    }
  }
  return LightField(grid, std::move(views));
}

nn::Tensor stack_channels(const LightField& lf) {
  const std::size_t c = lf.channels();
  const std::size_t plane = lf.height() * lf.width();
  nn::Tensor out({lf.view_count() * c, lf.height(), lf.width()});
  auto dst = out.data();
  for (std::size_t k = 0; k < lf.view_count(); ++k) {
    std::ranges::copy(lf.view(k).data(), dst.begin() + static_cast<std::ptrdiff_t>(k * c * plane));
  }
  return out;
}

LightField unstack_channels(const nn::Tensor& stacked, AngularGrid grid, std::size_t channels) {
  if (stacked.rank() != 3 || stacked.dim(0) != grid.size() * channels) {
    throw std::invalid_argument("unstack_channels: tensor shape " + nn::shape_string(stacked.shape()) +
                                " does not hold " + std::to_string(grid.size()) + " views of " +
                                std::to_string(channels) + " channels");
  }
  const std::size_t h = stacked.dim(1);
  const std::size_t w = stacked.dim(2);
  const std::size_t block = channels * h * w;
  std::vector<Image> views;
  views.reserve(grid.size());
  auto src = stacked.data();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    auto first = src.begin() + static_cast<std::ptrdiff_t>(k * block);
    views.emplace_back(h, w, channels, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(block)));
  }
  return LightField(grid, std::move(views));
}

std::size_t patch_count(std::size_t extent, std::size_t patch, std::size_t stride) {
  if (patch == 0 || stride == 0) throw std::invalid_argument("patch_count: patch and stride must be positive");
  if (patch > extent) return 0;
  return (extent - patch) / stride + 1;
}

LightField crop(const LightField& lf, std::size_t top, std::size_t left, std::size_t height, std::size_t width) {
  std::vector<Image> views;
  views.reserve(lf.view_count());
  for (const Image& v : lf.views()) views.push_back(crop(v, top, left, height, width));
  return LightField(lf.grid(), std::move(views));
}

std::vector<LightFieldPatch> extract_patches(const LightField& lf, const Image& gt, std::size_t patch,
                                             std::size_t stride) {
  if (stride == 0 || patch == 0) throw std::invalid_argument("extract_patches: patch and stride must be positive");
  if (patch > lf.height() || patch > lf.width()) {
    throw std::invalid_argument("extract_patches: patch " + std::to_string(patch) + " exceeds view size " +
                                std::to_string(lf.height()) + "x" + std::to_string(lf.width()));
  }
  if (gt.height() != lf.height() || gt.width() != lf.width()) {
    throw std::invalid_argument("extract_patches: groundtruth dimensions differ from views");
  }
  const std::size_t rows = patch_count(lf.height(), patch, stride);
  const std::size_t cols = patch_count(lf.width(), patch, stride);
  std::vector<LightFieldPatch> out;
  out.reserve(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t top = i * stride;
      const std::size_t left = j * stride;
      out.push_back({crop(lf, top, left, patch, patch), crop(gt, top, left, patch, patch), top, left});
    }
  }
  return out;
}

Image resize_bilinear(const Image& img, std::size_t height, std::size_t width) {
  if (img.empty() || height == 0 || width == 0) throw std::invalid_argument("resize_bilinear: empty image");
  struct Tap {
    std::size_t i0, i1;
    double f;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    const double last = static_cast<double>(in - 1);
    for (std::size_t o = 0; o < out; ++o) {
      const double src = std::clamp((static_cast<double>(o) + 0.5) * scale - 0.5, 0.0, last);
      const double fl = std::floor(src);
      const auto i0 = static_cast<std::size_t>(fl);
      t[o] = {i0, std::min(i0 + 1, in - 1), src - fl};
    }
    return t;
  };
  const auto ty = taps(img.height(), height);
  const auto tx = taps(img.width(), width);
  Image out(height, width, img.channels());
  for (std::size_t c = 0; c < img.channels(); ++c) {
    for (std::size_t y = 0; y < height; ++y) {
      const Tap& a = ty[y];
      for (std::size_t x = 0; x < width; ++x) {
        const Tap& b = tx[x];
        const double top = (1.0 - b.f) * img.at(c, a.i0, b.i0) + b.f * img.at(c, a.i0, b.i1);
        const double bottom = (1.0 - b.f) * img.at(c, a.i1, b.i0) + b.f * img.at(c, a.i1, b.i1);
        out.at(c, y, x) = static_cast<float>((1.0 - a.f) * top + a.f * bottom);
      }
    }
  }
  return out;
}

Image upsample2x(const Image& img) { return resize_bilinear(img, 2 * img.height(), 2 * img.width()); }

LightField upsample2x(const LightField& lf) {
  std::vector<Image> views;
  views.reserve(lf.view_count());
  for (const Image& v : lf.views()) views.push_back(upsample2x(v));
  return LightField(lf.grid(), std::move(views));
}

}  // namespace lfdeocc
