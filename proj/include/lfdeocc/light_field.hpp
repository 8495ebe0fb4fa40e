#pragma once

#include <cstddef>
#include <vector>

#include "lfdeocc/image.hpp"
#include "lfdeocc/nn/tensor.hpp"

namespace lfdeocc {

/// Position of a sub-aperture view in the camera grid.
struct AngularCoord {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const AngularCoord&, const AngularCoord&) = default;
};

/// Signed displacement of a view from the center view, in angular steps.
struct AngularOffset {
  int drow = 0;
  int dcol = 0;
  friend bool operator==(const AngularOffset&, const AngularOffset&) = default;
};

/// Dimensions of the angular sampling grid. Views are stored row-major.
struct AngularGrid {
  std::size_t rows = 1;
  std::size_t cols = 1;

  std::size_t size() const { return rows * cols; }
  bool has_center() const { return rows % 2 == 1 && cols % 2 == 1; }
  /// Throws std::invalid_argument unless both dimensions are odd.
  AngularCoord center() const;
  AngularOffset offset(AngularCoord coord) const;
  AngularOffset offset(std::size_t index) const { return offset(coord(index)); }
  AngularCoord coord(std::size_t index) const { return {index / cols, index % cols}; }
  std::size_t index(AngularCoord coord) const { return coord.row * cols + coord.col; }
  /// Largest |drow| and |dcol| over the grid.
  int max_abs_drow() const { return static_cast<int>(rows / 2); }
  int max_abs_dcol() const { return static_cast<int>(cols / 2); }

  friend bool operator==(const AngularGrid&, const AngularGrid&) = default;
};

/// Grid of sub-aperture images sharing height, width and channel count.
class LightField {
 public:
  LightField() = default;
  LightField(AngularGrid grid, std::vector<Image> views);

  const AngularGrid& grid() const { return grid_; }
  std::size_t view_count() const { return views_.size(); }
  std::size_t height() const { return views_.front().height(); }
  std::size_t width() const { return views_.front().width(); }
  std::size_t channels() const { return views_.front().channels(); }

  const Image& view(AngularCoord coord) const { return views_[grid_.index(coord)]; }
  Image& view(AngularCoord coord) { return views_[grid_.index(coord)]; }
  const Image& view(std::size_t index) const { return views_[index]; }
  Image& view(std::size_t index) { return views_[index]; }
  const Image& center_view() const { return view(grid_.center()); }
  const std::vector<Image>& views() const { return views_; }

  friend bool operator==(const LightField&, const LightField&) = default;

 private:
  AngularGrid grid_;
  std::vector<Image> views_;
};

/// Result of a sub-pixel translation: the moved image plus the fraction of
/// each output pixel's bilinear support that fell inside the source.
struct ShiftedImage {
  Image image;
  Image validity;
};

// Disparity convention shared by every module: a scene point at disparity d
// that sits at pixel p in the center view appears at p + d * offset in the
// view at that angular offset. Positive disparity lies in front of the
// rectification plane.

/// Translates img by (disparity * drow, disparity * dcol) pixels using
/// bilinear interpolation with integer sample centers. Out-of-bounds taps
/// contribute zero. Throws std::invalid_argument for non-finite disparity.
ShiftedImage shift_view(const Image& img, AngularOffset offset, double disparity);

/// Shifts every view by -d0 * offset and crops to the common valid window so
/// that content at disparity d0 becomes zero-disparity.
LightField rectify(const LightField& lf, double d0);

/// Margin cropped by rectify on each side, as (rows, cols).
std::pair<std::size_t, std::size_t> rectify_margin(const AngularGrid& grid, double d0);

/// Concatenates all views along channels, row-major by angular coordinate:
/// shape (U*V*C, H, W).
nn::Tensor stack_channels(const LightField& lf);

/// Inverse of stack_channels.
LightField unstack_channels(const nn::Tensor& stacked, AngularGrid grid, std::size_t channels);

struct LightFieldPatch {
  LightField lf;
  Image gt;
  std::size_t top = 0;
  std::size_t left = 0;
};

/// Number of patch positions along an axis of the given extent.
std::size_t patch_count(std::size_t extent, std::size_t patch, std::size_t stride);

/// Crops aligned square patches from every view and from gt.
std::vector<LightFieldPatch> extract_patches(const LightField& lf, const Image& gt, std::size_t patch,
                                             std::size_t stride);

LightField crop(const LightField& lf, std::size_t top, std::size_t left, std::size_t height, std::size_t width);

/// Bilinear resampling with half-pixel centers (align-corners false) and
/// edge clamping.
Image resize_bilinear(const Image& img, std::size_t height, std::size_t width);

Image upsample2x(const Image& img);
LightField upsample2x(const LightField& lf);

}  // namespace lfdeocc
