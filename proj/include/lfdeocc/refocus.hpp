#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lfdeocc/light_field.hpp"

namespace lfdeocc {

/// Refocused image plus a per-pixel flag (1 = no valid sample, filled with 0).
struct Refocused {
  Image image;
  std::vector<std::uint8_t> holes;

  std::size_t hole_count() const;
};

/// Shift-and-average synthetic aperture refocusing at the given disparity.
/// Each output pixel is renormalized by the validity accumulated over views.
Refocused sa_average(const LightField& lf, double disparity);

/// Per-pixel, per-channel lower median over warped views whose validity
/// exceeds 0.5. Partially valid samples are renormalized by their validity.
Refocused sa_median(const LightField& lf, double disparity);

/// sa_average evaluated at every disparity in the list.
std::vector<Image> focal_stack(const LightField& lf, std::span<const double> disparities);

/// Mean over pixels of the channel-averaged forward-difference gradient
/// magnitude. When a region mask (H*W, nonzero = include) is given, only
/// pixels inside it whose right and lower neighbours are also inside count.
/// Returns 0 for an empty region.
double mean_gradient_magnitude(const Image& img, std::optional<std::span<const std::uint8_t>> region = {});

}  // namespace lfdeocc
