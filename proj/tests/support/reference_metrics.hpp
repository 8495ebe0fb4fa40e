#pragma once

#include "lfdeocc/image.hpp"

namespace lfdeocc::fixtures {

/// Direct 2D evaluation of windowed SSIM: for every fully-contained window
/// the Gaussian-weighted means, variances and covariance are computed from
/// scratch with two-pass sums. Default parameters: 11x11, sigma 1.5.
double reference_ssim(const Image& a, const Image& b, int window = 11, double sigma = 1.5);

}  // namespace lfdeocc::fixtures
