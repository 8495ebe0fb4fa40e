#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lfdeocc/light_field.hpp"

namespace lfdeocc {

/// Occluder appearance: colour plus coverage.
struct MaskAsset {
  Image rgb;    // 3 channels
  Image alpha;  // 1 channel in [0, 1]
  std::string id;

  /// Throws std::invalid_argument if the invariants do not hold.
  void validate() const;
};

/// A mask planted at one depth. placement is the top-left corner of the
/// scaled mask on the center view and may be negative or beyond the view.
struct OcclusionLayer {
  MaskAsset mask;
  double disparity = 1.0;
  int placement_row = 0;
  int placement_col = 0;
  double scale = 1.0;
};

struct DisparityRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct SynthesisConfig {
  std::size_t layer_count = 1;
  /// Per-layer ranges, nearest-last; only the first layer_count are used.
  std::vector<DisparityRange> disparity_ranges{{1.0, 2.0}, {2.0, 3.5}, {3.5, 5.0}};
  bool channel_shuffle = false;
  /// Draw the mask permutation independently of the light-field one.
  bool independent_mask_shuffle = false;
  /// Threshold soft alpha at 0.5.
  bool binarize_alpha = false;
  /// Mask scale is drawn from this range, relative to fitting the mask inside the view.
  double scale_lo = 0.5;
  double scale_hi = 1.0;
  /// Minimum fraction of the scaled mask's bounding box inside the view.
  double min_inside_fraction = 0.25;
  std::uint64_t seed = 0;

  void validate() const;
};

using ChannelPermutation = std::array<std::size_t, 3>;

/// Output channel i takes input channel perm[i].
Image apply_permutation(const Image& img, const ChannelPermutation& perm);
ChannelPermutation compose(const ChannelPermutation& first, const ChannelPermutation& second);
ChannelPermutation inverse(const ChannelPermutation& perm);
/// Uniform draw over the six RGB permutations.
ChannelPermutation draw_permutation(std::uint64_t seed);

struct ShuffledSample {
  LightField lf;
  Image gt;
  ChannelPermutation permutation;
};

/// Applies one seed-determined permutation to every view and to gt.
ShuffledSample channel_shuffle(const LightField& lf, const Image& gt, std::uint64_t seed);

struct WarpedMask {
  Image rgb;
  Image alpha;
};

/// Renders the layer as seen from the view at the given angular offset on a
/// height x width canvas.
WarpedMask warp_mask(const OcclusionLayer& layer, AngularOffset offset, std::size_t height, std::size_t width);

/// Alpha-over: alpha * rgb + (1 - alpha) * view. Pixels with alpha 0 keep
/// the view bit-exactly and pixels with alpha 1 take rgb bit-exactly.
Image composite(const Image& view, const Image& rgb, const Image& alpha);

struct SynthesisResult {
  LightField occluded;
  Image gt;
  std::vector<OcclusionLayer> layers;  // increasing disparity
  ChannelPermutation lf_permutation{0, 1, 2};
  ChannelPermutation mask_permutation{0, 1, 2};
  std::size_t source = 0;  // index of the source light field in a corpus
};

/// Embeds cfg.layer_count randomly chosen masks into lf. Input must be
/// rectified so scene content has non-positive disparity.
SynthesisResult synthesize(const LightField& lf, std::span<const MaskAsset> masks, const SynthesisConfig& cfg);

/// Deterministic per-sample seed derived from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// Composites the layers, in order, into every view of lf.
LightField embed_layers(const LightField& lf, const std::vector<OcclusionLayer>& layers);

/// Sample `index` of a corpus, identical to synthesize_corpus(...)[index].
SynthesisResult synthesize_indexed(std::span<const LightField> lfs, std::span<const MaskAsset> masks,
                                   const SynthesisConfig& cfg, std::size_t index);

/// Generates count samples; sample i draws its source light field and
/// layers from derive_seed(cfg.seed, i).
std::vector<SynthesisResult> synthesize_corpus(std::span<const LightField> lfs, std::span<const MaskAsset> masks,
                                               const SynthesisConfig& cfg, std::size_t count);

/// Union of the layers' center-view alpha, combined with alpha-over.
Image center_coverage(const std::vector<OcclusionLayer>& layers, std::size_t height, std::size_t width);

/// Fraction of pixels with coverage above 0.5.
double occlusion_rate(const Image& coverage);

enum class CheckStatus { Pass, Fail, Inconclusive };

struct LayerCheck {
  double disparity = 0.0;
  std::vector<double> probed;
  std::vector<double> sharpness;
  double best_disparity = 0.0;
  std::size_t footprint_pixels = 0;
  CheckStatus status = CheckStatus::Inconclusive;
};

struct CheckReport {
  std::vector<LayerCheck> layers;
  /// True when no layer failed.
  bool passed() const;
};

/// Alignment tolerance, in pixels at the outermost view, within which a
/// probed disparity counts as the layer's own.
inline constexpr double kCheckAlignmentPx = 0.5;

/// Refocuses at 0 and at every layer disparity and checks that each layer's
/// footprint is sharpest at its own disparity, up to kCheckAlignmentPx.
CheckReport refocus_check(const LightField& occluded, const std::vector<OcclusionLayer>& layers);

const char* to_string(CheckStatus status);

}  // namespace lfdeocc
