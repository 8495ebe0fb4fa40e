#include "lfdeocc/mask_embed.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "lfdeocc/refocus.hpp"

namespace lfdeocc {

void MaskAsset::validate() const {
  if (rgb.channels() != 3) throw std::invalid_argument("MaskAsset '" + id + "': rgb must have 3 channels");
  if (alpha.channels() != 1) throw std::invalid_argument("MaskAsset '" + id + "': alpha must have 1 channel");
  if (rgb.height() != alpha.height() || rgb.width() != alpha.width()) {
    throw std::invalid_argument("MaskAsset '" + id + "': rgb and alpha dimensions differ");
  }
  for (float a : alpha.data()) {
    if (!(a >= 0.0f && a <= 1.0f)) throw std::invalid_argument("MaskAsset '" + id + "': alpha outside [0, 1]");
  }
}

void SynthesisConfig::validate() const {
  if (layer_count < 1 || layer_count > 3) throw std::invalid_argument("SynthesisConfig: layer_count must be 1, 2 or 3");
  if (disparity_ranges.size() < layer_count) {
    throw std::invalid_argument("SynthesisConfig: fewer disparity ranges than layers");
  }
  for (std::size_t k = 0; k < layer_count; ++k) {
    const DisparityRange& r = disparity_ranges[k];
    if (!(r.lo > 0.0) || !(r.hi > r.lo)) {
      throw std::invalid_argument("SynthesisConfig: disparity range " + std::to_string(k) +
                                  " must satisfy 0 < lo < hi");
    }
    if (k > 0 && r.lo < disparity_ranges[k - 1].hi) {
      throw std::invalid_argument("SynthesisConfig: disparity ranges must increase across layers");
    }
  }
  if (!(scale_lo > 0.0) || scale_hi < scale_lo) throw std::invalid_argument("SynthesisConfig: bad scale range");
  if (!(min_inside_fraction > 0.0 && min_inside_fraction <= 1.0)) {
    throw std::invalid_argument("SynthesisConfig: min_inside_fraction must be in (0, 1]");
  }
}

namespace {

constexpr std::array<ChannelPermutation, 6> kPermutations{{
    {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0},
}};

constexpr ChannelPermutation kIdentity{0, 1, 2};

ChannelPermutation draw_from(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, kPermutations.size() - 1);
  return kPermutations[pick(rng)];
}

double draw_in(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  const double v = dist(rng);
  return v >= hi ? std::nextafter(hi, lo) : v;
}

Image binarized(const Image& alpha) {
  Image out = alpha;
  for (float& a : out.data()) a = a >= 0.5f ? 1.0f : 0.0f;
  return out;
}

struct ScaledMask {
  Image rgb;
  Image alpha;
};

ScaledMask scale_mask(const MaskAsset& mask, double scale) {
  const auto sh = static_cast<std::size_t>(std::max(1.0, std::round(mask.rgb.height() * scale)));
  const auto sw = static_cast<std::size_t>(std::max(1.0, std::round(mask.rgb.width() * scale)));
  if (sh == mask.rgb.height() && sw == mask.rgb.width()) return {mask.rgb, mask.alpha};
  return {resize_bilinear(mask.rgb, sh, sw), resize_bilinear(mask.alpha, sh, sw)};
}

// Copies src onto dst with its top-left corner at (top, left), clipping.
void paste(Image& dst, const Image& src, long top, long left) {
  for (std::size_t c = 0; c < src.channels(); ++c) {
    for (std::size_t y = 0; y < src.height(); ++y) {
      const long dy = top + static_cast<long>(y);
      if (dy < 0 || dy >= static_cast<long>(dst.height())) continue;
      for (std::size_t x = 0; x < src.width(); ++x) {
        const long dx = left + static_cast<long>(x);
        if (dx < 0 || dx >= static_cast<long>(dst.width())) continue;
        dst.at(c, static_cast<std::size_t>(dy), static_cast<std::size_t>(dx)) = src.at(c, y, x);
      }
    }
  }
}

double inside_fraction(long top, long left, std::size_t sh, std::size_t sw, std::size_t h, std::size_t w) {
  const long rows = std::min<long>(top + static_cast<long>(sh), static_cast<long>(h)) - std::max<long>(top, 0);
  const long cols = std::min<long>(left + static_cast<long>(sw), static_cast<long>(w)) - std::max<long>(left, 0);
  if (rows <= 0 || cols <= 0) return 0.0;
  return static_cast<double>(rows * cols) / static_cast<double>(sh * sw);
}

}  // namespace

Image apply_permutation(const Image& img, const ChannelPermutation& perm) {
  if (img.channels() != 3) throw std::invalid_argument("apply_permutation: image must have 3 channels");
  Image out(img.height(), img.width(), 3);
  for (std::size_t c = 0; c < 3; ++c) std::ranges::copy(img.plane(perm[c]), out.plane(c).begin());
  return out;
}

ChannelPermutation compose(const ChannelPermutation& first, const ChannelPermutation& second) {
  // apply(apply(x, first), second)[i] = apply(x, first)[second[i]] = x[first[second[i]]]
  return {first[second[0]], first[second[1]], first[second[2]]};
}

ChannelPermutation inverse(const ChannelPermutation& perm) {
  ChannelPermutation inv{};
  for (std::size_t i = 0; i < 3; ++i) inv[perm[i]] = i;
  return inv;
}

ChannelPermutation draw_permutation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return draw_from(rng);
}

ShuffledSample channel_shuffle(const LightField& lf, const Image& gt, std::uint64_t seed) {
  if (lf.channels() != 3 || gt.channels() != 3) {
    throw std::invalid_argument("channel_shuffle: light field and groundtruth must have 3 channels");
  }
  const ChannelPermutation perm = draw_permutation(seed);
  std::vector<Image> views;
  views.reserve(lf.view_count());
  for (const Image& v : lf.views()) views.push_back(apply_permutation(v, perm));
  return {LightField(lf.grid(), std::move(views)), apply_permutation(gt, perm), perm};
}

WarpedMask warp_mask(const OcclusionLayer& layer, AngularOffset offset, std::size_t height, std::size_t width) {
  if (!(layer.disparity > 0.0) || !std::isfinite(layer.disparity)) {
    throw std::invalid_argument("warp_mask: occluder disparity must be positive");
  }
  layer.mask.validate();
  const ScaledMask scaled = scale_mask(layer.mask, layer.scale);

  const double shift_r = layer.disparity * offset.drow;
  const double shift_c = layer.disparity * offset.dcol;
  const auto margin =
      static_cast<std::size_t>(std::ceil(std::max(std::abs(shift_r), std::abs(shift_c)))) + 1;
  const std::size_t ch = height + 2 * margin;
  const std::size_t cw = width + 2 * margin;
  const long top = static_cast<long>(margin) + layer.placement_row;
  const long left = static_cast<long>(margin) + layer.placement_col;

  Image alpha_canvas(ch, cw, 1);
  paste(alpha_canvas, scaled.alpha, top, left);
  const bool integral = shift_r == std::floor(shift_r) && shift_c == std::floor(shift_c);

  WarpedMask out;
  if (integral) {
    Image rgb_canvas(ch, cw, 3);
    paste(rgb_canvas, scaled.rgb, top, left);
    out.rgb = crop(shift_view(rgb_canvas, offset, layer.disparity).image, margin, margin, height, width);
    out.alpha = crop(shift_view(alpha_canvas, offset, layer.disparity).image, margin, margin, height, width);
  } else {
    // Fractional shifts interpolate premultiplied colour so edges do not
    // pick up the zero fill outside the mask.
    Image premult = scaled.rgb;
    for (std::size_t c = 0; c < 3; ++c) {
      auto p = premult.plane(c);
      auto a = scaled.alpha.plane(0);
      for (std::size_t i = 0; i < p.size(); ++i) p[i] *= a[i];
    }
    Image premult_canvas(ch, cw, 3);
    paste(premult_canvas, premult, top, left);
    out.alpha = crop(shift_view(alpha_canvas, offset, layer.disparity).image, margin, margin, height, width);
    const Image moved = crop(shift_view(premult_canvas, offset, layer.disparity).image, margin, margin, height, width);
    out.rgb = Image(height, width, 3);
    auto a = out.alpha.plane(0);
    for (std::size_t c = 0; c < 3; ++c) {
      auto src = moved.plane(c);
      auto dst = out.rgb.plane(c);
      for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = a[i] > 0.0f ? std::clamp(src[i] / a[i], 0.0f, 1.0f) : 0.0f;
      }
    }
  }
  for (float& a : out.alpha.data()) a = std::clamp(a, 0.0f, 1.0f);
  return out;
}

Image composite(const Image& view, const Image& rgb, const Image& alpha) {
  if (!view.same_shape(rgb) || alpha.channels() != 1 || alpha.height() != view.height() ||
      alpha.width() != view.width()) {
    throw std::invalid_argument("composite: dimension mismatch");
  }
  Image out = view;
  auto a = alpha.plane(0);
  for (std::size_t c = 0; c < view.channels(); ++c) {
    auto dst = out.plane(c);
    auto src = rgb.plane(c);
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (a[i] == 0.0f) continue;
      if (a[i] == 1.0f) {
        dst[i] = src[i];
      } else {
        dst[i] = static_cast<float>(double(a[i]) * src[i] + (1.0 - a[i]) * dst[i]);
      }
    }
  }
  return out;
}

SynthesisResult synthesize(const LightField& lf, std::span<const MaskAsset> masks, const SynthesisConfig& cfg) {
  cfg.validate();
  if (masks.empty()) throw std::invalid_argument("synthesize: empty mask set");
  const AngularGrid grid = lf.grid();
  grid.center();
  if (lf.channels() != 3) throw std::invalid_argument("synthesize: light field must be RGB");
  const std::size_t h = lf.height();
  const std::size_t w = lf.width();

  std::mt19937_64 rng(cfg.seed);
  SynthesisResult result;
  std::vector<Image> views = lf.views();
  if (cfg.channel_shuffle) {
    result.lf_permutation = draw_from(rng);
    result.mask_permutation = cfg.independent_mask_shuffle ? draw_from(rng) : result.lf_permutation;
    for (Image& v : views) v = apply_permutation(v, result.lf_permutation);
  }
  result.gt = views[grid.index(grid.center())];

  std::uniform_int_distribution<std::size_t> pick_mask(0, masks.size() - 1);
  for (std::size_t k = 0; k < cfg.layer_count; ++k) {
    OcclusionLayer layer;
    layer.mask = masks[pick_mask(rng)];
    layer.mask.validate();
    if (result.mask_permutation != kIdentity) layer.mask.rgb = apply_permutation(layer.mask.rgb, result.mask_permutation);
    if (cfg.binarize_alpha) layer.mask.alpha = binarized(layer.mask.alpha);
    layer.disparity = draw_in(rng, cfg.disparity_ranges[k].lo, cfg.disparity_ranges[k].hi);

    const double fit = std::min(static_cast<double>(h) / layer.mask.rgb.height(),
                                static_cast<double>(w) / layer.mask.rgb.width());
    layer.scale = fit * (cfg.scale_hi > cfg.scale_lo ? draw_in(rng, cfg.scale_lo, cfg.scale_hi) : cfg.scale_lo);
    const auto sh = static_cast<std::size_t>(std::max(1.0, std::round(layer.mask.rgb.height() * layer.scale)));
    const auto sw = static_cast<std::size_t>(std::max(1.0, std::round(layer.mask.rgb.width() * layer.scale)));

    std::uniform_int_distribution<long> pick_row(1 - static_cast<long>(sh), static_cast<long>(h) - 1);
    std::uniform_int_distribution<long> pick_col(1 - static_cast<long>(sw), static_cast<long>(w) - 1);
    bool placed = false;
    for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
      const long r = pick_row(rng);
      const long c = pick_col(rng);
      if (inside_fraction(r, c, sh, sw, h, w) >= cfg.min_inside_fraction) {
        layer.placement_row = static_cast<int>(r);
        layer.placement_col = static_cast<int>(c);
        placed = true;
      }
    }
    if (!placed) {
      layer.placement_row = static_cast<int>((static_cast<long>(h) - static_cast<long>(sh)) / 2);
      layer.placement_col = static_cast<int>((static_cast<long>(w) - static_cast<long>(sw)) / 2);
    }

    result.layers.push_back(std::move(layer));
  }
  result.occluded = embed_layers(LightField(grid, std::move(views)), result.layers);
  return result;
}

LightField embed_layers(const LightField& lf, const std::vector<OcclusionLayer>& layers) {
  std::vector<Image> views = lf.views();
  for (const OcclusionLayer& layer : layers) {
    for (std::size_t i = 0; i < views.size(); ++i) {
      const WarpedMask wm = warp_mask(layer, lf.grid().offset(i), lf.height(), lf.width());
      views[i] = composite(views[i], wm.rgb, wm.alpha);
    }
  }
  return LightField(lf.grid(), std::move(views));
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 finalizer over a Weyl step
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

SynthesisResult synthesize_indexed(std::span<const LightField> lfs, std::span<const MaskAsset> masks,
                                   const SynthesisConfig& cfg, std::size_t index) {
  if (lfs.empty()) throw std::invalid_argument("synthesize_corpus: no source light fields");
  const std::uint64_t sample_seed = derive_seed(cfg.seed, index);
  std::mt19937_64 rng(derive_seed(sample_seed, 0));
  std::uniform_int_distribution<std::size_t> pick(0, lfs.size() - 1);
  SynthesisConfig sample_cfg = cfg;
  sample_cfg.seed = sample_seed;
  const std::size_t source = pick(rng);
  SynthesisResult out = synthesize(lfs[source], masks, sample_cfg);
  out.source = source;
  return out;
}

std::vector<SynthesisResult> synthesize_corpus(std::span<const LightField> lfs, std::span<const MaskAsset> masks,
                                               const SynthesisConfig& cfg, std::size_t count) {
  if (lfs.empty()) throw std::invalid_argument("synthesize_corpus: no source light fields");
  std::vector<SynthesisResult> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(synthesize_indexed(lfs, masks, cfg, i));
  return out;
}

Image center_coverage(const std::vector<OcclusionLayer>& layers, std::size_t height, std::size_t width) {
  Image cov(height, width, 1);
  for (const OcclusionLayer& layer : layers) {
    const Image a = warp_mask(layer, {0, 0}, height, width).alpha;
    auto src = a.plane(0);
    auto dst = cov.plane(0);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i] + (1.0f - src[i]) * dst[i];
  }
  return cov;
}

double occlusion_rate(const Image& coverage) {
  if (coverage.empty()) return 0.0;
  auto p = coverage.plane(0);
  const auto covered = std::count_if(p.begin(), p.end(), [](float a) { return a > 0.5f; });
  return static_cast<double>(covered) / static_cast<double>(p.size());
}

bool CheckReport::passed() const {
  return std::none_of(layers.begin(), layers.end(), [](const LayerCheck& l) { return l.status == CheckStatus::Fail; });
}

const char* to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::Pass:
      return "pass";
    case CheckStatus::Fail:
      return "fail";
    case CheckStatus::Inconclusive:
      return "inconclusive";
  }
  return "unknown";
}

CheckReport refocus_check(const LightField& occluded, const std::vector<OcclusionLayer>& layers) {
  if (layers.empty()) throw std::invalid_argument("refocus_check: no layers");
  const std::size_t h = occluded.height();
  const std::size_t w = occluded.width();

  std::vector<double> probes{0.0};
  for (const OcclusionLayer& l : layers) probes.push_back(l.disparity);
  std::ranges::sort(probes);
  probes.erase(std::unique(probes.begin(), probes.end()), probes.end());
  const std::vector<Image> stack = focal_stack(occluded, probes);

  std::vector<WarpedMask> centers;
  centers.reserve(layers.size());
  for (const OcclusionLayer& l : layers) centers.push_back(warp_mask(l, {0, 0}, h, w));

  // Layers are probed against the order they were composited in, so a nearer
  // layer hides a farther one's footprint.
  std::vector<std::size_t> order(layers.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return layers[a].disparity < layers[b].disparity; });

  // Probes closer than this move every view by under the alignment tolerance
  // and cannot be told apart by refocusing.
  int max_offset = 0;
  for (std::size_t v = 0; v < occluded.view_count(); ++v) {
    const AngularOffset off = occluded.grid().offset(v);
    max_offset = std::max({max_offset, std::abs(off.drow), std::abs(off.dcol)});
  }
  const double resolution = max_offset > 0 ? kCheckAlignmentPx / max_offset : 0.0;

  CheckReport report;
  report.layers.resize(layers.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const std::size_t k = order[rank];
    LayerCheck& check = report.layers[k];
    check.disparity = layers[k].disparity;
    check.probed = probes;

    std::vector<std::uint8_t> footprint(h * w, 0);
    auto ak = centers[k].alpha.plane(0);
    for (std::size_t p = 0; p < footprint.size(); ++p) {
      bool inside = ak[p] >= 0.99f;
      for (std::size_t nearer = rank + 1; nearer < order.size() && inside; ++nearer) {
        inside = centers[order[nearer]].alpha.plane(0)[p] <= 0.01f;
      }
      footprint[p] = inside ? 1 : 0;
    }
    check.footprint_pixels = static_cast<std::size_t>(std::count(footprint.begin(), footprint.end(), 1));

    const double texture = mean_gradient_magnitude(centers[k].rgb, std::span<const std::uint8_t>(footprint));
    for (const Image& img : stack) {
      check.sharpness.push_back(mean_gradient_magnitude(img, std::span<const std::uint8_t>(footprint)));
    }
    const auto best = std::ranges::max_element(check.sharpness) - check.sharpness.begin();
    check.best_disparity = probes[static_cast<std::size_t>(best)];
    if (check.footprint_pixels < 4 || texture < 1e-3) {
      check.status = CheckStatus::Inconclusive;
    } else {
      check.status =
          std::abs(check.best_disparity - check.disparity) <= resolution ? CheckStatus::Pass : CheckStatus::Fail;
    }
  }
  return report;
}

}  // namespace lfdeocc
