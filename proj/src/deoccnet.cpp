#include "lfdeocc/deoccnet.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace lfdeocc {

namespace {

using nn::ConvGeometry;
using nn::Var;

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  ConvLayer conv(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride = 1,
                 std::size_t dilation = 1, double gain = 1.0) {
    ConvLayer layer;
    layer.geometry = {in, out, kernel, stride, dilation, dilation * (kernel / 2), 0};
    layer.weight = Var<float>::parameter(kaiming(layer.geometry.weight_shape(), in * kernel * kernel, gain));
    layer.bias = Var<float>::parameter(nn::Tensor({out}));
    return layer;
  }

  // 3x3 stride-2 transposed conv that exactly doubles the spatial size.
  ConvLayer upconv(std::size_t in, std::size_t out) {
    ConvLayer layer;
    layer.transposed = true;
    layer.geometry = {in, out, 3, 2, 1, 1, 1};
    // each output pixel sees about ceil(k / stride)^2 taps per input channel
    layer.weight = Var<float>::parameter(kaiming(layer.geometry.transpose_weight_shape(), in * 4));
    layer.bias = Var<float>::parameter(nn::Tensor({out}));
    return layer;
  }

  static BatchNormLayer norm(std::size_t channels) {
    return {Var<float>::parameter(nn::Tensor({channels}, 1.0f)), Var<float>::parameter(nn::Tensor({channels})),
            nn::BatchNormStats<float>(channels)};
  }

 private:
  nn::Tensor kaiming(nn::Shape shape, std::size_t fan_in, double gain = 1.0) {
    nn::Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, gain * std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (float& v : t.data()) v = static_cast<float>(dist(rng_));
    return t;
  }

  std::mt19937_64 rng_;
};

void add_conv(std::vector<StateEntry>& out, const std::string& prefix, ConvLayer& layer) {
  out.push_back({prefix + ".weight", &layer.weight.value_mut(), true, layer.weight});
  out.push_back({prefix + ".bias", &layer.bias.value_mut(), true, layer.bias});
}

void add_unit(std::vector<StateEntry>& out, const std::string& prefix, ResidualUnit& unit) {
  out.push_back({prefix + ".norm.gamma", &unit.norm.gamma.value_mut(), true, unit.norm.gamma});
  out.push_back({prefix + ".norm.beta", &unit.norm.beta.value_mut(), true, unit.norm.beta});
  out.push_back({prefix + ".norm.running_mean", &unit.norm.stats.running_mean, false, {}});
  out.push_back({prefix + ".norm.running_var", &unit.norm.stats.running_var, false, {}});
  add_conv(out, prefix + ".body", unit.body);
  if (unit.shortcut) add_conv(out, prefix + ".shortcut", *unit.shortcut);
}

}  // namespace

void NetworkConfig::validate() const {
  if (angular_rows == 0 || angular_cols == 0) throw std::invalid_argument("NetworkConfig: empty angular grid");
  if (base_depth == 0) throw std::invalid_argument("NetworkConfig: base_depth must be positive");
  if (encoder_levels == 0 || encoder_levels > 8) throw std::invalid_argument("NetworkConfig: encoder_levels out of range");
  if (!no_aspp && (aspp_rates.empty() || aspp_groups == 0)) {
    throw std::invalid_argument("NetworkConfig: ASPP needs at least one rate and one group");
  }
  if (std::ranges::find(aspp_rates, std::size_t{0}) != aspp_rates.end()) {
    throw std::invalid_argument("NetworkConfig: dilation rates must be positive");
  }
  if (!(leaky_slope >= 0.0)) throw std::invalid_argument("NetworkConfig: leaky_slope must be non-negative");
}

void to_json(nlohmann::json& j, const NetworkConfig& cfg) {
  j = {{"angular_rows", cfg.angular_rows},     {"angular_cols", cfg.angular_cols},
       {"in_channels", cfg.in_channels()},     {"base_depth", cfg.base_depth},
       {"encoder_levels", cfg.encoder_levels}, {"aspp_rates", cfg.aspp_rates},
       {"aspp_groups", cfg.aspp_groups},       {"leaky_slope", cfg.leaky_slope},
       {"no_aspp", cfg.no_aspp},               {"drop_outer_skip", cfg.drop_outer_skip}};
}

void from_json(const nlohmann::json& j, NetworkConfig& cfg) {
  cfg.angular_rows = j.value("angular_rows", cfg.angular_rows);
  cfg.angular_cols = j.value("angular_cols", cfg.angular_cols);
  cfg.base_depth = j.value("base_depth", cfg.base_depth);
  cfg.encoder_levels = j.value("encoder_levels", cfg.encoder_levels);
  cfg.aspp_rates = j.value("aspp_rates", cfg.aspp_rates);
  cfg.aspp_groups = j.value("aspp_groups", cfg.aspp_groups);
  cfg.leaky_slope = j.value("leaky_slope", cfg.leaky_slope);
  cfg.no_aspp = j.value("no_aspp", cfg.no_aspp);
  cfg.drop_outer_skip = j.value("drop_outer_skip", cfg.drop_outer_skip);
}

std::size_t receptive_field(const NetworkConfig& cfg) {
  std::size_t rf = 1;  // 1x1 input projection
  std::size_t jump = 1;
  if (!cfg.no_aspp) {
    const std::size_t widest = *std::ranges::max_element(cfg.aspp_rates);
    rf += cfg.aspp_groups * 2 * widest * jump;
  }
  for (std::size_t level = 0; level < cfg.encoder_levels; ++level) {
    rf += 2 * 2 * jump;  // two 3x3 residual units
    rf += 2 * jump;      // 3x3 stride-2 unit
    jump *= 2;
  }
  return rf;
}

nn::Var<float> ConvLayer::operator()(const nn::Var<float>& x) const {
  return transposed ? nn::conv_transpose2d(x, weight, bias, geometry) : nn::conv2d(x, weight, bias, geometry);
}

DeOccNet DeOccNet::build(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  DeOccNet net(cfg);
  Initializer init(seed);
  const std::size_t d = cfg.base_depth;

  net.input_ = init.conv(cfg.in_channels(), d, 1);
  if (!cfg.no_aspp) {
    for (std::size_t g = 0; g < cfg.aspp_groups; ++g) {
      AsppGroup group;
      for (std::size_t rate : cfg.aspp_rates) group.branches.push_back(init.conv(d, d, 3, 1, rate));
      group.fuse = init.conv(d * cfg.aspp_rates.size(), d, 1, 1, 1, kResidualBranchGain);
      net.aspp_.push_back(std::move(group));
    }
  }

  for (std::size_t level = 0; level < cfg.encoder_levels; ++level) {
    const std::size_t depth = d << level;
    EncoderBlock block;
    for (std::size_t u = 0; u < 2; ++u) {
      block.units[u] = {Initializer::norm(depth), init.conv(depth, depth, 3, 1, 1, kResidualBranchGain), {}};
    }
    block.units[2] = {Initializer::norm(depth), init.conv(depth, 2 * depth, 3, 2), init.conv(depth, 2 * depth, 3, 2)};
    net.encoder_.push_back(std::move(block));
  }

  for (std::size_t j = 0; j < cfg.encoder_levels; ++j) {
    const std::size_t level = cfg.encoder_levels - 1 - j;
    const std::size_t depth = d << level;  // depth after this block
    DecoderBlock block;
    block.up = {Initializer::norm(2 * depth), init.upconv(2 * depth, depth), init.upconv(2 * depth, depth)};
    const bool outermost = level == 0;
    if (!(outermost && cfg.drop_outer_skip)) block.fuse = init.conv(2 * depth, depth, 1);
    for (std::size_t u = 0; u < 2; ++u) {
      block.units[u] = {Initializer::norm(depth), init.conv(depth, depth, 3, 1, 1, kResidualBranchGain), {}};
    }
    net.decoder_.push_back(std::move(block));
  }

  net.output_ = init.conv(d, 3, 1, 1, 1, kResidualBranchGain);
  return net;
}

void DeOccNet::check_input(const nn::Tensor& x) const {
  if (x.rank() != 4) throw std::invalid_argument("DeOccNet: expected NCHW input, got " + nn::shape_string(x.shape()));
  if (x.dim(1) != cfg_.in_channels()) {
    throw std::invalid_argument("DeOccNet: input has " + std::to_string(x.dim(1)) + " channels, network expects " +
                                std::to_string(cfg_.in_channels()));
  }
  const std::size_t m = cfg_.spatial_multiple();
  if (x.dim(2) % m != 0 || x.dim(3) % m != 0 || x.dim(2) == 0 || x.dim(3) == 0) {
    throw std::invalid_argument("DeOccNet: spatial size " + std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)) +
                                " is not a positive multiple of " + std::to_string(m));
  }
}

nn::Var<float> DeOccNet::run_unit(ResidualUnit& unit, const nn::Var<float>& x, nn::Mode mode) const {
  const auto slope = static_cast<float>(cfg_.leaky_slope);
  const nn::Var<float> normed = nn::batch_norm(x, unit.norm.gamma, unit.norm.beta, unit.norm.stats, mode);
  const nn::Var<float> main = nn::leaky_relu(unit.body(normed), slope);
  return nn::add(main, unit.shortcut ? (*unit.shortcut)(normed) : normed);
}

nn::Var<float> DeOccNet::encode(const nn::Var<float>& x, nn::Mode mode, std::vector<nn::Var<float>>* skips) {
  check_input(x.value());
  const auto slope = static_cast<float>(cfg_.leaky_slope);
  nn::Var<float> h = input_(x);
  for (AsppGroup& group : aspp_) {
    std::vector<nn::Var<float>> branches;
    branches.reserve(group.branches.size());
    for (const ConvLayer& b : group.branches) branches.push_back(nn::leaky_relu(b(h), slope));
    h = nn::add(h, group.fuse(nn::concat(branches)));
  }
  for (EncoderBlock& block : encoder_) {
    if (skips) skips->push_back(h);
    for (ResidualUnit& unit : block.units) h = run_unit(unit, h, mode);
  }
  return h;
}

nn::Var<float> DeOccNet::forward(const nn::Var<float>& x, nn::Mode mode) {
  std::vector<nn::Var<float>> skips;
  nn::Var<float> h = encode(x, mode, &skips);
  for (std::size_t j = 0; j < decoder_.size(); ++j) {
    DecoderBlock& block = decoder_[j];
    h = run_unit(block.up, h, mode);
    if (block.fuse) h = (*block.fuse)(nn::concat<float>({h, skips[skips.size() - 1 - j]}));
    for (ResidualUnit& unit : block.units) h = run_unit(unit, h, mode);
  }
  return output_(h);
}

nn::Tensor DeOccNet::infer(const nn::Tensor& x) {
  return forward(nn::Var<float>::constant(x), nn::Mode::Eval).value();
}

std::vector<StateEntry> DeOccNet::state() {
  std::vector<StateEntry> out;
  add_conv(out, "input", input_);
  for (std::size_t g = 0; g < aspp_.size(); ++g) {
    const std::string prefix = "aspp." + std::to_string(g);
    for (std::size_t b = 0; b < aspp_[g].branches.size(); ++b) {
      add_conv(out, prefix + ".branch." + std::to_string(b), aspp_[g].branches[b]);
    }
    add_conv(out, prefix + ".fuse", aspp_[g].fuse);
  }
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    for (std::size_t u = 0; u < 3; ++u) {
      add_unit(out, "encoder." + std::to_string(i) + ".unit." + std::to_string(u), encoder_[i].units[u]);
    }
  }
  for (std::size_t j = 0; j < decoder_.size(); ++j) {
    const std::string prefix = "decoder." + std::to_string(j);
    add_unit(out, prefix + ".up", decoder_[j].up);
    if (decoder_[j].fuse) add_conv(out, prefix + ".fuse", *decoder_[j].fuse);
    for (std::size_t u = 0; u < 2; ++u) add_unit(out, prefix + ".unit." + std::to_string(u), decoder_[j].units[u]);
  }
  add_conv(out, "output", output_);
  return out;
}

std::vector<NamedParameter> DeOccNet::parameters() const {
  std::vector<NamedParameter> out;
  for (StateEntry& e : const_cast<DeOccNet*>(this)->state()) {
    if (e.trainable) out.push_back({e.name, e.var});
  }
  return out;
}

std::size_t DeOccNet::parameter_count() const {
  std::size_t total = 0;
  for (const NamedParameter& p : parameters()) total += p.var.value().numel();
  return total;
}

void DeOccNet::zero_grad() {
  for (NamedParameter& p : parameters()) p.var.zero_grad();
}

}  // namespace lfdeocc
