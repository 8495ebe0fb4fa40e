#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lfdeocc/nn/ops.hpp"

namespace lfdeocc {

/// Init scale of convs that end a residual branch, relative to Kaiming.
inline constexpr double kResidualBranchGain = 1e-3;

/// Architecture hyperparameters. Defaults are the full-size 5x5 model.
struct NetworkConfig {
  std::size_t angular_rows = 5;
  std::size_t angular_cols = 5;
  std::size_t base_depth = 64;
  std::size_t encoder_levels = 4;
  std::vector<std::size_t> aspp_rates{1, 2, 4, 8, 16, 32};
  std::size_t aspp_groups = 3;
  double leaky_slope = 0.1;
  /// Ablation: feed the input projection straight into the encoder.
  bool no_aspp = false;
  /// Ablation: the last decoder block gets no skip connection.
  bool drop_outer_skip = false;

  std::size_t in_channels() const { return angular_rows * angular_cols * 3; }
  std::size_t bottleneck_depth() const { return base_depth << encoder_levels; }
  /// Input height and width must be multiples of this.
  std::size_t spatial_multiple() const { return std::size_t{1} << encoder_levels; }
  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

void to_json(nlohmann::json& j, const NetworkConfig& cfg);
/// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, NetworkConfig& cfg);

/// Analytic receptive field, in input pixels, of one bottleneck feature
/// through the input projection, the ASPP stack and the encoder.
std::size_t receptive_field(const NetworkConfig& cfg);

struct ConvLayer {
  nn::ConvGeometry geometry;
  bool transposed = false;
  nn::Var<float> weight;
  nn::Var<float> bias;

  nn::Var<float> operator()(const nn::Var<float>& x) const;
};

struct BatchNormLayer {
  nn::Var<float> gamma;
  nn::Var<float> beta;
  nn::BatchNormStats<float> stats;
};

/// BN followed by two paths summed: [conv + leaky ReLU] and a shortcut that
/// is either the identity or a (transposed) strided convolution.
struct ResidualUnit {
  BatchNormLayer norm;
  ConvLayer body;
  std::optional<ConvLayer> shortcut;
};

struct AsppGroup {
  std::vector<ConvLayer> branches;
  ConvLayer fuse;
};

struct EncoderBlock {
  std::array<ResidualUnit, 3> units;  // the last one halves resolution
};

struct DecoderBlock {
  ResidualUnit up;                 // doubles resolution, halves depth
  std::optional<ConvLayer> fuse;   // 1x1 after the skip concatenation
  std::array<ResidualUnit, 2> units;
};

/// A persistent tensor of the model: a trainable parameter or a BN buffer.
struct StateEntry {
  std::string name;
  nn::Tensor* tensor = nullptr;
  bool trainable = false;
  nn::Var<float> var;  // the owning variable; undefined for buffers
};

struct NamedParameter {
  std::string name;
  nn::Var<float> var;
};

class DeOccNet {
 public:
  /// Builds the network with Kaiming fan-in initialization drawn from seed.
  /// Convs ending an identity-shortcut branch (residual-unit bodies, ASPP
  /// fuse) and the output conv are scaled by kResidualBranchGain, so a fresh
  /// network starts close to its shortcut paths.
  static DeOccNet build(const NetworkConfig& cfg, std::uint64_t seed = 0);

  const NetworkConfig& config() const { return cfg_; }

  /// (N, U*V*3, H, W) -> (N, 3, H, W).
  nn::Var<float> forward(const nn::Var<float>& x, nn::Mode mode);
  nn::Tensor infer(const nn::Tensor& x);

  /// Input projection, ASPP and encoder; returns the bottleneck. Encoder-level
  /// features for the skip connections are appended to skips when given.
  nn::Var<float> encode(const nn::Var<float>& x, nn::Mode mode, std::vector<nn::Var<float>>* skips = nullptr);

  /// Parameters then buffers of each layer, in declaration order. Pointers
  /// stay valid while the network is alive.
  std::vector<StateEntry> state();
  std::vector<NamedParameter> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  explicit DeOccNet(NetworkConfig cfg) : cfg_(std::move(cfg)) {}
  void check_input(const nn::Tensor& x) const;
  nn::Var<float> run_unit(ResidualUnit& unit, const nn::Var<float>& x, nn::Mode mode) const;

  NetworkConfig cfg_;
  ConvLayer input_;
  std::vector<AsppGroup> aspp_;
  std::vector<EncoderBlock> encoder_;
  std::vector<DecoderBlock> decoder_;
  ConvLayer output_;
};

}  // namespace lfdeocc
