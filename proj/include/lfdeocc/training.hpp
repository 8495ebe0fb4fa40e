#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lfdeocc/deoccnet.hpp"
#include "lfdeocc/light_field.hpp"

namespace lfdeocc {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// Moment buffers (shaped like the parameters) and the step counter.
struct AdamState {
  std::vector<nn::Tensor> m;
  std::vector<nn::Tensor> v;
  std::uint64_t t = 0;
};

/// One Adam update of every parameter. A null gradient counts as zero.
/// Throws std::domain_error, leaving params and state untouched, if any
/// gradient is non-finite. Empty moment buffers are initialized to zero.
void adam_step(std::span<nn::Tensor* const> params, std::span<const nn::Tensor* const> grads, AdamState& state,
               const AdamConfig& cfg);

/// Adam over a model's named parameters, reading their accumulated grads.
class Adam {
 public:
  Adam(std::vector<NamedParameter> params, AdamConfig cfg);

  void step(double lr);
  const AdamConfig& config() const { return cfg_; }
  const std::vector<NamedParameter>& parameters() const { return params_; }
  AdamState& state() { return state_; }
  const AdamState& state() const { return state_; }

 private:
  std::vector<NamedParameter> params_;
  AdamConfig cfg_;
  AdamState state_;
};

struct TrainConfig {
  std::size_t batch_size = 4;
  std::size_t patch = 64;
  std::size_t stride = 32;
  bool upsample_aug = true;
  std::size_t epochs = 20;
  /// Stop after this many optimizer steps in total; 0 means no limit.
  std::size_t max_steps = 0;
  double lr_initial = 1e-3;
  double lr_final = 1e-4;
  std::uint64_t seed = 0;
  AdamConfig adam;

  /// Full-scale schedule: batch 8, 224 patches at stride 112, 200 epochs.
  static TrainConfig full_scale();
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
/// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, TrainConfig& cfg);

/// lr_initial for the first half of the epochs, lr_final afterwards.
double lr_at(std::size_t epoch, const TrainConfig& cfg);

struct TrainingSample {
  LightField lf;  // occluded, RGB views
  Image gt;       // occlusion-free center view
};

/// One training item: a patch of one sample, optionally its 2x variant
/// (upsampled by 2 and center-cropped back to the patch size).
struct PatchItem {
  std::size_t sample = 0;
  std::size_t top = 0;
  std::size_t left = 0;
  bool upsampled = false;

  friend bool operator==(const PatchItem&, const PatchItem&) = default;
};

struct Batch {
  nn::Tensor input;   // (N, U*V*3, P, P)
  nn::Tensor target;  // (N, 3, P, P)
  std::vector<std::size_t> items;
};

/// Enumerates patch items of a dataset and deals them into seeded,
/// per-epoch shuffled batches. Holds a reference to the dataset.
class BatchPlan {
 public:
  BatchPlan(std::span<const TrainingSample> dataset, const TrainConfig& cfg);

  const std::vector<PatchItem>& items() const { return items_; }
  std::size_t batches_per_epoch() const;
  /// Item indices of each batch of the epoch; the last batch may be short.
  std::vector<std::vector<std::size_t>> epoch_batches(std::size_t epoch) const;
  /// Materializes one item as (stacked LF patch, gt patch).
  std::pair<LightField, Image> item_patch(std::size_t index) const;
  Batch assemble(const std::vector<std::size_t>& indices) const;

 private:
  std::span<const TrainingSample> dataset_;
  TrainConfig cfg_;
  std::vector<PatchItem> items_;
};

/// All batches of one epoch, materialized.
std::vector<Batch> make_batches(std::span<const TrainingSample> dataset, const TrainConfig& cfg, std::size_t epoch);

struct TrainingLogEntry {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;

  friend bool operator==(const TrainingLogEntry&, const TrainingLogEntry&) = default;
};

struct TrainingLog {
  std::vector<TrainingLogEntry> entries;
  std::size_t epochs_completed = 0;
  std::vector<std::filesystem::path> checkpoints;

  /// Loss of the first step.
  double initial_loss() const;
  /// Mean loss over the last `window` steps.
  double smoothed_final_loss(std::size_t window = 20) const;
  std::string to_csv() const;
  nlohmann::json summary() const;
};

struct TrainOptions {
  /// Checkpoints are written here after every epoch; empty disables them.
  std::filesystem::path checkpoint_dir;
  /// Continue from this checkpoint instead of the current model state.
  std::optional<std::filesystem::path> resume_from;
  std::function<void(const TrainingLogEntry&)> on_step;
};

/// Raised when training hits a non-finite loss or gradient. The model is
/// rolled back to the state at the last epoch boundary before it is thrown.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// MSE training with Adam. A checkpoint holds the weights, the Adam moments
/// ("optim.m.<name>", "optim.v.<name>"), the progress and the log so far.
TrainingLog train(DeOccNet& net, std::span<const TrainingSample> dataset, const TrainConfig& cfg,
                  const TrainOptions& options = {});

}  // namespace lfdeocc
