#include "lfdeocc/training.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <random>

#include "lfdeocc/mask_embed.hpp"
#include "lfdeocc/weights_io.hpp"

namespace lfdeocc {

void AdamConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("AdamConfig: lr must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("AdamConfig: beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("AdamConfig: beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("AdamConfig: eps must be positive");
}

void adam_step(std::span<nn::Tensor* const> params, std::span<const nn::Tensor* const> grads, AdamState& state,
               const AdamConfig& cfg) {
  cfg.validate();
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: params and grads differ in count");
  if (state.m.empty()) {
    for (const nn::Tensor* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: moment buffers do not match the parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].shape() != params[i]->shape() || state.v[i].shape() != params[i]->shape()) {
      throw std::invalid_argument("adam_step: moment buffer " + std::to_string(i) + " has the wrong shape");
    }
    if (grads[i] == nullptr) continue;
    if (grads[i]->shape() != params[i]->shape()) {
      throw std::invalid_argument("adam_step: gradient " + std::to_string(i) + " has the wrong shape");
    }
    if (!grads[i]->all_finite()) {
      throw std::domain_error("adam_step: non-finite gradient for parameter " + std::to_string(i));
    }
  }

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::span<float> theta = params[i]->data();
    std::span<float> m = state.m[i].data();
    std::span<float> v = state.v[i].data();
    const nn::Tensor* g = grads[i];
    for (std::size_t e = 0; e < theta.size(); ++e) {
      const double ge = g ? static_cast<double>((*g)[e]) : 0.0;
      const double me = cfg.beta1 * m[e] + (1.0 - cfg.beta1) * ge;
      const double ve = cfg.beta2 * v[e] + (1.0 - cfg.beta2) * ge * ge;
      m[e] = static_cast<float>(me);
      v[e] = static_cast<float>(ve);
      const double mhat = me / c1;
      const double vhat = ve / c2;
      theta[e] = static_cast<float>(theta[e] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

Adam::Adam(std::vector<NamedParameter> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  cfg_.validate();
  for (const NamedParameter& p : params_) {
    state_.m.emplace_back(p.var.shape());
    state_.v.emplace_back(p.var.shape());
  }
}

void Adam::step(double lr) {
  std::vector<nn::Tensor*> values;
  std::vector<const nn::Tensor*> grads;
  for (NamedParameter& p : params_) {
    values.push_back(&p.var.value_mut());
    grads.push_back(p.var.has_grad() ? &p.var.grad() : nullptr);
    if (grads.back() && !grads.back()->all_finite()) {
      throw std::domain_error("non-finite gradient in parameter '" + p.name + "'");
    }
  }
  AdamConfig cfg = cfg_;
  cfg.lr = lr;
  adam_step(values, grads, state_, cfg);
}

TrainConfig TrainConfig::full_scale() {
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.patch = 224;
  cfg.stride = 112;
  cfg.epochs = 200;
  return cfg;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  if (patch == 0 || patch % 16 != 0) throw std::invalid_argument("TrainConfig: patch must be a positive multiple of 16");
  if (stride == 0) throw std::invalid_argument("TrainConfig: stride must be at least 1");
  if (!(lr_initial >= 0.0) || !(lr_final >= 0.0)) throw std::invalid_argument("TrainConfig: learning rates must be >= 0");
  adam.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
  j = {{"batch_size", cfg.batch_size}, {"patch", cfg.patch},           {"stride", cfg.stride},
       {"upsample_aug", cfg.upsample_aug}, {"epochs", cfg.epochs},     {"max_steps", cfg.max_steps},
       {"lr_initial", cfg.lr_initial}, {"lr_final", cfg.lr_final},     {"seed", cfg.seed},
       {"beta1", cfg.adam.beta1},      {"beta2", cfg.adam.beta2},      {"eps", cfg.adam.eps}};
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.patch = j.value("patch", cfg.patch);
  cfg.stride = j.value("stride", cfg.stride);
  cfg.upsample_aug = j.value("upsample_aug", cfg.upsample_aug);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.max_steps = j.value("max_steps", cfg.max_steps);
  cfg.lr_initial = j.value("lr_initial", cfg.lr_initial);
  cfg.lr_final = j.value("lr_final", cfg.lr_final);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.adam.beta1 = j.value("beta1", cfg.adam.beta1);
  cfg.adam.beta2 = j.value("beta2", cfg.adam.beta2);
  cfg.adam.eps = j.value("eps", cfg.adam.eps);
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  return epoch < cfg.epochs / 2 ? cfg.lr_initial : cfg.lr_final;
}

BatchPlan::BatchPlan(std::span<const TrainingSample> dataset, const TrainConfig& cfg) : dataset_(dataset), cfg_(cfg) {
  cfg_.validate();
  if (dataset_.empty()) throw std::invalid_argument("BatchPlan: empty dataset");
  const AngularGrid& grid = dataset_.front().lf.grid();
  for (std::size_t s = 0; s < dataset_.size(); ++s) {
    const TrainingSample& sample = dataset_[s];
    if (sample.lf.grid() != grid) throw std::invalid_argument("BatchPlan: samples differ in angular size");
    if (sample.lf.channels() != 3 || sample.gt.channels() != 3) {
      throw std::invalid_argument("BatchPlan: sample " + std::to_string(s) + " is not RGB");
    }
    if (sample.gt.height() != sample.lf.height() || sample.gt.width() != sample.lf.width()) {
      throw std::invalid_argument("BatchPlan: sample " + std::to_string(s) + " gt size differs from its views");
    }
    const std::size_t rows = patch_count(sample.lf.height(), cfg_.patch, cfg_.stride);
    const std::size_t cols = patch_count(sample.lf.width(), cfg_.patch, cfg_.stride);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        items_.push_back({s, r * cfg_.stride, c * cfg_.stride, false});
        if (cfg_.upsample_aug) items_.push_back({s, r * cfg_.stride, c * cfg_.stride, true});
      }
    }
  }
  if (items_.empty()) throw std::invalid_argument("BatchPlan: views are smaller than one patch");
}

std::size_t BatchPlan::batches_per_epoch() const { return (items_.size() + cfg_.batch_size - 1) / cfg_.batch_size; }

std::vector<std::vector<std::size_t>> BatchPlan::epoch_batches(std::size_t epoch) const {
  std::vector<std::size_t> order(items_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(cfg_.seed, epoch));
  // Fisher-Yates with explicit draws so the order does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t first = 0; first < order.size(); first += cfg_.batch_size) {
    const std::size_t last = std::min(order.size(), first + cfg_.batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(first),
                         order.begin() + static_cast<std::ptrdiff_t>(last));
  }
  return batches;
}

std::pair<LightField, Image> BatchPlan::item_patch(std::size_t index) const {
  const PatchItem& item = items_.at(index);
  const TrainingSample& sample = dataset_[item.sample];
  const std::size_t p = cfg_.patch;
  LightField lf = crop(sample.lf, item.top, item.left, p, p);
  Image gt = crop(sample.gt, item.top, item.left, p, p);
  if (item.upsampled) {
    const std::size_t offset = p / 2;
    lf = crop(upsample2x(lf), offset, offset, p, p);
    gt = crop(upsample2x(gt), offset, offset, p, p);
  }
  return {std::move(lf), std::move(gt)};
}

Batch BatchPlan::assemble(const std::vector<std::size_t>& indices) const {
  if (indices.empty()) throw std::invalid_argument("BatchPlan::assemble: empty batch");
  const std::size_t p = cfg_.patch;
  const std::size_t channels = dataset_.front().lf.view_count() * 3;
  Batch batch{nn::Tensor({indices.size(), channels, p, p}), nn::Tensor({indices.size(), 3, p, p}), indices};
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const auto [lf, gt] = item_patch(indices[n]);
    const nn::Tensor stacked = stack_channels(lf);
    std::ranges::copy(stacked.data(), batch.input.data().begin() + static_cast<std::ptrdiff_t>(n * stacked.numel()));
    std::ranges::copy(gt.data(), batch.target.data().begin() + static_cast<std::ptrdiff_t>(n * gt.size()));
  }
  return batch;
}

std::vector<Batch> make_batches(std::span<const TrainingSample> dataset, const TrainConfig& cfg, std::size_t epoch) {
  const BatchPlan plan(dataset, cfg);
  std::vector<Batch> out;
  for (const auto& indices : plan.epoch_batches(epoch)) out.push_back(plan.assemble(indices));
  return out;
}

double TrainingLog::initial_loss() const {
  if (entries.empty()) throw std::logic_error("TrainingLog: no steps recorded");
  return entries.front().loss;
}

double TrainingLog::smoothed_final_loss(std::size_t window) const {
  if (entries.empty()) throw std::logic_error("TrainingLog: no steps recorded");
  const std::size_t n = std::min(std::max<std::size_t>(window, 1), entries.size());
  double sum = 0.0;
  for (std::size_t i = entries.size() - n; i < entries.size(); ++i) sum += entries[i].loss;
  return sum / static_cast<double>(n);
}

std::string TrainingLog::to_csv() const {
  std::string out = "step,epoch,lr,loss\n";
  for (const TrainingLogEntry& e : entries) out += fmt::format("{},{},{},{}\n", e.step, e.epoch, e.lr, e.loss);
  return out;
}

nlohmann::json TrainingLog::summary() const {
  nlohmann::json j = {{"steps", entries.size()}, {"epochs_completed", epochs_completed}};
  if (!entries.empty()) {
    j["initial_loss"] = initial_loss();
    j["final_loss"] = entries.back().loss;
    j["smoothed_final_loss"] = smoothed_final_loss();
  }
  nlohmann::json files = nlohmann::json::array();
  for (const auto& p : checkpoints) files.push_back(p.filename().string());
  j["checkpoints"] = files;
  return j;
}

namespace {

struct Progress {
  std::size_t epoch = 0;  // epoch to run next
  std::size_t batch = 0;  // next batch within that epoch
  std::size_t step = 0;
};

// Fields that must agree for a resumed run to follow the same trajectory.
void check_resume_config(const TrainConfig& run, const TrainConfig& stored) {
  const nlohmann::json a = run;
  const nlohmann::json b = stored;
  for (const auto& [key, value] : a.items()) {
    if (key == "epochs" || key == "max_steps") continue;
    if (b.contains(key) && b.at(key) != value) {
      throw std::invalid_argument("resume: training config field '" + key + "' differs from the checkpoint (" +
                                  b.at(key).dump() + " vs " + value.dump() + ")");
    }
  }
}

WeightsFile make_checkpoint(DeOccNet& net, const Adam& adam, const TrainConfig& cfg, const Progress& progress,
                            const TrainingLog& log) {
  WeightsFile file = snapshot(net);
  const AdamState& st = adam.state();
  for (std::size_t i = 0; i < adam.parameters().size(); ++i) {
    file.tensors.emplace_back("optim.m." + adam.parameters()[i].name, st.m[i]);
  }
  for (std::size_t i = 0; i < adam.parameters().size(); ++i) {
    file.tensors.emplace_back("optim.v." + adam.parameters()[i].name, st.v[i]);
  }
  nlohmann::json entries = nlohmann::json::array();
  for (const TrainingLogEntry& e : log.entries) entries.push_back({e.step, e.epoch, e.lr, e.loss});
  file.header["checkpoint"] = {{"epoch", progress.epoch},
                               {"batch", progress.batch},
                               {"step", progress.step},
                               {"adam_t", st.t},
                               {"epochs_completed", log.epochs_completed},
                               {"train", cfg},
                               {"log", entries}};
  return file;
}

Progress load_checkpoint(DeOccNet& net, Adam& adam, const TrainConfig& cfg, const std::filesystem::path& path,
                         TrainingLog& log) {
  const WeightsFile file = read_weights_file(path);
  if (!file.header.contains("checkpoint")) {
    throw WeightsError(WeightsErrorKind::Format, "checkpoint", path.string() + ": not a checkpoint (no progress block)");
  }
  const nlohmann::json& ck = file.header.at("checkpoint");
  check_resume_config(cfg, ck.at("train").get<TrainConfig>());

  AdamState st;
  for (const NamedParameter& p : adam.parameters()) {
    for (const char* kind : {"m", "v"}) {
      const std::string name = fmt::format("optim.{}.{}", kind, p.name);
      const nn::Tensor* t = file.find(name);
      if (t == nullptr || t->shape() != p.var.shape()) {
        throw WeightsError(WeightsErrorKind::ConfigMismatch, name, path.string() + ": bad or missing '" + name + "'");
      }
      (kind[0] == 'm' ? st.m : st.v).push_back(*t);
    }
  }
  st.t = ck.at("adam_t").get<std::uint64_t>();
  restore(net, file);
  adam.state() = std::move(st);

  log.entries.clear();
  for (const auto& e : ck.at("log")) {
    log.entries.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(), e.at(2).get<double>(),
                           e.at(3).get<double>()});
  }
  log.epochs_completed = ck.at("epochs_completed").get<std::size_t>();
  return {ck.at("epoch").get<std::size_t>(), ck.at("batch").get<std::size_t>(), ck.at("step").get<std::size_t>()};
}

}  // namespace

TrainingLog train(DeOccNet& net, std::span<const TrainingSample> dataset, const TrainConfig& cfg,
                  const TrainOptions& options) {
  cfg.validate();
  const BatchPlan plan(dataset, cfg);
  const NetworkConfig& ncfg = net.config();
  const AngularGrid& grid = dataset.front().lf.grid();
  if (grid.rows != ncfg.angular_rows || grid.cols != ncfg.angular_cols) {
    throw std::invalid_argument(fmt::format("train: dataset is {}x{} views, network expects {}x{}", grid.rows,
                                            grid.cols, ncfg.angular_rows, ncfg.angular_cols));
  }
  if (cfg.patch % ncfg.spatial_multiple() != 0) {
    throw std::invalid_argument("train: patch size must be a multiple of " + std::to_string(ncfg.spatial_multiple()));
  }

  Adam adam(net.parameters(), cfg.adam);
  TrainingLog log;
  Progress progress;
  if (options.resume_from) progress = load_checkpoint(net, adam, cfg, *options.resume_from, log);

  if (!options.checkpoint_dir.empty()) std::filesystem::create_directories(options.checkpoint_dir);
  auto save = [&](const std::string& filename) {
    if (options.checkpoint_dir.empty()) return;
    const std::filesystem::path path = options.checkpoint_dir / filename;
    write_weights_file(path, make_checkpoint(net, adam, cfg, progress, log));
    if (std::ranges::find(log.checkpoints, path) == log.checkpoints.end()) log.checkpoints.push_back(path);
  };

  // Rollback point for divergence: the state at the last epoch boundary.
  WeightsFile good_weights = snapshot(net);
  AdamState good_adam = adam.state();
  auto diverge = [&](const std::string& what) {
    restore(net, good_weights);
    adam.state() = good_adam;
    net.zero_grad();
    throw TrainingDiverged(fmt::format("training diverged at step {} (epoch {}): {}; model restored to epoch {} start",
                                       progress.step, progress.epoch, what, progress.epoch));
  };

  const auto limit_reached = [&] { return cfg.max_steps != 0 && progress.step >= cfg.max_steps; };
  while (progress.epoch < cfg.epochs && !limit_reached()) {
    const auto batches = plan.epoch_batches(progress.epoch);
    const double lr = lr_at(progress.epoch, cfg);
    while (progress.batch < batches.size() && !limit_reached()) {
      const Batch batch = plan.assemble(batches[progress.batch]);
      net.zero_grad();
      const nn::Var<float> pred = net.forward(nn::Var<float>::constant(batch.input), nn::Mode::Train);
      const nn::Var<float> loss = nn::mse_loss(pred, nn::Var<float>::constant(batch.target));
      const double value = loss.value()[0];
      if (!std::isfinite(value)) diverge("non-finite loss");
      nn::backward(loss);
      try {
        adam.step(lr);
      } catch (const std::domain_error& e) {
        diverge(e.what());
      }
      const TrainingLogEntry entry{progress.step, progress.epoch, lr, value};
      log.entries.push_back(entry);
      if (options.on_step) options.on_step(entry);
      ++progress.step;
      ++progress.batch;
    }
    if (progress.batch == batches.size()) {
      ++progress.epoch;
      progress.batch = 0;
      log.epochs_completed = progress.epoch;
      good_weights = snapshot(net);
      good_adam = adam.state();
      save(fmt::format("epoch_{:04}.docn", progress.epoch));
    }
  }
  net.zero_grad();
  save("last.docn");
  return log;
}

}  // namespace lfdeocc
