#include "doctest.h"
#include "fixtures.hpp"
#include "lfdeocc/mask_embed.hpp"
#include "lfdeocc/training.hpp"
#include "lfdeocc/weights_io.hpp"

#include <cmath>
#include <set>

using namespace lfdeocc;
using nn::Tensor;

namespace {

NetworkConfig tiny_net() {
  NetworkConfig cfg;
  cfg.angular_rows = 3;
  cfg.angular_cols = 3;
  cfg.base_depth = 2;
  cfg.aspp_rates = {1, 2};
  cfg.aspp_groups = 1;
  return cfg;
}

std::vector<TrainingSample> tiny_dataset(std::size_t count, std::size_t size = 32) {
  std::vector<TrainingSample> out;
  for (std::size_t i = 0; i < count; ++i) {
    const LightField clean = fixtures::plane_light_field(fixtures::Texture::random(i), {3, 3}, size, size, -0.5);
    OcclusionLayer layer{fixtures::fence_mask(size / 2, size / 2, i, 6, 2), 1.5, int(size / 4), int(size / 4), 1.0};
    out.push_back({embed_layers(clean, {layer}), clean.center_view()});
  }
  return out;
}

TrainConfig tiny_train() {
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.patch = 16;
  cfg.stride = 16;
  cfg.epochs = 2;
  cfg.seed = 4;
  return cfg;
}

std::vector<float> flat_state(DeOccNet& net) {
  std::vector<float> out;
  for (const StateEntry& e : net.state()) out.insert(out.end(), e.tensor->data().begin(), e.tensor->data().end());
  return out;
}

// Scalar Adam written out directly.
struct RefAdam {
  double m = 0, v = 0;
  int t = 0;
  double step(double theta, double g, double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    return theta - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace

TEST_CASE("adam matches a scalar reference") {
  Tensor p({3}, std::vector<float>{0.5f, -1.0f, 2.0f});
  AdamState st;
  AdamConfig cfg;
  RefAdam ref[3];
  double theta[3] = {0.5, -1.0, 2.0};
  const double grads[4][3] = {{0.1, -3.0, 0.0}, {0.2, 1.0, 1e-3}, {-0.5, 0.5, 2.0}, {0.0, 0.0, -1.0}};
  for (const auto& gr : grads) {
    Tensor g({3}, std::vector<float>{float(gr[0]), float(gr[1]), float(gr[2])});
    Tensor* ps[] = {&p};
    const Tensor* gs[] = {&g};
    adam_step(ps, gs, st, cfg);
    for (int i = 0; i < 3; ++i) {
      theta[i] = ref[i].step(theta[i], double(float(gr[i])), cfg.lr);
      CHECK(p[i] == doctest::Approx(theta[i]).epsilon(1e-6));
    }
  }
  CHECK(st.t == 4);
}

TEST_CASE("adam first step moves each weight by about lr against the gradient sign") {
  Tensor p({4}, 0.0f);
  const Tensor g({4}, std::vector<float>{3.0f, -0.01f, 100.0f, -7.0f});
  AdamState st;
  Tensor* ps[] = {&p};
  const Tensor* gs[] = {&g};
  adam_step(ps, gs, st, AdamConfig{});
  for (std::size_t i = 0; i < 4; ++i) CHECK(p[i] == doctest::Approx(g[i] > 0 ? -1e-3 : 1e-3).epsilon(1e-4));
}

TEST_CASE("adam edge cases") {
  Tensor a({2}, 1.0f), b({2}, 1.0f);
  const Tensor g({2}, 1.0f);
  AdamState st;
  Tensor* ps[] = {&a, &b};
  const Tensor* gs[] = {&g, nullptr};
  adam_step(ps, gs, st, AdamConfig{});
  CHECK(b[0] == 1.0f);
  CHECK(a[0] < 1.0f);

  const Tensor a_before = a;
  const Tensor m_before = st.m[0];
  const Tensor bad({2}, std::vector<float>{1.0f, std::nanf("")});
  const Tensor* bad_gs[] = {&g, &bad};
  CHECK_THROWS_AS(adam_step(ps, bad_gs, st, AdamConfig{}), std::domain_error);
  CHECK(a == a_before);
  CHECK(st.m[0] == m_before);
  CHECK(st.t == 1);

  AdamConfig wrong;
  wrong.beta1 = 1.0;
  CHECK_THROWS_AS(adam_step(ps, gs, st, wrong), std::invalid_argument);
  const Tensor small({1}, 1.0f);
  const Tensor* mis[] = {&small, nullptr};
  CHECK_THROWS_AS(adam_step(ps, mis, st, AdamConfig{}), std::invalid_argument);
}

TEST_CASE("adam minimizes a quadratic") {
  Tensor p({2}, std::vector<float>{3.0f, -2.0f});
  AdamState st;
  AdamConfig cfg;
  cfg.lr = 0.05;
  for (int i = 0; i < 2000; ++i) {
    const Tensor g({2}, std::vector<float>{2.0f * p[0], 2.0f * p[1]});
    Tensor* ps[] = {&p};
    const Tensor* gs[] = {&g};
    adam_step(ps, gs, st, cfg);
  }
  CHECK(std::abs(p[0]) < 1e-2);
  CHECK(std::abs(p[1]) < 1e-2);
}

TEST_CASE("learning-rate schedule") {
  TrainConfig cfg;
  cfg.epochs = 20;
  CHECK(lr_at(0, cfg) == cfg.lr_initial);
  CHECK(lr_at(9, cfg) == cfg.lr_initial);
  CHECK(lr_at(10, cfg) == cfg.lr_final);
  CHECK(lr_at(19, cfg) == cfg.lr_final);
  const TrainConfig full = TrainConfig::full_scale();
  CHECK(full.batch_size == 8);
  CHECK(full.patch == 224);
  CHECK(full.stride == 112);
  CHECK(lr_at(99, full) == 1e-3);
  CHECK(lr_at(100, full) == 1e-4);
}

TEST_CASE("train config json and validation") {
  TrainConfig cfg = tiny_train();
  cfg.adam.beta2 = 0.99;
  cfg.max_steps = 17;
  const nlohmann::json j = cfg;
  CHECK(j.get<TrainConfig>() == cfg);
  CHECK(nlohmann::json::object().get<TrainConfig>() == TrainConfig{});
  cfg.patch = 40;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_train();
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("batch plan enumeration") {
  const auto data = tiny_dataset(2, 40);
  TrainConfig cfg = tiny_train();
  cfg.stride = 8;
  const BatchPlan plan(data, cfg);
  // Patch origins 0, 8, 16, 24 along each axis of a 40-pixel view.
  std::set<std::tuple<std::size_t, std::size_t, std::size_t, bool>> expected;
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t t = 0; t + 16 <= 40; t += 8)
      for (std::size_t l = 0; l + 16 <= 40; l += 8)
        for (bool up : {false, true}) expected.insert({s, t, l, up});
  std::set<std::tuple<std::size_t, std::size_t, std::size_t, bool>> got;
  for (const PatchItem& it : plan.items()) got.insert({it.sample, it.top, it.left, it.upsampled});
  CHECK(got == expected);
  CHECK(plan.items().size() == expected.size());
  CHECK(plan.batches_per_epoch() == 32);

  cfg.upsample_aug = false;
  CHECK(BatchPlan(data, cfg).items().size() == 32);
}

TEST_CASE("epoch shuffles are seeded permutations") {
  const auto data = tiny_dataset(3);
  const TrainConfig cfg = tiny_train();
  const BatchPlan plan(data, cfg);
  const std::size_t n = plan.items().size();
  CHECK(n == 3 * 4 * 2);
  std::vector<std::size_t> first;
  for (const auto& b : plan.epoch_batches(0)) {
    CHECK(b.size() <= cfg.batch_size);
    first.insert(first.end(), b.begin(), b.end());
  }
  std::vector<std::size_t> sorted = first;
  std::ranges::sort(sorted);
  for (std::size_t i = 0; i < n; ++i) CHECK(sorted[i] == i);
  CHECK(plan.epoch_batches(0) == plan.epoch_batches(0));
  CHECK(plan.epoch_batches(0) != plan.epoch_batches(1));
  TrainConfig other = cfg;
  other.seed = 5;
  CHECK(BatchPlan(data, other).epoch_batches(0) != plan.epoch_batches(0));

  other = cfg;
  other.batch_size = 5;
  const auto batches = BatchPlan(data, other).epoch_batches(0);
  CHECK(batches.size() == 5);
  CHECK(batches.back().size() == 4);
}

TEST_CASE("assembled batches hold the right patches") {
  const auto data = tiny_dataset(2);
  const TrainConfig cfg = tiny_train();
  const BatchPlan plan(data, cfg);
  for (std::size_t i = 0; i < plan.items().size(); ++i) {
    const PatchItem& it = plan.items()[i];
    if (it.upsampled) continue;
    const Batch b = plan.assemble({i});
    CHECK(b.input == stack_channels(crop(data[it.sample].lf, it.top, it.left, 16, 16)).reshaped({1, 27, 16, 16}));
    CHECK(b.target.data()[5] == crop(data[it.sample].gt, it.top, it.left, 16, 16).data()[5]);
  }
  const Batch two = plan.assemble({0, 3});
  CHECK(two.input.shape() == nn::Shape{2, 27, 16, 16});
  CHECK(two.items == std::vector<std::size_t>{0, 3});
  CHECK_THROWS_AS(plan.assemble({}), std::invalid_argument);
}

TEST_CASE("the 2x variant is a center crop of the upsampled patch") {
  // A horizontal ramp g(x) = x / 64: the upsampled crop is again a ramp with half slope.
  std::vector<float> ramp(3 * 32 * 32);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 32; ++x) ramp[(c * 32 + y) * 32 + x] = float(x) / 64.0f;
  const Image img(32, 32, 3, ramp);
  const std::vector<TrainingSample> data{{LightField({3, 3}, std::vector<Image>(9, img)), img}};
  TrainConfig cfg = tiny_train();
  const BatchPlan plan(data, cfg);
  for (std::size_t i = 0; i < plan.items().size(); ++i) {
    const PatchItem& it = plan.items()[i];
    if (!it.upsampled) continue;
    const auto [lf, gt] = plan.item_patch(i);
    for (std::size_t x = 0; x < 16; ++x) {
      const double expected = (double(it.left) + (double(x) + 8.0) / 2.0 - 0.25) / 64.0;
      CHECK(gt.at(1, 5, x) == doctest::Approx(expected).epsilon(1e-6));
      CHECK(lf.view(4).at(0, 9, x) == doctest::Approx(expected).epsilon(1e-6));
    }
  }
}

TEST_CASE("batch plan rejects bad datasets") {
  const TrainConfig cfg = tiny_train();
  CHECK_THROWS_AS(BatchPlan({}, cfg), std::invalid_argument);
  auto data = tiny_dataset(1, 8);
  CHECK_THROWS_AS(BatchPlan(data, cfg), std::invalid_argument);
  data = tiny_dataset(1);
  data.push_back({fixtures::plane_light_field(fixtures::Texture::random(1), {5, 5}, 32, 32, 0.0), Image(32, 32, 3)});
  CHECK_THROWS_AS(BatchPlan(data, cfg), std::invalid_argument);
}

TEST_CASE("training log") {
  TrainingLog log;
  CHECK_THROWS_AS(log.initial_loss(), std::logic_error);
  for (std::size_t i = 0; i < 30; ++i) log.entries.push_back({i, i / 10, 1e-3, 30.0 - double(i)});
  CHECK(log.initial_loss() == 30.0);
  CHECK(log.smoothed_final_loss() == doctest::Approx((20.0 + 1.0) / 2.0));
  CHECK(log.smoothed_final_loss(5) == doctest::Approx(3.0));
  CHECK(log.to_csv().starts_with("step,epoch,lr,loss\n0,0,0.001,30\n"));
  const nlohmann::json s = log.summary();
  CHECK(s.at("steps") == 30);
  CHECK(s.at("final_loss") == 1.0);
}

TEST_CASE("training loop") {
  const auto data = tiny_dataset(3);
  const TrainConfig cfg = tiny_train();
  fixtures::TempDir dir("train");

  DeOccNet net = DeOccNet::build(tiny_net(), 1);
  std::size_t callbacks = 0;
  TrainOptions opts;
  opts.checkpoint_dir = dir / "a";
  opts.on_step = [&](const TrainingLogEntry&) { ++callbacks; };
  const TrainingLog log = train(net, data, cfg, opts);

  SUBCASE("log and checkpoints") {
    const std::size_t per_epoch = 12;
    REQUIRE(log.entries.size() == 2 * per_epoch);
    CHECK(callbacks == log.entries.size());
    for (std::size_t i = 0; i < log.entries.size(); ++i) {
      CHECK(log.entries[i].step == i);
      CHECK(log.entries[i].epoch == i / per_epoch);
      CHECK(log.entries[i].lr == lr_at(i / per_epoch, cfg));
      CHECK(std::isfinite(log.entries[i].loss));
    }
    CHECK(log.epochs_completed == 2);
    CHECK(std::filesystem::exists(dir / "a" / "epoch_0001.docn"));
    CHECK(std::filesystem::exists(dir / "a" / "epoch_0002.docn"));
    CHECK(std::filesystem::exists(dir / "a" / "last.docn"));
    CHECK(log.checkpoints.size() == 3);
    DeOccNet loaded = load_network(dir / "a" / "last.docn");
    CHECK(flat_state(loaded) == flat_state(net));
  }
  SUBCASE("same seed, same run") {
    DeOccNet again = DeOccNet::build(tiny_net(), 1);
    TrainOptions o2;
    o2.checkpoint_dir = dir / "b";
    const TrainingLog log2 = train(again, data, cfg, o2);
    CHECK(log2.entries == log.entries);
    CHECK(flat_state(again) == flat_state(net));
    CHECK(fixtures::same_bytes(dir / "a" / "last.docn", dir / "b" / "last.docn"));
  }
  SUBCASE("resume from an epoch boundary") {
    DeOccNet other = DeOccNet::build(tiny_net(), 99);
    TrainOptions o2;
    o2.resume_from = dir / "a" / "epoch_0001.docn";
    const TrainingLog log2 = train(other, data, cfg, o2);
    CHECK(log2.entries == log.entries);
    CHECK(flat_state(other) == flat_state(net));
  }
  SUBCASE("resume from the middle of an epoch") {
    DeOccNet part = DeOccNet::build(tiny_net(), 1);
    TrainConfig stop = cfg;
    stop.max_steps = 5;
    TrainOptions o2;
    o2.checkpoint_dir = dir / "c";
    CHECK(train(part, data, stop, o2).entries.size() == 5);
    DeOccNet rest = DeOccNet::build(tiny_net(), 7);
    TrainOptions o3;
    o3.resume_from = dir / "c" / "last.docn";
    const TrainingLog log3 = train(rest, data, cfg, o3);
    CHECK(log3.entries == log.entries);
    CHECK(flat_state(rest) == flat_state(net));
  }
  SUBCASE("resume refuses a different trajectory") {
    TrainConfig changed = cfg;
    changed.seed = 5;
    TrainOptions o2;
    o2.resume_from = dir / "a" / "epoch_0001.docn";
    DeOccNet other = DeOccNet::build(tiny_net());
    CHECK_THROWS_AS(train(other, data, changed, o2), std::invalid_argument);
    NetworkConfig wide = tiny_net();
    wide.base_depth = 4;
    DeOccNet w = DeOccNet::build(wide);
    CHECK_THROWS_AS(train(w, data, cfg, o2), WeightsError);
  }
}

TEST_CASE("loss goes down on a small problem") {
  const auto data = tiny_dataset(2);
  TrainConfig cfg = tiny_train();
  cfg.epochs = 30;
  DeOccNet net = DeOccNet::build(tiny_net(), 2);
  const TrainingLog log = train(net, data, cfg);
  CHECK(log.smoothed_final_loss(8) < 0.5 * log.initial_loss());
}

TEST_CASE("divergence rolls back and stops") {
  const auto data = tiny_dataset(2);
  TrainConfig cfg = tiny_train();
  cfg.lr_initial = 1e38;
  DeOccNet net = DeOccNet::build(tiny_net(), 3);
  const std::vector<float> before = flat_state(net);
  CHECK_THROWS_AS(train(net, data, cfg), TrainingDiverged);
  CHECK(flat_state(net) == before);
}

TEST_CASE("training input checks") {
  const auto data = tiny_dataset(1);
  NetworkConfig five = tiny_net();
  five.angular_rows = 5;
  five.angular_cols = 5;
  DeOccNet net = DeOccNet::build(five);
  CHECK_THROWS_AS(train(net, data, tiny_train()), std::invalid_argument);
}
