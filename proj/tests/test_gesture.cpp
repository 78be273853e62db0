#include <cmath>
#include <vector>

#include "doctest.h"
#include "gestboot/error.hpp"
#include "gestboot/gesture.hpp"
#include "gestboot/metrics.hpp"
#include "gestboot/rng.hpp"

using namespace gestboot;

namespace {

// Tiny synthetic "motion" example: a bright square in the foreground channel
// with matching flow response, mask equal to the square.
GestureExample square_example(int h, int w, int top, int left, int size, std::uint64_t seed) {
  RngStream rng(seed);
  GestureExample ex;
  ex.stack.channels = ImageBuffer(h, w, 3);
  ex.mask = ImageBuffer(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool in = y >= top && y < top + size && x >= left && x < left + size;
      ex.stack.channels.at(0, y, x) = in ? 0.95f : 0.05f * rng.next_float();
      ex.stack.channels.at(1, y, x) = in ? 0.8f : 0.5f;
      ex.stack.channels.at(2, y, x) = in ? 0.7f : 0.5f;
      ex.mask.at(0, y, x) = in ? 1.0f : 0.0f;
    }
  }
  return ex;
}

GestureTrainCfg tiny_cfg() {
  GestureTrainCfg cfg;
  cfg.epochs = 30;
  cfg.base_lr = 5e-3;
  cfg.mc_samples = 12;
  return cfg;
}

}  // namespace

TEST_CASE("gesture: training fits a simple motion pattern") {
  std::vector<GestureExample> examples;
  for (int i = 0; i < 6; ++i) {
    examples.push_back(square_example(16, 20, 2 + i, 3 + i, 6, 100 + i));
  }
  // Convergence check, so dropout off: the handful of tiny examples here
  // cannot fight a 0.4 drop rate the way the full-size corpus can.
  GestureTrainCfg cfg = tiny_cfg();
  cfg.dropout_after = {};
  cfg.epochs = 120;
  cfg.base_lr = 2e-2;
  RngStream rng(1);
  TrainReport report;
  const NetParams params = train_gesture_net(examples, cfg, rng, &report);
  CHECK(report.final_heldout_loss < report.initial_heldout_loss);
  CHECK_FALSE(report.step_losses.empty());

  // The trained net should segment a fresh square decently.
  const GestureExample probe = square_example(16, 20, 5, 8, 6, 999);
  const NetSpec spec = gesture_net_spec(cfg);
  const TensorF logits =
      net_forward(spec, params, tensor_from_image(probe.stack.channels), false, nullptr);
  ImageBuffer prob(16, 20, 1);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 20; ++x) {
      const float b = logits.at(0, y, x), hcl = logits.at(1, y, x);
      const float m = std::max(b, hcl);
      const float eb = std::exp(b - m), eh = std::exp(hcl - m);
      prob.at(0, y, x) = eh / (eb + eh);
    }
  }
  CHECK(f1_score(prob, probe.mask).f1 > 0.6);
}

TEST_CASE("gesture: training is deterministic in the seed") {
  std::vector<GestureExample> examples;
  for (int i = 0; i < 3; ++i) examples.push_back(square_example(12, 14, 2, 2 + i, 5, 7 + i));
  GestureTrainCfg cfg = tiny_cfg();
  cfg.epochs = 4;
  RngStream r1(42), r2(42), r3(43);
  const NetParams a = train_gesture_net(examples, cfg, r1);
  const NetParams b = train_gesture_net(examples, cfg, r2);
  const NetParams c = train_gesture_net(examples, cfg, r3);
  REQUIRE(a.convs.size() == b.convs.size());
  bool differs_from_c = false;
  for (std::size_t i = 0; i < a.convs.size(); ++i) {
    CHECK(a.convs[i].w == b.convs[i].w);
    CHECK(a.convs[i].b == b.convs[i].b);
    if (a.convs[i].w != c.convs[i].w) differs_from_c = true;
  }
  CHECK(differs_from_c);
}

TEST_CASE("gesture: config validation") {
  GestureTrainCfg cfg;
  cfg.dropout_ratio = 1.0f;
  CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
  cfg = GestureTrainCfg{};
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
  cfg = GestureTrainCfg{};
  cfg.mc_samples = 1;
  CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
  cfg = GestureTrainCfg{};
  cfg.w_hand = 0.0f;
  CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
  RngStream rng(1);
  CHECK_THROWS_AS(train_gesture_net({}, GestureTrainCfg{}, rng), InvalidInputError);
}

TEST_CASE("gesture: mc_predict statistics behave") {
  const GestureExample ex = square_example(16, 20, 4, 6, 6, 55);
  GestureTrainCfg cfg = tiny_cfg();
  cfg.mc_samples = 20;
  const NetSpec spec = gesture_net_spec(cfg);
  RngStream init_rng(3);
  const NetParams params = init_params<float>(spec, init_rng);

  RngStream r1(9), r2(9);
  const UncertaintyMap a = mc_predict(spec, params, ex.stack, cfg, r1);
  const UncertaintyMap b = mc_predict(spec, params, ex.stack, cfg, r2);
  CHECK(a.samples == 20);
  CHECK(a.mean.data == b.mean.data);
  CHECK(a.variance.data == b.variance.data);
  for (std::size_t i = 0; i < a.mean.data.size(); ++i) {
    CHECK(a.mean.data[i] >= 0.0f);
    CHECK(a.mean.data[i] <= 1.0f);
    CHECK(a.variance.data[i] >= 0.0f);
  }
  // Dropout somewhere in the net means nonzero dispersion overall.
  double var_sum = 0.0;
  for (float v : a.variance.data) var_sum += v;
  CHECK(var_sum > 0.0);

  // Without dropout layers the MC samples are identical: variance collapses.
  GestureTrainCfg nodrop = cfg;
  nodrop.dropout_after.clear();
  const NetSpec spec0 = gesture_net_spec(nodrop);
  RngStream init0(3);
  const NetParams params0 = init_params<float>(spec0, init0);
  RngStream r0(9);
  const UncertaintyMap u0 = mc_predict(spec0, params0, ex.stack, nodrop, r0);
  for (float v : u0.variance.data) CHECK(v <= 1e-12f);
}

TEST_CASE("gesture: pseudo-labels threshold the mean and normalize precision") {
  UncertaintyMap umap;
  umap.mean = ImageBuffer(1, 4, 1);
  umap.mean.data = {0.2f, 0.5f, 0.8f, 0.49f};
  umap.variance = ImageBuffer(1, 4, 1);
  umap.variance.data = {0.0f, 0.01f, 0.04f, 0.09f};
  umap.samples = 10;

  const float eps = 1e-4f;
  const PseudoLabel label = make_pseudo_label(umap, eps, 0.5f);
  CHECK(label.t.data == std::vector<float>{0.0f, 1.0f, 1.0f, 0.0f});

  // precision = (1/(var+eps)) / mean(1/(var+eps)).
  std::vector<double> raw;
  double mean_raw = 0.0;
  for (float v : umap.variance.data) {
    raw.push_back(1.0 / (static_cast<double>(v) + eps));
    mean_raw += raw.back();
  }
  mean_raw /= 4.0;
  double mean_out = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(label.precision.data[i] == doctest::Approx(raw[i] / mean_raw).epsilon(1e-5));
    mean_out += label.precision.data[i];
  }
  CHECK(mean_out / 4.0 == doctest::Approx(1.0).epsilon(1e-6));
  // Zero-variance pixels get the largest (eps-capped) weight.
  CHECK(label.precision.data[0] > label.precision.data[3]);
}
