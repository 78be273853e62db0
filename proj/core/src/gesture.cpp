#include <algorithm>
#include <cmath>
#include <numeric>

#include "gestboot/error.hpp"
#include "gestboot/gesture.hpp"

namespace gestboot {

void GestureTrainCfg::validate() const {
  if (dropout_ratio < 0.0f || dropout_ratio >= 1.0f) {
    throw InvalidInputError("gesture cfg: dropout_ratio must be in [0,1)");
  }
  if (w_hand <= 0.0f || w_bg <= 0.0f) {
    throw InvalidInputError("gesture cfg: class weights must be > 0");
  }
  if (epochs < 1) throw InvalidInputError("gesture cfg: epochs must be >= 1");
  if (mc_samples < 2) throw InvalidInputError("gesture cfg: mc_samples must be >= 2");
}

NetSpec gesture_net_spec(const GestureTrainCfg& cfg) {
  return make_toy_net(3, 2, cfg.dropout_after, cfg.dropout_ratio);
}

namespace {

// Mean weighted-softmax loss over a set of examples, dropout off.
double eval_loss(const NetSpec& spec, const NetParams& params,
                 const std::vector<const GestureExample*>& set, const GestureTrainCfg& cfg) {
  double total = 0.0;
  for (const GestureExample* ex : set) {
    const TensorF out =
        net_forward<float>(spec, params, tensor_from_image(ex->stack.channels), false, nullptr);
    total += weighted_softmax_loss<float>(out, tensor_from_image(ex->mask), cfg.w_hand, cfg.w_bg)
                 .loss;
  }
  return set.empty() ? 0.0 : total / static_cast<double>(set.size());
}

}  // namespace

NetParams train_gesture_net(const std::vector<GestureExample>& examples,
                            const GestureTrainCfg& cfg, RngStream& rng, TrainReport* report) {
  cfg.validate();
  if (examples.empty()) throw InvalidInputError("train_gesture_net: no examples");
  for (const GestureExample& ex : examples) {
    ex.stack.channels.validate();
    if (ex.stack.channels.channels != 3) {
      throw InvalidInputError("train_gesture_net: motion stacks must have 3 channels");
    }
    if (ex.mask.channels != 1 || ex.mask.height != ex.stack.channels.height ||
        ex.mask.width != ex.stack.channels.width) {
      throw InvalidInputError("train_gesture_net: mask dims do not match stack");
    }
  }

  std::vector<const GestureExample*> train_set, holdout;
  if (examples.size() >= 5) {
    for (std::size_t i = 0; i < examples.size(); ++i) {
      (i % 5 == 4 ? holdout : train_set).push_back(&examples[i]);
    }
  } else {
    for (const GestureExample& ex : examples) train_set.push_back(&ex);
    holdout = train_set;
  }

  const NetSpec spec = gesture_net_spec(cfg);
  NetParams params = init_params<float>(spec, rng);
  if (report) report->initial_heldout_loss = eval_loss(spec, params, holdout, cfg);

  PolyLrSchedule schedule{cfg.base_lr, cfg.lr_power,
                          cfg.epochs * static_cast<int>(train_set.size())};
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  int iter = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the shared stream keeps the run reproducible.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.next_below(static_cast<uint32_t>(i))]);
    }
    for (std::size_t idx : order) {
      const GestureExample& ex = *train_set[idx];
      ForwardCache<float> cache;
      const TensorF out = net_forward<float>(spec, params, tensor_from_image(ex.stack.channels),
                                             true, &rng, &cache);
      LossResult<float> loss =
          weighted_softmax_loss<float>(out, tensor_from_image(ex.mask), cfg.w_hand, cfg.w_bg);
      if (report) report->step_losses.push_back(loss.loss);
      const Gradients grads = net_backward<float>(spec, params, cache, loss.grad);
      sgd_step(params, grads, schedule, iter++);
    }
  }

  if (report) report->final_heldout_loss = eval_loss(spec, params, holdout, cfg);
  return params;
}

UncertaintyMap mc_predict(const NetSpec& spec, const NetParams& params, const MotionStack& stack,
                          const GestureTrainCfg& cfg, RngStream& rng) {
  if (cfg.mc_samples < 2) throw InvalidInputError("mc_predict: mc_samples must be >= 2");
  stack.channels.validate();

  const TensorF input = tensor_from_image(stack.channels);
  const std::size_t n = input.plane_size();
  std::vector<double> mean(n, 0.0), m2(n, 0.0);

  for (int s = 0; s < cfg.mc_samples; ++s) {
    const TensorF out = net_forward<float>(spec, params, input, true, &rng);
    if (out.channels != 2) throw InvalidInputError("mc_predict: net must emit 2 logit channels");
    // Welford update on the hand-class softmax probability.
    for (std::size_t i = 0; i < n; ++i) {
      const float l0 = out.data[i];
      const float l1 = out.data[n + i];
      const float m = std::max(l0, l1);
      const float e0 = std::exp(l0 - m);
      const float e1 = std::exp(l1 - m);
      const double p = e1 / (e0 + e1);
      const double delta = p - mean[i];
      mean[i] += delta / (s + 1);
      m2[i] += delta * (p - mean[i]);
    }
  }

  UncertaintyMap umap;
  umap.samples = cfg.mc_samples;
  umap.mean = ImageBuffer(stack.channels.height, stack.channels.width, 1);
  umap.variance = ImageBuffer(stack.channels.height, stack.channels.width, 1);
  for (std::size_t i = 0; i < n; ++i) {
    umap.mean.data[i] = static_cast<float>(mean[i]);
    umap.variance.data[i] = static_cast<float>(std::max(0.0, m2[i] / (cfg.mc_samples - 1)));
  }
  return umap;
}

PseudoLabel make_pseudo_label(const UncertaintyMap& umap, float eps_var, float threshold) {
  if (eps_var <= 0.0f) throw InvalidInputError("make_pseudo_label: eps_var must be > 0");
  if (threshold <= 0.0f || threshold >= 1.0f) {
    throw InvalidInputError("make_pseudo_label: threshold must be in (0,1)");
  }
  umap.mean.validate();
  if (!umap.mean.same_dims(umap.variance)) {
    throw InvalidInputError("make_pseudo_label: mean/variance dims mismatch");
  }

  PseudoLabel label;
  label.t = ImageBuffer(umap.mean.height, umap.mean.width, 1);
  label.precision = ImageBuffer(umap.mean.height, umap.mean.width, 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < umap.mean.data.size(); ++i) {
    label.t.data[i] = umap.mean.data[i] >= threshold ? 1.0f : 0.0f;
    const double p = 1.0 / (static_cast<double>(umap.variance.data[i]) + eps_var);
    label.precision.data[i] = static_cast<float>(p);
    sum += p;
  }
  const double norm = sum / static_cast<double>(label.precision.data.size());
  for (float& p : label.precision.data) p = static_cast<float>(p / norm);
  return label;
}

}  // namespace gestboot
