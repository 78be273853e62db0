#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gestboot/image.hpp"
#include "gestboot/motion.hpp"
#include "gestboot/net.hpp"
#include "gestboot/rng.hpp"

namespace gestboot {

// Per-pixel Monte-Carlo statistics of the gesture net's hand probability.
struct UncertaintyMap {
  ImageBuffer mean;      // 1ch, in [0,1]
  ImageBuffer variance;  // 1ch, unbiased sample variance, >= 0
  int samples = 0;
};

// Training targets for the appearance net: hard labels plus the diagonal of
// the precision matrix (inverse variance), normalized to spatial mean 1.
struct PseudoLabel {
  ImageBuffer t;          // 1ch, binary {0,1}
  ImageBuffer precision;  // 1ch, >= 0
};

struct GestureTrainCfg {
  float dropout_ratio = 0.4f;
  std::vector<std::string> dropout_after = {"conv3", "conv4", "conv5"};
  float w_hand = 5.0f;
  float w_bg = 0.6f;
  int epochs = 40;
  double base_lr = 1e-2;
  double lr_power = 0.9;
  int mc_samples = 100;

  void validate() const;
};

struct GestureExample {
  MotionStack stack;
  ImageBuffer mask;  // 1ch binary ground truth
};

struct TrainReport {
  double initial_heldout_loss = 0.0;
  double final_heldout_loss = 0.0;
  std::vector<double> step_losses;  // loss before each update, in step order
};

// Trains the 2-class (background, hand) segmentation net on motion stacks
// with the weighted softmax loss. With >= 5 examples every fifth one is held
// out of the updates and used for the report's held-out losses; smaller sets
// train on everything and report training loss instead.
NetParams train_gesture_net(const std::vector<GestureExample>& examples,
                            const GestureTrainCfg& cfg, RngStream& rng,
                            TrainReport* report = nullptr);

// The gesture net architecture (3 motion channels in, 2 logit channels out).
NetSpec gesture_net_spec(const GestureTrainCfg& cfg);

// cfg.mc_samples stochastic forward passes with dropout on; per-pixel mean
// and unbiased variance of the hand-class softmax probability, accumulated in
// a fixed sequential order so a fixed seed reproduces bit-for-bit.
UncertaintyMap mc_predict(const NetSpec& spec, const NetParams& params, const MotionStack& stack,
                          const GestureTrainCfg& cfg, RngStream& rng);

// t = (mean >= threshold); precision_i = 1/(variance_i + eps_var), then
// divided by its spatial mean so the average weight is 1.
PseudoLabel make_pseudo_label(const UncertaintyMap& umap, float eps_var = 1e-4f,
                              float threshold = 0.5f);

}  // namespace gestboot
