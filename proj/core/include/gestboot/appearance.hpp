#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gestboot/gesture.hpp"
#include "gestboot/image.hpp"
#include "gestboot/net.hpp"
#include "gestboot/rng.hpp"

namespace gestboot {

struct AugmentCfg {
  bool enable_transform = true;   // random crop, rotation, horizontal flip
  bool enable_brightness = true;  // HSV value scaling
  bool enable_background = true;  // hand-free frames as all-background samples

  float crop_fraction = 0.8f;  // per axis; crop happens with probability 1/2
  std::vector<float> rotation_angles = {0.0f, 15.0f, -15.0f, 30.0f, -30.0f};  // degrees
  float hflip_prob = 0.5f;
  std::vector<float> brightness_levels = {0.2f, 0.3f, 0.4f, 0.5f, 0.6f};  // V' = V * level
  std::vector<ImageBuffer> background_images;

  void validate() const;
};

struct AppearanceTrainCfg {
  int epochs = 60;
  double base_lr = 1e-6;  // pairs with the sum-form loss at 96x128
  double lr_power = 0.9;
  std::vector<std::string> dropout_after = {"conv4", "conv5", "fc6", "fc7"};
  float dropout_ratio = 0.4f;
  float alpha = 0.5f;         // soft-sigmoid slope
  bool use_precision = true;  // false: identity weighting (precision forced to 1)

  void validate() const;
};

struct TrainSample {
  ImageBuffer frame;  // RGB
  PseudoLabel label;
};

// One augmentation draw. Fixed draw order: crop coin, crop offsets, rotation
// angle, flip coin, brightness level. Geometric transforms hit frame, t and
// precision alike (nearest-neighbor for t so it stays binary, bilinear for
// the others); the precision map is re-normalized to spatial mean 1 after
// geometric transforms. Brightness scales HSV V by the sampled level.
TrainSample augment_sample(const TrainSample& sample, const AugmentCfg& cfg, RngStream& rng);

// Inserts cfg.background_images into the stream at uniformly drawn positions
// as samples with t = 0 and precision = 1 everywhere. No-op when
// enable_background is false or no images are configured.
std::vector<TrainSample> inject_background(const std::vector<TrainSample>& stream,
                                           const AugmentCfg& cfg, RngStream& rng);

// The appearance net architecture (3 RGB channels in, 1 logit channel out).
NetSpec appearance_net_spec(const AppearanceTrainCfg& cfg);

// Trains the single-logit net on RGB frames under the precision-weighted
// soft-sigmoid loss. use_precision = false replaces every precision map with
// ones at ingestion and then runs the identical code path, so a run whose
// precisions are already uniform is bitwise identical between the two arms.
// Augmentation is redrawn every epoch.
NetParams train_appearance_net(const std::vector<TrainSample>& samples,
                               const AppearanceTrainCfg& cfg, const AugmentCfg& aug_cfg,
                               RngStream& rng, TrainReport* report = nullptr);

// Deterministic inference: dropout off, soft_sigmoid(logits, alpha) in [0,1].
ImageBuffer segment(const NetSpec& spec, const NetParams& params, const ImageBuffer& frame,
                    float alpha = 0.5f);

}  // namespace gestboot
