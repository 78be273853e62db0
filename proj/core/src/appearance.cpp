#include <algorithm>
#include <cmath>
#include <numeric>

#include "gestboot/appearance.hpp"
#include "gestboot/error.hpp"

namespace gestboot {

void AugmentCfg::validate() const {
  if (crop_fraction <= 0.0f || crop_fraction > 1.0f) {
    throw InvalidInputError("augment cfg: crop_fraction must be in (0,1]");
  }
  if (hflip_prob < 0.0f || hflip_prob > 1.0f) {
    throw InvalidInputError("augment cfg: hflip_prob must be in [0,1]");
  }
  if (enable_transform && rotation_angles.empty()) {
    throw InvalidInputError("augment cfg: rotation_angles must not be empty");
  }
  if (enable_brightness && brightness_levels.empty()) {
    throw InvalidInputError("augment cfg: brightness_levels must not be empty");
  }
  for (float level : brightness_levels) {
    if (level <= 0.0f || level > 1.0f) {
      throw InvalidInputError("augment cfg: brightness levels must be in (0,1]");
    }
  }
}

void AppearanceTrainCfg::validate() const {
  if (epochs < 1) throw InvalidInputError("appearance cfg: epochs must be >= 1");
  if (dropout_ratio < 0.0f || dropout_ratio >= 1.0f) {
    throw InvalidInputError("appearance cfg: dropout_ratio must be in [0,1)");
  }
  if (!(alpha > 0.0f && alpha < 1.0f)) {
    throw InvalidInputError("appearance cfg: alpha must be in (0,1)");
  }
}

NetSpec appearance_net_spec(const AppearanceTrainCfg& cfg) {
  return make_toy_net(3, 1, cfg.dropout_after, cfg.dropout_ratio);
}

namespace {

void renormalize_precision(ImageBuffer& precision) {
  double sum = 0.0;
  for (float p : precision.data) sum += p;
  if (sum <= 0.0) return;
  const double norm = sum / static_cast<double>(precision.data.size());
  for (float& p : precision.data) p = static_cast<float>(p / norm);
}

ImageBuffer scale_value(const ImageBuffer& frame, float level) {
  if (frame.channels == 1) {
    ImageBuffer out = frame;
    for (float& v : out.data) v = std::clamp(v * level, 0.0f, 1.0f);
    return out;
  }
  ImageBuffer hsv = rgb_to_hsv(frame);
  float* value = hsv.plane(2);
  for (std::size_t i = 0; i < hsv.plane_size(); ++i) {
    value[i] = std::clamp(value[i] * level, 0.0f, 1.0f);
  }
  return hsv_to_rgb(hsv);
}

}  // namespace

TrainSample augment_sample(const TrainSample& sample, const AugmentCfg& cfg, RngStream& rng) {
  cfg.validate();
  sample.frame.validate();
  if (!sample.label.t.same_dims(sample.label.precision) ||
      sample.label.t.height != sample.frame.height ||
      sample.label.t.width != sample.frame.width || sample.label.t.channels != 1) {
    throw InvalidInputError("augment_sample: frame/label dims mismatch");
  }

  TrainSample out = sample;
  bool geometric = false;

  if (cfg.enable_transform) {
    // Crop-to-fraction then resize back, half the time.
    if (rng.bernoulli(0.5) && cfg.crop_fraction < 1.0f) {
      const int h = out.frame.height, w = out.frame.width;
      const int ch = std::max(1, static_cast<int>(std::lround(h * cfg.crop_fraction)));
      const int cw = std::max(1, static_cast<int>(std::lround(w * cfg.crop_fraction)));
      const int y0 = static_cast<int>(rng.next_below(static_cast<uint32_t>(h - ch + 1)));
      const int x0 = static_cast<int>(rng.next_below(static_cast<uint32_t>(w - cw + 1)));
      out.frame = resize_bilinear(crop(out.frame, y0, x0, ch, cw), h, w);
      out.label.t = resize_nearest(crop(out.label.t, y0, x0, ch, cw), h, w);
      out.label.precision = resize_bilinear(crop(out.label.precision, y0, x0, ch, cw), h, w);
      geometric = true;
    }

    const float angle =
        cfg.rotation_angles[rng.next_below(static_cast<uint32_t>(cfg.rotation_angles.size()))];
    if (angle != 0.0f) {
      out.frame = rotate_about_center(out.frame, angle, 0.0f, Sampling::kBilinear);
      out.label.t = rotate_about_center(out.label.t, angle, 0.0f, Sampling::kNearest);
      out.label.precision =
          rotate_about_center(out.label.precision, angle, 0.0f, Sampling::kBilinear);
      geometric = true;
    }

    if (rng.bernoulli(cfg.hflip_prob)) {
      out.frame = hflip(out.frame);
      out.label.t = hflip(out.label.t);
      out.label.precision = hflip(out.label.precision);
      geometric = true;
    }
  }

  if (geometric) renormalize_precision(out.label.precision);

  if (cfg.enable_brightness) {
    const float level =
        cfg.brightness_levels[rng.next_below(static_cast<uint32_t>(cfg.brightness_levels.size()))];
    out.frame = scale_value(out.frame, level);
  }
  return out;
}

std::vector<TrainSample> inject_background(const std::vector<TrainSample>& stream,
                                           const AugmentCfg& cfg, RngStream& rng) {
  if (!cfg.enable_background || cfg.background_images.empty()) return stream;
  std::vector<TrainSample> out = stream;
  for (const ImageBuffer& bg : cfg.background_images) {
    bg.validate();
    TrainSample sample;
    sample.frame = bg;
    sample.label.t = ImageBuffer(bg.height, bg.width, 1);
    sample.label.precision = ImageBuffer(bg.height, bg.width, 1);
    std::fill(sample.label.precision.data.begin(), sample.label.precision.data.end(), 1.0f);
    const std::size_t pos = rng.next_below(static_cast<uint32_t>(out.size() + 1));
    out.insert(out.begin() + pos, std::move(sample));
  }
  return out;
}

NetParams train_appearance_net(const std::vector<TrainSample>& samples,
                               const AppearanceTrainCfg& cfg, const AugmentCfg& aug_cfg,
                               RngStream& rng, TrainReport* report) {
  cfg.validate();
  aug_cfg.validate();
  if (samples.empty()) throw InvalidInputError("train_appearance_net: no samples");

  std::vector<TrainSample> base = inject_background(samples, aug_cfg, rng);
  for (TrainSample& sample : base) {
    sample.frame.validate();
    if (sample.frame.channels != 3) {
      throw InvalidInputError("train_appearance_net: frames must be RGB");
    }
    if (!cfg.use_precision) {
      std::fill(sample.label.precision.data.begin(), sample.label.precision.data.end(), 1.0f);
    }
  }

  const NetSpec spec = appearance_net_spec(cfg);
  NetParams params = init_params<float>(spec, rng);
  PolyLrSchedule schedule{cfg.base_lr, cfg.lr_power,
                          cfg.epochs * static_cast<int>(base.size())};

  std::vector<std::size_t> order(base.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  int iter = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.next_below(static_cast<uint32_t>(i))]);
    }
    for (std::size_t idx : order) {
      const bool augment = aug_cfg.enable_transform || aug_cfg.enable_brightness;
      const TrainSample sample =
          augment ? augment_sample(base[idx], aug_cfg, rng) : base[idx];

      ForwardCache<float> cache;
      const TensorF out =
          net_forward<float>(spec, params, tensor_from_image(sample.frame), true, &rng, &cache);
      LossResult<float> loss = precision_weighted_loss<float>(
          out, tensor_from_image(sample.label.t), tensor_from_image(sample.label.precision),
          cfg.alpha);
      if (report) report->step_losses.push_back(loss.loss);
      const Gradients grads = net_backward<float>(spec, params, cache, loss.grad);
      sgd_step(params, grads, schedule, iter++);
    }
  }

  if (report) {
    report->initial_heldout_loss = report->step_losses.empty() ? 0.0 : report->step_losses.front();
    report->final_heldout_loss = report->step_losses.empty() ? 0.0 : report->step_losses.back();
  }
  return params;
}

ImageBuffer segment(const NetSpec& spec, const NetParams& params, const ImageBuffer& frame,
                    float alpha) {
  frame.validate();
  const TensorF logits = net_forward<float>(spec, params, tensor_from_image(frame), false, nullptr);
  if (logits.channels != 1) throw InvalidInputError("segment: net must emit one logit channel");
  return image_from_tensor(soft_sigmoid<float>(logits, alpha));
}

}  // namespace gestboot
