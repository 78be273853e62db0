#include <algorithm>
#include <cmath>
#include <vector>

#include "gestboot/error.hpp"
#include "gestboot/motion.hpp"

// Bayesian background subtraction over quantized per-channel color
// histograms. Each pixel keeps one normalized histogram per channel; the
// background likelihood of an observation is the product of its per-channel
// bin weights, the foreground likelihood is uniform over the quantized color
// space. Histograms adapt by exponential forgetting, but only at pixels the
// current frame classifies as background, so a hand held in place is not
// absorbed into the model at the adaptation rate.

namespace gestboot {

void ForegroundConfig::validate() const {
  if (prior_background <= 0.0f || prior_background >= 1.0f) {
    throw InvalidInputError("bgsub: prior_background must be in (0,1)");
  }
  if (learning_rate < 0.0f || learning_rate > 1.0f) {
    throw InvalidInputError("bgsub: learning_rate must be in [0,1]");
  }
  if (smoothing < 0.0f || smoothing > 1.0f) {
    throw InvalidInputError("bgsub: smoothing must be in [0,1]");
  }
  if (num_bins < 2 || num_bins > 256) {
    throw InvalidInputError("bgsub: num_bins must be in [2,256]");
  }
  if (init_frames < 1) throw InvalidInputError("bgsub: init_frames must be >= 1");
}

namespace {

inline int quantize(float value, int num_bins) {
  const int bin = static_cast<int>(value * num_bins);
  return std::clamp(bin, 0, num_bins - 1);
}

}  // namespace

ForegroundModel fg_init(const ImageBuffer& frame, const ForegroundConfig& cfg) {
  cfg.validate();
  frame.validate();
  ForegroundModel model;
  model.height = frame.height;
  model.width = frame.width;
  model.channels = frame.channels;
  model.cfg = cfg;
  model.hist.assign(static_cast<std::size_t>(frame.height) * frame.width *
                        model.bins_per_pixel(),
                    0.0f);

  // Seed every per-channel histogram with unit mass on the observed bin.
  const std::size_t plane = static_cast<std::size_t>(frame.height) * frame.width;
  for (std::size_t pix = 0; pix < plane; ++pix) {
    float* h = model.hist.data() + pix * model.bins_per_pixel();
    for (int c = 0; c < frame.channels; ++c) {
      float* hc = h + static_cast<std::size_t>(c) * cfg.num_bins;
      hc[quantize(frame.data[static_cast<std::size_t>(c) * plane + pix], cfg.num_bins)] = 1.0f;
    }
  }
  return model;
}

ImageBuffer fg_update(ForegroundModel& model, const ImageBuffer& frame) {
  frame.validate();
  if (frame.height != model.height || frame.width != model.width ||
      frame.channels != model.channels) {
    throw InvalidInputError("bgsub: frame dims do not match model");
  }
  const ForegroundConfig& cfg = model.cfg;
  const std::size_t plane = static_cast<std::size_t>(model.height) * model.width;
  const float p_bg = cfg.prior_background;
  const float p_fg = 1.0f - p_bg;
  // Uniform foreground likelihood over the quantized color cube.
  float lik_fg = 1.0f;
  for (int c = 0; c < model.channels; ++c) lik_fg /= static_cast<float>(cfg.num_bins);

  ImageBuffer posterior(model.height, model.width, 1);
  for (std::size_t pix = 0; pix < plane; ++pix) {
    float* h = model.hist.data() + pix * model.bins_per_pixel();

    float lik_bg = 1.0f;
    for (int c = 0; c < model.channels; ++c) {
      const int bin =
          quantize(frame.data[static_cast<std::size_t>(c) * plane + pix], cfg.num_bins);
      lik_bg *= h[static_cast<std::size_t>(c) * cfg.num_bins + bin];
    }

    const float evidence = lik_fg * p_fg + lik_bg * p_bg;
    const float post = evidence > 0.0f ? lik_fg * p_fg / evidence : 1.0f;
    posterior.data[pix] = post;

    if (post < 0.5f) {
      // Exponential forgetting toward a one-hot histogram of the new
      // observation; per-channel weights keep summing to one.
      const float lr = cfg.learning_rate;
      for (int c = 0; c < model.channels; ++c) {
        float* hc = h + static_cast<std::size_t>(c) * cfg.num_bins;
        const int bin =
            quantize(frame.data[static_cast<std::size_t>(c) * plane + pix], cfg.num_bins);
        for (int b = 0; b < cfg.num_bins; ++b) hc[b] *= (1.0f - lr);
        hc[bin] += lr;
      }
    }
  }

  // Optional spatial regularization of the returned map; the model update
  // above always uses the raw per-pixel posterior.
  if (cfg.smoothing > 0.0f) {
    ImageBuffer smoothed(model.height, model.width, 1);
    for (int y = 0; y < model.height; ++y) {
      for (int x = 0; x < model.width; ++x) {
        float acc = 0.0f;
        int cnt = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= model.height || xx < 0 || xx >= model.width) continue;
            acc += posterior.at(0, yy, xx);
            ++cnt;
          }
        }
        smoothed.at(0, y, x) =
            (1.0f - cfg.smoothing) * posterior.at(0, y, x) + cfg.smoothing * acc / cnt;
      }
    }
    return smoothed;
  }
  return posterior;
}

}  // namespace gestboot
