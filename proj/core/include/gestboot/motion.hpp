#pragma once

#include <vector>

#include "gestboot/image.hpp"

namespace gestboot {

// Dense displacement field in pixels per frame. u is the x-displacement,
// v the y-displacement, both row-major at frame resolution.
struct FlowField {
  int height = 0;
  int width = 0;
  std::vector<float> u;
  std::vector<float> v;

  FlowField() = default;
  FlowField(int h, int w)
      : height(h), width(w), u(static_cast<std::size_t>(h) * w, 0.0f),
        v(static_cast<std::size_t>(h) * w, 0.0f) {}
  std::size_t size() const { return u.size(); }
};

struct TvL1Params {
  float lambda = 0.15f;   // data-term weight
  float epsilon = 0.01f;  // stop when the mean absolute flow update drops below this
  int max_iters = 300;    // per-warp cap on primal-dual iterations
  int pyramid_levels = 4;
  float pyramid_scale = 0.5f;
  int warps_per_level = 3;
  float tau = 0.125f;     // primal-dual time step
  float theta = 0.3f;     // coupling between the data and TV subproblems

  void validate() const;  // throws InvalidInputError
};

// Optional instrumentation: TV-L1 energy of the full (non-linearized)
// objective at the finest level, once before the first warp and once after
// each warp.
struct TvL1Diag {
  std::vector<double> energy_per_warp;
};

// Coarse-to-fine dual TV-L1 flow with per-level warping. Inputs must be
// single-channel and the same size. Deterministic, single-threaded.
FlowField tvl1_flow(const ImageBuffer& prev, const ImageBuffer& next, const TvL1Params& params,
                    TvL1Diag* diag = nullptr);

struct ForegroundConfig {
  float prior_background = 0.8f;  // prior probability that a pixel shows background
  float learning_rate = 0.6f;     // exponential forgetting for histogram updates
  float smoothing = 0.0f;         // blend toward a 3x3 box filter of the posterior
  int num_bins = 16;              // quantized color bins per channel
  int init_frames = 1;

  void validate() const;
};

// Per-pixel quantized-color histogram background model. Histogram weights are
// kept normalized (each channel sums to 1), so counts never go negative and
// exponential forgetting preserves total mass. Single writer per video.
struct ForegroundModel {
  int height = 0;
  int width = 0;
  int channels = 0;
  ForegroundConfig cfg;
  // Layout: [pixel][channel][bin].
  std::vector<float> hist;

  std::size_t bins_per_pixel() const {
    return static_cast<std::size_t>(channels) * cfg.num_bins;
  }
};

ForegroundModel fg_init(const ImageBuffer& frame, const ForegroundConfig& cfg);

// Returns the posterior foreground-probability map computed with the model as
// it stands, then updates the histograms from pixels classified background
// (posterior < 0.5).
ImageBuffer fg_update(ForegroundModel& model, const ImageBuffer& frame);

/// 3-channel gesture-network input: (foreground probability, normalized
// flow-x, normalized flow-y). Flow components map through
// clamp(c / flow_norm_max, -1, 1) * 0.5 + 0.5 so all channels live in [0, 1].
struct MotionStack {
  ImageBuffer channels;
};

MotionStack build_motion_stack(const ImageBuffer& fg_prob, const FlowField& flow,
                               float flow_norm_max = 8.0f);

}  // namespace gestboot
