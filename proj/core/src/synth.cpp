#include "gestboot/synth.hpp"

#include <algorithm>
#include <cmath>

#include "gestboot/error.hpp"

namespace gestboot {
namespace {

constexpr float kPi = 3.14159265358979323846f;

// Sum-of-sinusoids value noise in [-1, 1]; cheap, smooth, and seed-stable.
struct NoiseField {
  std::array<float, 4> fx{}, fy{}, phase{}, amp{};

  static NoiseField draw(RngStream& rng, float freq_lo, float freq_hi) {
    NoiseField n;
    float total = 0.0f;
    for (int k = 0; k < 4; ++k) {
      const float f = rng.uniform(freq_lo, freq_hi);
      const float ang = rng.uniform(0.0f, 2.0f * kPi);
      n.fx[k] = f * std::cos(ang);
      n.fy[k] = f * std::sin(ang);
      n.phase[k] = rng.uniform(0.0f, 2.0f * kPi);
      n.amp[k] = rng.uniform(0.5f, 1.0f);
      total += n.amp[k];
    }
    for (int k = 0; k < 4; ++k) n.amp[k] /= total;
    return n;
  }

  float at(float x, float y) const {
    float v = 0.0f;
    for (int k = 0; k < 4; ++k) v += amp[k] * std::sin(fx[k] * x + fy[k] * y + phase[k]);
    return v;
  }
};

struct Rgb {
  float r, g, b;
};

// All appearance state is derived from appearance_seed alone.
struct Appearance {
  Rgb bg, hand, arm;
  NoiseField bg_noise, hand_noise, arm_noise;
  float bg_amp, hand_amp, arm_amp;
};

Rgb jitter_color(Rgb c, RngStream& rng, float amount) {
  c.r += rng.uniform(-amount, amount);
  c.g += rng.uniform(-amount, amount);
  c.b += rng.uniform(-amount, amount);
  return c;
}

Appearance make_appearance(const SynthCfg& cfg) {
  RngStream rng(cfg.appearance_seed);
  RngStream person = rng.split(1);
  Appearance app;
  app.bg = jitter_color({0.47f, 0.52f, 0.58f}, person, 0.05f);
  app.hand = cfg.glove ? jitter_color({0.24f, 0.62f, 0.57f}, person, 0.04f)
                       : jitter_color({0.82f, 0.60f, 0.48f}, person, 0.05f);
  app.arm = jitter_color({0.36f, 0.32f, 0.48f}, person, 0.05f);
  RngStream tex = rng.split(2);
  app.bg_noise = NoiseField::draw(tex, 0.05f, 0.30f);
  app.hand_noise = NoiseField::draw(tex, 0.30f, 0.90f);
  app.arm_noise = NoiseField::draw(tex, 0.20f, 0.60f);
  app.bg_amp = 0.10f;
  app.hand_amp = 0.07f;
  app.arm_amp = 0.08f;
  if (cfg.hand_matches_background) {
    app.hand = app.bg;
    app.arm = app.bg;
    app.hand_noise = app.bg_noise;
    app.arm_noise = app.bg_noise;
    app.hand_amp = app.bg_amp;
    app.arm_amp = app.bg_amp;
  }
  return app;
}

enum class HandShape { kNone, kOpenPalm, kFist };

// side: -1 for the left hand (arm trails to x=0), +1 for the right hand.
struct HandState {
  HandShape shape = HandShape::kNone;
  float cx = 0.0f, cy = 0.0f;
  float scale = 1.0f;
  int side = -1;
};

struct SceneScale {
  float m;  // min(height, width), the unit for all shape radii
  float palm_rx, palm_ry, fist_rx, fist_ry, finger_rx, finger_ry, arm_hw;
};

SceneScale scene_scale(const SynthCfg& cfg) {
  // Sized so hands plus arms average roughly a fifth of the frame over a
  // gesture video, matching the background prior of 0.8 the foreground
  // model assumes for such footage.
  SceneScale s;
  s.m = static_cast<float>(std::min(cfg.height, cfg.width));
  s.palm_rx = 0.210f * s.m;
  s.palm_ry = 0.260f * s.m;
  s.fist_rx = 0.240f * s.m;
  s.fist_ry = 0.200f * s.m;
  s.finger_rx = 0.050f * s.m;
  s.finger_ry = 0.124f * s.m;
  s.arm_hw = 0.140f * s.m;
  return s;
}

bool inside_ellipse(float x, float y, float cx, float cy, float rx, float ry) {
  const float dx = (x - cx) / rx;
  const float dy = (y - cy) / ry;
  return dx * dx + dy * dy <= 1.0f;
}

// Pixel membership test in scene coordinates. Classifies hand vs arm so the
// two can carry different textures; both count as foreground in the mask.
bool hand_hit(const HandState& h, const SceneScale& g, float x, float y, bool* is_arm) {
  *is_arm = false;
  if (h.shape == HandShape::kNone) return false;
  const float s = h.scale;
  if (h.shape == HandShape::kFist) {
    if (inside_ellipse(x, y, h.cx, h.cy, s * g.fist_rx, s * g.fist_ry)) return true;
  } else {
    if (inside_ellipse(x, y, h.cx, h.cy, s * g.palm_rx, s * g.palm_ry)) return true;
    const float base_y = h.cy - s * (g.palm_ry + 0.65f * g.finger_ry);
    for (int k = 0; k < 4; ++k) {
      const float fx = h.cx + (2.0f * static_cast<float>(k) - 3.0f) / 3.0f * 0.80f * s * g.palm_rx;
      if (inside_ellipse(x, y, fx, base_y, s * g.finger_rx, s * g.finger_ry)) return true;
    }
  }
  // Arm: horizontal strip from the palm center to the hand's side of the frame.
  const bool toward_side = (h.side < 0) ? (x <= h.cx) : (x >= h.cx);
  if (toward_side && std::abs(y - h.cy) <= h.scale * g.arm_hw) {
    *is_arm = true;
    return true;
  }
  return false;
}

float clamp01(float v) { return std::min(1.0f, std::max(0.0f, v)); }

// Renders one frame plus its exact mask. Jitter shifts the whole scene;
// sensor noise perturbs colors only, never the mask.
void render_frame(const SynthCfg& cfg, const Appearance& app, const HandState& left,
                  const HandState& right, float dx, float dy, RngStream& rng,
                  ImageBuffer* frame, ImageBuffer* mask) {
  const SceneScale g = scene_scale(cfg);
  *frame = ImageBuffer(cfg.height, cfg.width, 3);
  *mask = ImageBuffer(cfg.height, cfg.width, 1);
  std::vector<float> noise(frame->size());
  for (std::size_t i = 0; i < noise.size(); ++i)
    noise[i] = rng.uniform(-cfg.sensor_noise, cfg.sensor_noise);
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      const float sx = static_cast<float>(x) - dx;
      const float sy = static_cast<float>(y) - dy;
      bool arm_l = false, arm_r = false;
      const bool in_l = hand_hit(left, g, sx, sy, &arm_l);
      const bool in_r = in_l ? false : hand_hit(right, g, sx, sy, &arm_r);
      Rgb c;
      if (in_l || in_r) {
        const HandState& h = in_l ? left : right;
        const bool arm = in_l ? arm_l : arm_r;
        // Texture in hand-local coordinates: appearance translates with the hand.
        const float lx = sx - h.cx;
        const float ly = sy - h.cy;
        const Rgb base = arm ? app.arm : app.hand;
        const float amp = arm ? app.arm_amp : app.hand_amp;
        const float n = (arm ? app.arm_noise : app.hand_noise).at(lx, ly);
        c = {base.r * (1.0f + amp * n), base.g * (1.0f + amp * n), base.b * (1.0f + amp * n)};
        mask->at(0, y, x) = 1.0f;
      } else {
        const float n = app.bg_noise.at(sx, sy);
        c = {app.bg.r * (1.0f + app.bg_amp * n), app.bg.g * (1.0f + app.bg_amp * n),
             app.bg.b * (1.0f + app.bg_amp * n)};
      }
      const std::size_t p = static_cast<std::size_t>(y) * cfg.width + x;
      frame->at(0, y, x) = clamp01(c.r * cfg.brightness + noise[p]);
      frame->at(1, y, x) = clamp01(c.g * cfg.brightness + noise[p + frame->plane_size()]);
      frame->at(2, y, x) = clamp01(c.b * cfg.brightness + noise[p + 2 * frame->plane_size()]);
    }
  }
}

void push_frame(const SynthCfg& cfg, const Appearance& app, const HandState& left,
                const HandState& right, RngStream& rng, SynthSequence* seq) {
  float dx = 0.0f, dy = 0.0f;
  if (cfg.jitter_px > 0.0f) {
    dx = rng.uniform(-cfg.jitter_px, cfg.jitter_px);
    dy = rng.uniform(-cfg.jitter_px, cfg.jitter_px);
  }
  ImageBuffer frame, mask;
  render_frame(cfg, app, left, right, dx, dy, rng, &frame, &mask);
  seq->frames.push_back(std::move(frame));
  seq->masks.push_back(std::move(mask));
  seq->hand_centers.push_back({left.cx + dx, left.cy + dy, right.cx + dx, right.cy + dy});
}

}  // namespace

void SynthCfg::validate() const {
  if (height < 32 || width < 32) throw ConfigError("synth: dims must be at least 32x32");
  if (frames_per_phase < 5) throw ConfigError("synth: frames_per_phase must be >= 5");
  if (test_frames < 5) throw ConfigError("synth: test_frames must be >= 5");
  if (brightness <= 0.0f || brightness > 1.0f) throw ConfigError("synth: brightness must be in (0,1]");
  if (jitter_px < 0.0f) throw ConfigError("synth: jitter_px must be >= 0");
  if (sensor_noise < 0.0f || sensor_noise > 0.1f)
    throw ConfigError("synth: sensor_noise must be in [0,0.1]");
}

SynthSequence synth_gesture_sequence(const SynthCfg& cfg, RngStream& rng) {
  cfg.validate();
  const Appearance app = make_appearance(cfg);
  const SceneScale g = scene_scale(cfg);
  const float w = static_cast<float>(cfg.width);
  const float cy = 0.58f * static_cast<float>(cfg.height);
  // Start far enough out that shape + arm are fully off-frame even under jitter.
  const float off = g.palm_rx * 1.3f + cfg.jitter_px + 2.0f;
  const float mid_l = 0.33f * w;
  const float mid_r = 0.67f * w;
  const int f = cfg.frames_per_phase;
  SynthSequence seq;
  for (int t = 0; t < f; ++t) {
    const float u = static_cast<float>(t) / static_cast<float>(f - 1);
    HandState left{HandShape::kOpenPalm, -off + (mid_l + off) * u, cy, 1.0f, -1};
    HandState right{HandShape::kOpenPalm, (w - 1.0f + off) + (mid_r - (w - 1.0f + off)) * u, cy, 1.0f, +1};
    push_frame(cfg, app, left, right, rng, &seq);
  }
  for (int t = 0; t < f; ++t) {
    const float u = static_cast<float>(t) / static_cast<float>(f - 1);
    HandState left{HandShape::kFist, mid_l + (-off - mid_l) * u, cy, 1.0f, -1};
    HandState right{HandShape::kFist, mid_r + ((w - 1.0f + off) - mid_r) * u, cy, 1.0f, +1};
    push_frame(cfg, app, left, right, rng, &seq);
  }
  return seq;
}

SynthSequence synth_test_sequence(const SynthCfg& cfg, RngStream& rng) {
  cfg.validate();
  const Appearance app = make_appearance(cfg);
  const float w = static_cast<float>(cfg.width);
  const float h = static_cast<float>(cfg.height);
  const float m = std::min(h, w);
  const int f = cfg.test_frames;
  SynthSequence seq;
  for (int t = 0; t < f; ++t) {
    const float u = static_cast<float>(t) / static_cast<float>(f);
    // Right hand: open palm on a circular path with breathing scale. The
    // phase offset keeps its x-trace orthogonal to the gesture's in-and-out
    // sweep (trajectory-correlation contract with synth_gesture_sequence).
    const float theta = 2.0f * kPi * u + 0.5f * kPi;
    HandState right{HandShape::kOpenPalm, 0.62f * w + 0.20f * m * std::cos(theta),
                    0.50f * h + 0.20f * m * std::sin(theta),
                    1.0f + 0.25f * std::sin(2.0f * theta), +1};
    // Left hand: fist shuttling twice along a diagonal (frequency mismatch
    // with the single-sweep gesture phases, same contract).
    const float u2 = 2.0f * u - std::floor(2.0f * u);
    const float tri = (u2 < 0.5f) ? 2.0f * u2 : 2.0f - 2.0f * u2;
    HandState left{HandShape::kFist, 0.14f * w + (0.46f - 0.14f) * w * tri,
                   0.20f * h + (0.82f - 0.20f) * h * tri,
                   1.0f - 0.2f * std::sin(theta), -1};
    push_frame(cfg, app, left, right, rng, &seq);
  }
  return seq;
}

std::vector<ImageBuffer> synth_background_frames(const SynthCfg& cfg, RngStream& rng, int count) {
  cfg.validate();
  if (count < 0) throw InvalidInputError("synth: background count must be >= 0");
  const Appearance app = make_appearance(cfg);
  std::vector<ImageBuffer> out;
  out.reserve(static_cast<std::size_t>(count));
  HandState none_l, none_r;
  none_r.side = +1;
  for (int i = 0; i < count; ++i) {
    float dx = 0.0f, dy = 0.0f;
    if (cfg.jitter_px > 0.0f) {
      dx = rng.uniform(-cfg.jitter_px, cfg.jitter_px);
      dy = rng.uniform(-cfg.jitter_px, cfg.jitter_px);
    }
    ImageBuffer frame, mask;
    render_frame(cfg, app, none_l, none_r, dx, dy, rng, &frame, &mask);
    out.push_back(std::move(frame));
  }
  return out;
}

}  // namespace gestboot
