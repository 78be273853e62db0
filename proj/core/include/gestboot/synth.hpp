#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gestboot/image.hpp"
#include "gestboot/rng.hpp"

namespace gestboot {

// Synthetic desk-scale calibration scenes: a static textured background and
// two textured hands with arms trailing to the frame sides. Appearance
// (colors, texture fields) is a pure function of appearance_seed, so gesture
// and test sequences of the same "user" look alike while the passed RNG
// drives only per-frame camera jitter and sensor noise.
struct SynthCfg {
  int height = 96;
  int width = 128;
  int frames_per_phase = 30;  // gesture video = two phases
  int test_frames = 60;
  uint64_t appearance_seed = 1;
  float jitter_px = 0.0f;     // camera shake amplitude
  float brightness = 1.0f;    // global illumination scale; ~0.35 for dim scenes
  bool glove = false;         // non-skin hand texture
  bool hand_matches_background = false;  // degenerate: hands share the bg texture
  float sensor_noise = 0.008f;

  void validate() const;
};

struct SynthSequence {
  std::vector<ImageBuffer> frames;  // RGB in [0,1]
  std::vector<ImageBuffer> masks;   // 1ch binary, hand+arm pixels exactly
  // Per frame: left-hand center x, y then right-hand center x, y (scene px).
  std::vector<std::array<float, 4>> hand_centers;
};

// Calibration gesture: phase 1 open palms translate from the frame sides to
// the middle, phase 2 closed fists translate back out. Hands start fully
// off-frame, so the first frames are hand-free and the mask area grows
// monotonically while the hands enter.
SynthSequence synth_gesture_sequence(const SynthCfg& cfg, RngStream& rng);

// Held-out evaluation video with the same appearance: open palm on a circular
// path with scale oscillation plus a fist on a diagonal shuttle.
SynthSequence synth_test_sequence(const SynthCfg& cfg, RngStream& rng);

// Hand-free renders of the same scene (background augmentation source).
std::vector<ImageBuffer> synth_background_frames(const SynthCfg& cfg, RngStream& rng, int count);

}  // namespace gestboot
