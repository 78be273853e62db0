#include <cmath>
#include <vector>

#include "doctest.h"
#include "gestboot/error.hpp"
#include "gestboot/rng.hpp"
#include "gestboot/synth.hpp"

using namespace gestboot;

namespace {

SynthCfg small_cfg() {
  SynthCfg cfg;
  cfg.height = 64;
  cfg.width = 88;
  cfg.frames_per_phase = 15;
  cfg.test_frames = 24;
  cfg.appearance_seed = 5;
  cfg.jitter_px = 0.0f;
  cfg.sensor_noise = 0.0f;
  return cfg;
}

int mask_area(const ImageBuffer& mask) {
  int area = 0;
  for (float v : mask.data) {
    if (v > 0.5f) ++area;
  }
  return area;
}

// Resample a series to n points by linear interpolation, then Pearson r.
std::vector<double> resample(const std::vector<double>& s, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    const double pos = static_cast<double>(i) * (s.size() - 1) / (n - 1);
    const int lo = static_cast<int>(pos);
    const int hi = std::min<int>(lo + 1, static_cast<int>(s.size()) - 1);
    const double w = pos - lo;
    out[i] = s[lo] * (1.0 - w) + s[hi] * w;
  }
  return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const int n = static_cast<int>(a.size());
  double ma = 0, mb = 0;
  for (int i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (int i = 0; i < n; ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  const double denom = std::sqrt(va * vb);
  return denom > 1e-12 ? cov / denom : 0.0;
}

}  // namespace

TEST_CASE("synth: sequences are bitwise deterministic in cfg and seed") {
  SynthCfg cfg = small_cfg();
  cfg.jitter_px = 1.0f;
  cfg.sensor_noise = 0.008f;
  RngStream r1(77), r2(77);
  const SynthSequence a = synth_gesture_sequence(cfg, r1);
  const SynthSequence b = synth_gesture_sequence(cfg, r2);
  REQUIRE(a.frames.size() == b.frames.size());
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    CHECK(a.frames[i].data == b.frames[i].data);
    CHECK(a.masks[i].data == b.masks[i].data);
  }
  CHECK(a.hand_centers == b.hand_centers);
}

TEST_CASE("synth: gesture sequence has expected shape and binary masks") {
  const SynthCfg cfg = small_cfg();
  RngStream rng(1);
  const SynthSequence seq = synth_gesture_sequence(cfg, rng);
  REQUIRE(seq.frames.size() == static_cast<std::size_t>(2 * cfg.frames_per_phase));
  REQUIRE(seq.masks.size() == seq.frames.size());
  REQUIRE(seq.hand_centers.size() == seq.frames.size());
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    CHECK(seq.frames[i].channels == 3);
    CHECK(seq.frames[i].height == cfg.height);
    CHECK(seq.frames[i].width == cfg.width);
    CHECK(seq.masks[i].channels == 1);
    for (float v : seq.masks[i].data) CHECK((v == 0.0f || v == 1.0f));
    for (float v : seq.frames[i].data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("synth: mask area grows monotonically as the hands enter") {
  const SynthCfg cfg = small_cfg();
  RngStream rng(2);
  const SynthSequence seq = synth_gesture_sequence(cfg, rng);
  std::vector<int> areas;
  for (int t = 0; t < 10; ++t) areas.push_back(mask_area(seq.masks[t]));
  for (int t = 0; t + 1 < 10; ++t) CHECK(areas[t + 1] >= areas[t]);
  CHECK(areas[9] > areas[0]);
  // By mid-phase the hands are clearly visible.
  CHECK(mask_area(seq.masks[cfg.frames_per_phase - 1]) > 100);
}

TEST_CASE("synth: test motion decorrelates from the gesture trajectory") {
  const SynthCfg cfg = small_cfg();
  RngStream r1(3), r2(4);
  const SynthSequence ges = synth_gesture_sequence(cfg, r1);
  const SynthSequence tst = synth_test_sequence(cfg, r2);
  for (int coord = 0; coord < 4; ++coord) {
    std::vector<double> g, t;
    for (const auto& c : ges.hand_centers) g.push_back(c[coord]);
    for (const auto& c : tst.hand_centers) t.push_back(c[coord]);
    const double r = pearson(resample(g, 64), resample(t, 64));
    INFO("coordinate ", coord, " correlation ", r);
    CHECK(std::abs(r) < 0.5);
  }
  // Hands remain visible in every test frame.
  for (const auto& m : tst.masks) CHECK(mask_area(m) > 50);
}

TEST_CASE("synth: appearance is a pure function of appearance_seed") {
  // With jitter and sensor noise disabled, two different driver streams must
  // produce identical pixels because all appearance randomness hangs off
  // appearance_seed.
  const SynthCfg cfg = small_cfg();
  RngStream r1(100), r2(9999);
  const SynthSequence a = synth_gesture_sequence(cfg, r1);
  const SynthSequence b = synth_gesture_sequence(cfg, r2);
  for (std::size_t i = 0; i < a.frames.size(); ++i) CHECK(a.frames[i].data == b.frames[i].data);

  SynthCfg other = cfg;
  other.appearance_seed = 6;
  RngStream r3(100);
  const SynthSequence c = synth_gesture_sequence(other, r3);
  CHECK(c.frames[5].data != a.frames[5].data);
}

TEST_CASE("synth: first gesture frame matches the empty background scene") {
  // Hands start off-screen, so frame 0 must equal a pure background render.
  const SynthCfg cfg = small_cfg();
  RngStream r1(10), r2(20);
  const SynthSequence seq = synth_gesture_sequence(cfg, r1);
  const std::vector<ImageBuffer> bg = synth_background_frames(cfg, r2, 1);
  REQUIRE(bg.size() == 1);
  CHECK(mask_area(seq.masks[0]) == 0);
  CHECK(seq.frames[0].data == bg[0].data);
}

TEST_CASE("synth: glove flag changes only hand pixels") {
  SynthCfg cfg = small_cfg();
  RngStream r1(10), r2(10);
  const SynthSequence plain = synth_gesture_sequence(cfg, r1);
  cfg.glove = true;
  const SynthSequence gloved = synth_gesture_sequence(cfg, r2);
  const int t = cfg.frames_per_phase - 1;
  REQUIRE(plain.masks[t].data == gloved.masks[t].data);
  bool hand_differs = false;
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      const bool inside = plain.masks[t].at(0, y, x) > 0.5f;
      for (int c = 0; c < 3; ++c) {
        const float pv = plain.frames[t].at(c, y, x);
        const float gv = gloved.frames[t].at(c, y, x);
        if (inside) {
          if (pv != gv) hand_differs = true;
        } else {
          CHECK(pv == gv);
        }
      }
    }
  }
  CHECK(hand_differs);
}

TEST_CASE("synth: hand_matches_background keeps geometry but camouflages") {
  SynthCfg cfg = small_cfg();
  RngStream r1(11), r2(11);
  const SynthSequence plain = synth_gesture_sequence(cfg, r1);
  cfg.hand_matches_background = true;
  const SynthSequence camo = synth_gesture_sequence(cfg, r2);
  const int t = cfg.frames_per_phase - 1;
  CHECK(plain.masks[t].data == camo.masks[t].data);
  CHECK(plain.frames[t].data != camo.frames[t].data);
}

TEST_CASE("synth: brightness scales the noise-free render multiplicatively") {
  SynthCfg cfg = small_cfg();
  RngStream r1(12), r2(12);
  const SynthSequence full = synth_gesture_sequence(cfg, r1);
  cfg.brightness = 0.5f;
  const SynthSequence dim = synth_gesture_sequence(cfg, r2);
  const int t = cfg.frames_per_phase;
  for (std::size_t i = 0; i < full.frames[t].data.size(); ++i) {
    CHECK(dim.frames[t].data[i] ==
          doctest::Approx(0.5f * full.frames[t].data[i]).epsilon(1e-6));
  }
}

TEST_CASE("synth: config validation rejects out-of-range values") {
  SynthCfg cfg = small_cfg();
  cfg.height = 16;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_cfg();
  cfg.frames_per_phase = 2;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_cfg();
  cfg.brightness = 0.0f;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_cfg();
  cfg.sensor_noise = 0.5f;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_cfg();
  cfg.jitter_px = -1.0f;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
