#pragma once

#include <cstdint>
#include <cstddef>

namespace gestboot {

// Deterministic splittable random stream (splitmix64 core). The same seed
// yields the same draw sequence on every platform, which the reproducibility
// contract of dropout, augmentation and the synthetic generators relies on.
// std::uniform_real_distribution is not byte-portable, so draws are derived
// from raw 64-bit outputs directly.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double next_double();

  // Uniform in [0, 1), 24-bit resolution.
  float next_float();

  double uniform(double lo, double hi);

  // Uniform integer in [0, n). n = 0 returns 0.
  std::uint32_t next_below(std::uint32_t n);

  bool bernoulli(double p);

  // Child stream decorrelated from this one. Does not advance this stream,
  // so split(tag) is stable no matter how many draws happen in between.
  RngStream split(std::uint64_t tag) const;

 private:
  std::uint64_t state_;
};

}  // namespace gestboot
