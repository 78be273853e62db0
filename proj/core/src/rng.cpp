#include "gestboot/rng.hpp"

namespace gestboot {

namespace {

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t RngStream::next_u64() {
  state_ += 0x9e3779b97f4a7c15ULL;
  return mix(state_);
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

float RngStream::next_float() {
  return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

std::uint32_t RngStream::next_below(std::uint32_t n) {
  if (n == 0) return 0;
  // Modulo bias is below 2^-32 for the n used here (shuffles, small sets).
  return static_cast<std::uint32_t>(next_u64() % n);
}

bool RngStream::bernoulli(double p) {
  return next_double() < p;
}

RngStream RngStream::split(std::uint64_t tag) const {
  return RngStream(mix(state_ ^ mix(tag + 0x632be59bd9b4e019ULL)));
}

}  // namespace gestboot
