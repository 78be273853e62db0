// Microbenchmarks for the hot paths: TV-L1 optical flow, the foreground
// posterior update, and gesture-net forward/backward passes.
#include <benchmark/benchmark.h>

#include <vector>

#include "gestboot/gesture.hpp"
#include "gestboot/image.hpp"
#include "gestboot/motion.hpp"
#include "gestboot/net.hpp"
#include "gestboot/rng.hpp"

namespace {

using namespace gestboot;

// Smoothly textured grayscale image so the flow solver has gradients to work
// with; plain white noise would make TV-L1 spend all iterations on noise.
ImageBuffer textured(int h, int w, std::uint64_t seed) {
  RngStream rng(seed);
  ImageBuffer img(h + 2, w + 2, 1);
  for (float& v : img.data) v = rng.next_float();
  ImageBuffer out(h, w, 1);
  for (int pass = 0; pass < 3; ++pass) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        float acc = 0.0f;
        for (int dy = 0; dy <= 2; ++dy)
          for (int dx = 0; dx <= 2; ++dx) acc += img.at(0, y + dy, x + dx);
        out.at(0, y, x) = acc / 9.0f;
      }
    }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img.at(0, y + 1, x + 1) = out.at(0, y, x);
  }
  return out;
}

ImageBuffer shifted_right(const ImageBuffer& src) {
  ImageBuffer out(src.height, src.width, 1);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      out.at(0, y, x) = src.at(0, y, x > 0 ? x - 1 : 0);
  return out;
}

void bm_tvl1_flow(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const ImageBuffer a = textured(side, side, 7);
  const ImageBuffer b = shifted_right(a);
  TvL1Params params;
  for (auto _ : state) {
    FlowField f = tvl1_flow(a, b, params);
    benchmark::DoNotOptimize(f.u.data());
  }
  state.SetItemsProcessed(state.iterations() * side * side);
}

void bm_fg_update(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  RngStream rng(11);
  ImageBuffer bg(side, side, 3);
  for (float& v : bg.data) v = rng.next_float();
  ForegroundConfig cfg;
  ForegroundModel model = fg_init(bg, cfg);
  ImageBuffer frame = bg;
  for (int i = 0; i < static_cast<int>(frame.data.size()) / 7; ++i)
    frame.data[rng.next_below(static_cast<std::uint32_t>(frame.data.size()))] =
        rng.next_float();
  for (auto _ : state) {
    ImageBuffer post = fg_update(model, frame);
    benchmark::DoNotOptimize(post.data.data());
  }
  state.SetItemsProcessed(state.iterations() * side * side);
}

void bm_net_forward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  GestureTrainCfg cfg;
  const NetSpec spec = gesture_net_spec(cfg);
  RngStream rng(3);
  const NetParams params = init_params<float>(spec, rng);
  TensorF input(3, side, side);
  for (float& v : input.data) v = rng.next_float();
  for (auto _ : state) {
    TensorF out = net_forward(spec, params, input, false, nullptr);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * side * side);
}

void bm_net_backward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  GestureTrainCfg cfg;
  const NetSpec spec = gesture_net_spec(cfg);
  RngStream rng(3);
  const NetParams params = init_params<float>(spec, rng);
  TensorF input(3, side, side);
  for (float& v : input.data) v = rng.next_float();
  ForwardCache<float> cache;
  TensorF out = net_forward(spec, params, input, false, nullptr, &cache);
  TensorF grad_out(out.channels, out.height, out.width);
  for (float& v : grad_out.data) v = rng.next_float() - 0.5f;
  for (auto _ : state) {
    Gradients grads = net_backward(spec, params, cache, grad_out);
    benchmark::DoNotOptimize(grads.input.data.data());
  }
  state.SetItemsProcessed(state.iterations() * side * side);
}

BENCHMARK(bm_tvl1_flow)->Arg(48)->Arg(96)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_fg_update)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_net_forward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_net_backward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
