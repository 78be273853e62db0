// gestboot command-line front end. Exit codes: 0 success, 1 usage/config
// error, 2 data error, 3 failed `eval --assert` check.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gestboot/ablation.hpp"
#include "gestboot/appearance.hpp"
#include "gestboot/blob.hpp"
#include "gestboot/config.hpp"
#include "gestboot/error.hpp"
#include "gestboot/gesture.hpp"
#include "gestboot/image.hpp"
#include "gestboot/metrics.hpp"
#include "gestboot/motion.hpp"
#include "gestboot/net.hpp"
#include "gestboot/pipeline.hpp"
#include "gestboot/rng.hpp"
#include "gestboot/synth.hpp"

namespace {

using namespace gestboot;
namespace fs = std::filesystem;

struct AssertFailure {};

std::uint64_t effective_seed(std::uint64_t flag_seed) {
  const char* env = std::getenv("GESTBOOT_SEED");
  if (env == nullptr || *env == '\0') return flag_seed;
  const std::string v(env);
  try {
    std::size_t pos = 0;
    const std::uint64_t s = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return s;
  } catch (const std::exception&) {
    throw ConfigError("GESTBOOT_SEED is not a non-negative integer: `" + v + "`");
  }
}

std::string pad4(int n) {
  char b[16];
  std::snprintf(b, sizeof(b), "%04d", n);
  return b;
}

void write_sequence(const SynthSequence& seq, const std::string& dir) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const std::string idx = pad4(static_cast<int>(i));
    write_png(seq.frames[i], dir + "/frame_" + idx + ".png");
    write_png(seq.masks[i], dir + "/mask_" + idx + ".png");
  }
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream in(s);
  while (std::getline(in, tok, ',')) {
    const auto b = tok.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = tok.find_last_not_of(" \t");
    out.push_back(tok.substr(b, e - b + 1));
  }
  return out;
}

void print_f1(const char* label, const F1Report& r) {
  std::printf("%s: F1 %.4f  (precision %.4f, recall %.4f, tp %lld, fp %lld, fn %lld)\n", label,
              r.f1, r.precision, r.recall, r.true_pos, r.false_pos, r.false_neg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gestboot: gesture-bootstrapped personal hand segmentation"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "Render a synthetic gesture/test/background set");
  struct {
    std::string out, kind = "gesture";
    std::uint64_t seed = 1;
    std::uint64_t appearance_seed = 0;
    bool has_app_seed = false;
    int width = 128, height = 96, frames_per_phase = 30, test_frames = 60, count = 30;
    double jitter = 0.0, brightness = 1.0, noise = 0.008;
    bool glove = false, match_bg = false;
  } sy;
  synth->add_option("--out", sy.out, "output directory")->required();
  synth->add_option("--kind", sy.kind, "gesture | test | background")
      ->check(CLI::IsMember({"gesture", "test", "background"}));
  synth->add_option("--seed", sy.seed, "rng seed (jitter + sensor noise)");
  synth->add_option("--appearance-seed", sy.appearance_seed, "user appearance seed (default: seed)")
      ->trigger_on_parse()
      ->each([&](const std::string&) { sy.has_app_seed = true; });
  synth->add_option("--width", sy.width);
  synth->add_option("--height", sy.height);
  synth->add_option("--frames-per-phase", sy.frames_per_phase);
  synth->add_option("--test-frames", sy.test_frames);
  synth->add_option("--count", sy.count, "background frame count");
  synth->add_option("--jitter", sy.jitter, "camera jitter amplitude in px");
  synth->add_option("--brightness", sy.brightness, "illumination scale in (0,1]");
  synth->add_option("--noise", sy.noise, "sensor noise amplitude");
  synth->add_flag("--glove", sy.glove, "non-skin hand texture");
  synth->add_flag("--hand-matches-background", sy.match_bg, "degenerate camouflage scene");
  synth->callback([&] {
    SynthCfg cfg;
    cfg.width = sy.width;
    cfg.height = sy.height;
    cfg.frames_per_phase = sy.frames_per_phase;
    cfg.test_frames = sy.test_frames;
    cfg.jitter_px = static_cast<float>(sy.jitter);
    cfg.brightness = static_cast<float>(sy.brightness);
    cfg.sensor_noise = static_cast<float>(sy.noise);
    cfg.glove = sy.glove;
    cfg.hand_matches_background = sy.match_bg;
    const std::uint64_t seed = effective_seed(sy.seed);
    cfg.appearance_seed = sy.has_app_seed ? sy.appearance_seed : seed;
    RngStream rng(seed);
    if (sy.kind == "gesture") {
      write_sequence(synth_gesture_sequence(cfg, rng), sy.out);
    } else if (sy.kind == "test") {
      write_sequence(synth_test_sequence(cfg, rng), sy.out);
    } else {
      const auto frames = synth_background_frames(cfg, rng, sy.count);
      fs::create_directories(sy.out);
      for (std::size_t i = 0; i < frames.size(); ++i)
        write_png(frames[i], sy.out + "/bg_" + pad4(static_cast<int>(i)) + ".png");
    }
  });

  // ---- flow ----
  auto* flow = app.add_subcommand("flow", "TV-L1 optical flow (frame pair or directory)");
  struct {
    std::string prev, next, out, frames;
    double lambda = 0.15, epsilon = 0.01;
    int max_iters = 300, levels = 4, warps = 3;
  } fl;
  flow->add_option("--prev", fl.prev, "previous frame PNG");
  flow->add_option("--next", fl.next, "next frame PNG");
  flow->add_option("--frames", fl.frames, "directory of frame_%04d.png (directory mode)");
  flow->add_option("--out", fl.out, "output .gbt file (pair mode) or directory")->required();
  flow->add_option("--lambda", fl.lambda, "data term weight");
  flow->add_option("--epsilon", fl.epsilon, "stopping threshold");
  flow->add_option("--max-iters", fl.max_iters);
  flow->add_option("--levels", fl.levels, "pyramid levels");
  flow->add_option("--warps", fl.warps, "warps per level");
  flow->callback([&] {
    TvL1Params p;
    p.lambda = static_cast<float>(fl.lambda);
    p.epsilon = static_cast<float>(fl.epsilon);
    p.max_iters = fl.max_iters;
    p.pyramid_levels = fl.levels;
    p.warps_per_level = fl.warps;
    if (!fl.frames.empty()) {
      stage_flow(fl.frames, fl.out, p);
      return;
    }
    if (fl.prev.empty() || fl.next.empty())
      throw UsageError("flow: need --prev and --next (or --frames for directory mode)");
    ImageBuffer a = read_png(fl.prev);
    ImageBuffer b = read_png(fl.next);
    if (a.channels == 3) a = rgb_to_gray(a);
    if (b.channels == 3) b = rgb_to_gray(b);
    const FlowField f = tvl1_flow(a, b, p);
    TensorBlob blob;
    blob.dims = {2, static_cast<std::uint32_t>(f.height), static_cast<std::uint32_t>(f.width)};
    blob.payload = f.u;
    blob.payload.insert(blob.payload.end(), f.v.begin(), f.v.end());
    if (const auto parent = fs::path(fl.out).parent_path(); !parent.empty())
      fs::create_directories(parent);
    write_blob(blob, fl.out);
  });

  // ---- bgsub ----
  auto* bgsub = app.add_subcommand("bgsub", "Bayesian foreground posterior for a frame directory");
  struct {
    std::string frames, out;
    double prior = 0.8, lr = 0.6, smoothing = 0.0;
    int bins = 16;
  } bg;
  bgsub->add_option("--frames", bg.frames, "directory of frame_%04d.png")->required();
  bgsub->add_option("--out", bg.out, "output directory for prob_%04d.png")->required();
  bgsub->add_option("--prior", bg.prior, "background prior");
  bgsub->add_option("--lr", bg.lr, "histogram learning rate");
  bgsub->add_option("--smoothing", bg.smoothing, "posterior box-blend ratio in [0,1]");
  bgsub->add_option("--bins", bg.bins, "histogram bins per channel");
  bgsub->callback([&] {
    ForegroundConfig cfg;
    cfg.prior_background = static_cast<float>(bg.prior);
    cfg.learning_rate = static_cast<float>(bg.lr);
    cfg.smoothing = static_cast<float>(bg.smoothing);
    cfg.num_bins = bg.bins;
    stage_bgsub(bg.frames, bg.out, cfg);
  });

  // ---- stack ----
  auto* stack = app.add_subcommand("stack", "Fuse bgsub + flow outputs into motion stacks");
  struct {
    std::string probs, flows, frames, out, zero;
    double norm_max = 8.0;
  } st;
  stack->add_option("--probs", st.probs, "bgsub output directory")->required();
  stack->add_option("--flows", st.flows, "flow output directory")->required();
  stack->add_option("--frames", st.frames, "frame directory (copies mask_%04d.png along)");
  stack->add_option("--out", st.out, "output directory for stack_%04d.gbt")->required();
  stack->add_option("--norm-max", st.norm_max, "flow normalization scale in px");
  stack->add_option("--zero", st.zero, "channels to blank: csv of bg,flowx,flowy");
  stack->callback([&] {
    std::vector<int> zero;
    for (const auto& tok : split_csv(st.zero)) {
      if (tok == "bg")
        zero.push_back(0);
      else if (tok == "flowx")
        zero.push_back(1);
      else if (tok == "flowy")
        zero.push_back(2);
      else
        throw UsageError("stack: unknown --zero token `" + tok + "`");
    }
    stage_stack(st.probs, st.flows, st.frames, st.out, static_cast<float>(st.norm_max), zero);
  });

  // ---- train-gesture ----
  auto* tg = app.add_subcommand("train-gesture", "Train the gesture net on motion stacks");
  struct {
    std::vector<std::string> data;
    std::string out, dropout_after = "conv3,conv4,conv5";
    std::uint64_t seed = 1;
    int epochs = 40;
    double lr = 1e-2, lr_power = 0.9, dropout_ratio = 0.4, w_hand = 5.0, w_bg = 0.6;
  } tgo;
  tg->add_option("--data", tgo.data, "directory of stack_%04d.gbt + mask_%04d.png (repeatable)")
      ->required();
  tg->add_option("--out", tgo.out, "output params path")->required();
  tg->add_option("--seed", tgo.seed);
  tg->add_option("--epochs", tgo.epochs);
  tg->add_option("--lr", tgo.lr, "base learning rate (poly decay)");
  tg->add_option("--lr-power", tgo.lr_power);
  tg->add_option("--dropout-after", tgo.dropout_after, "csv of layer names");
  tg->add_option("--dropout-ratio", tgo.dropout_ratio);
  tg->add_option("--w-hand", tgo.w_hand, "hand class loss weight");
  tg->add_option("--w-bg", tgo.w_bg, "background class loss weight");
  tg->callback([&] {
    GestureTrainCfg cfg;
    cfg.epochs = tgo.epochs;
    cfg.base_lr = tgo.lr;
    cfg.lr_power = tgo.lr_power;
    cfg.dropout_after = split_csv(tgo.dropout_after);
    cfg.dropout_ratio = static_cast<float>(tgo.dropout_ratio);
    cfg.w_hand = static_cast<float>(tgo.w_hand);
    cfg.w_bg = static_cast<float>(tgo.w_bg);
    RngStream rng(effective_seed(tgo.seed));
    TrainReport report;
    stage_train_gesture(tgo.data, cfg, rng, tgo.out, &report);
    std::printf("held-out loss %.6f -> %.6f\n", report.initial_heldout_loss,
                report.final_heldout_loss);
  });

  // ---- pseudo-label ----
  auto* pl = app.add_subcommand("pseudo-label",
                                "MC-dropout pseudo-labels from a trained gesture net");
  struct {
    std::string params, frames, out;
    std::uint64_t seed = 1;
    int samples = 100;
    double eps_var = 1e-4, threshold = 0.5;
  } plo;
  pl->add_option("--params", plo.params, "gesture net params")->required();
  pl->add_option("--frames", plo.frames, "directory of stack_%04d.gbt")->required();
  pl->add_option("--out", plo.out, "output directory (t_, prec_, mean_)")->required();
  pl->add_option("--seed", plo.seed);
  pl->add_option("--samples", plo.samples, "MC dropout samples");
  pl->add_option("--eps-var", plo.eps_var, "variance floor for precision");
  pl->add_option("--threshold", plo.threshold, "binarization threshold for t");
  pl->callback([&] {
    GestureTrainCfg cfg;
    cfg.mc_samples = plo.samples;
    RngStream rng(effective_seed(plo.seed));
    stage_pseudo_label(plo.params, plo.frames, plo.out, cfg, static_cast<float>(plo.eps_var),
                       static_cast<float>(plo.threshold), rng);
  });

  // ---- train-appearance ----
  auto* ta = app.add_subcommand("train-appearance", "Train the person-specific appearance net");
  struct {
    std::vector<std::string> frames, labels;
    std::string out, backgrounds, aug = "brightness,transform,background";
    std::string dropout_after = "conv4,conv5,fc6,fc7";
    std::uint64_t seed = 1;
    int epochs = 60;
    double lr = 1e-6, lr_power = 0.9, dropout_ratio = 0.4, alpha = 0.5, crop_fraction = 0.8;
    bool no_precision = false;
  } tao;
  ta->add_option("--frames", tao.frames, "frame directory (repeatable, pairs with --labels)")
      ->required();
  ta->add_option("--labels", tao.labels, "label directory (t_ + prec_; repeatable)")->required();
  ta->add_option("--out", tao.out, "output params path")->required();
  ta->add_option("--backgrounds", tao.backgrounds, "directory of bg_%04d.png");
  ta->add_option("--aug", tao.aug, "csv subset of brightness,transform,background");
  ta->add_flag("--no-precision", tao.no_precision, "identity weighting instead of precision");
  ta->add_option("--seed", tao.seed);
  ta->add_option("--epochs", tao.epochs);
  ta->add_option("--lr", tao.lr, "base learning rate (poly decay)");
  ta->add_option("--lr-power", tao.lr_power);
  ta->add_option("--dropout-after", tao.dropout_after, "csv of layer names");
  ta->add_option("--dropout-ratio", tao.dropout_ratio);
  ta->add_option("--alpha", tao.alpha, "soft-sigmoid slope in (0,1)");
  ta->add_option("--crop-fraction", tao.crop_fraction);
  ta->callback([&] {
    AppearanceTrainCfg cfg;
    cfg.epochs = tao.epochs;
    cfg.base_lr = tao.lr;
    cfg.lr_power = tao.lr_power;
    cfg.dropout_after = split_csv(tao.dropout_after);
    cfg.dropout_ratio = static_cast<float>(tao.dropout_ratio);
    cfg.alpha = static_cast<float>(tao.alpha);
    cfg.use_precision = !tao.no_precision;
    AugmentCfg aug;
    aug.enable_transform = aug.enable_brightness = aug.enable_background = false;
    for (const auto& tok : split_csv(tao.aug)) {
      if (tok == "transform")
        aug.enable_transform = true;
      else if (tok == "brightness")
        aug.enable_brightness = true;
      else if (tok == "background")
        aug.enable_background = true;
      else
        throw UsageError("train-appearance: unknown --aug token `" + tok + "`");
    }
    aug.crop_fraction = static_cast<float>(tao.crop_fraction);
    RngStream rng(effective_seed(tao.seed));
    TrainReport report;
    stage_train_appearance(tao.frames, tao.labels, tao.backgrounds, cfg, aug, rng, tao.out,
                           &report);
    if (!report.step_losses.empty())
      std::printf("first/last step loss %.6f -> %.6f\n", report.step_losses.front(),
                  report.step_losses.back());
  });

  // ---- segment ----
  auto* seg = app.add_subcommand("segment", "Run the appearance net on one frame");
  struct {
    std::string params, in, out, prob_out;
    double threshold = 0.5, alpha = 0.5;
  } sg;
  seg->add_option("--params", sg.params, "appearance net params")->required();
  seg->add_option("--in", sg.in, "input frame PNG")->required();
  seg->add_option("--out", sg.out, "output binary mask PNG")->required();
  seg->add_option("--prob-out", sg.prob_out, "also write the probability map PNG");
  seg->add_option("--threshold", sg.threshold, "binarization threshold");
  seg->add_option("--alpha", sg.alpha, "soft-sigmoid slope");
  seg->callback([&] {
    const TrainedNet net = load_net(sg.params);
    const ImageBuffer prob =
        segment(net.spec, net.params, read_png(sg.in), static_cast<float>(sg.alpha));
    ImageBuffer mask(prob.height, prob.width, 1);
    for (std::size_t i = 0; i < prob.size(); ++i)
      mask.data[i] = prob.data[i] >= static_cast<float>(sg.threshold) ? 1.0f : 0.0f;
    if (const auto parent = fs::path(sg.out).parent_path(); !parent.empty())
      fs::create_directories(parent);
    write_png(mask, sg.out);
    if (!sg.prob_out.empty()) write_png(prob, sg.prob_out);
  });

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "Score prediction maps against truth masks");
  struct {
    std::string pred, truth, pred_prefix, out;
    double threshold = 0.5, assert_min = -1.0;
  } evo;
  ev->add_option("--pred", evo.pred, "prediction directory")->required();
  ev->add_option("--truth", evo.truth, "directory of mask_%04d.png")->required();
  ev->add_option("--pred-prefix", evo.pred_prefix, "prediction file prefix (default: auto)");
  ev->add_option("--threshold", evo.threshold);
  ev->add_option("--out", evo.out, "write the report to this file");
  ev->add_option("--assert", evo.assert_min, "exit 3 unless F1 >= this value");
  ev->callback([&] {
    const F1Report r =
        evaluate_dirs(evo.pred, evo.pred_prefix, evo.truth, static_cast<float>(evo.threshold));
    print_f1("eval", r);
    if (!evo.out.empty()) {
      std::ofstream f(evo.out, std::ios::binary);
      if (!f) throw IoError("cannot write " + evo.out);
      char buf[256];
      std::snprintf(buf, sizeof(buf),
                    "f1 %.6f\nprecision %.6f\nrecall %.6f\ntp %lld\nfp %lld\nfn %lld\n", r.f1,
                    r.precision, r.recall, r.true_pos, r.false_pos, r.false_neg);
      f << buf;
    }
    if (evo.assert_min >= 0.0 && r.f1 < evo.assert_min) {
      std::fprintf(stderr, "FAIL: F1 %.4f < required %.4f\n", r.f1, evo.assert_min);
      throw AssertFailure{};
    }
  });

  // ---- ablate ----
  auto* ab = app.add_subcommand("ablate", "Run a controlled study");
  struct {
    std::string study, config, out;
  } abo;
  ab->add_option("--study", abo.study, "inputs | augmentation | dropout | videos | uncertainty")
      ->required();
  ab->add_option("--config", abo.config, "base config file")->required();
  ab->add_option("--out", abo.out, "output root (default: config out_dir)");
  ab->callback([&] {
    const auto results = ablation_runner(abo.study, Config::parse_file(abo.config), abo.out);
    for (const auto& r : results) std::printf("%-36s %.4f\n", r.variant.c_str(), r.f1.f1);
  });

  // ---- pipeline ----
  auto* pi = app.add_subcommand("pipeline", "Run the full two-stage pipeline from a config");
  struct {
    std::string config, out;
  } pio;
  pi->add_option("--config", pio.config, "config file")->required();
  pi->add_option("--out", pio.out, "override the output directory");
  pi->callback([&] {
    const PipelineResult r = run_pipeline(Config::parse_file(pio.config), pio.out);
    print_f1("gesture-net", r.gesture_f1);
    if (r.ran_appearance_stage) {
      print_f1("pseudo-label", r.pseudo_f1);
      print_f1("held-out test", r.test_f1);
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const AssertFailure&) {
    return 3;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
