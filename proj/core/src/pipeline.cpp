#include "gestboot/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "gestboot/blob.hpp"
#include "gestboot/error.hpp"
#include "gestboot/synth.hpp"

namespace gestboot {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// RNG split tags; stable so that reruns and stage-by-stage invocations agree.
constexpr std::uint64_t kTagSynthTargetVid = 100;  // +video index
constexpr std::uint64_t kTagSynthTest = 200;
constexpr std::uint64_t kTagSynthBackground = 300;
constexpr std::uint64_t kTagSynthTrainUser = 400;  // +user index
constexpr std::uint64_t kTagTrainGesture = 500;
constexpr std::uint64_t kTagMcVid = 600;  // +video index
constexpr std::uint64_t kTagTrainAppearance = 700;

// Distinct synthetic "users" get appearance seeds on a prime stride.
constexpr std::uint64_t kUserSeedStride = 7919;

std::string pad4(int n) {
  char b[16];
  std::snprintf(b, sizeof(b), "%04d", n);
  return b;
}

std::string fmt_f(double v, int prec = 4) {
  char b[64];
  std::snprintf(b, sizeof(b), "%.*f", prec, v);
  return b;
}

struct NumberedFile {
  int index;
  std::string path;
};

std::vector<NumberedFile> list_numbered(const std::string& dir, const std::string& prefix,
                                        const std::string& ext) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<NumberedFile> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name.size() != prefix.size() + 4 + ext.size()) continue;
    if (name.compare(0, prefix.size(), prefix) != 0) continue;
    if (name.compare(name.size() - ext.size(), ext.size(), ext) != 0) continue;
    const std::string digits = name.substr(prefix.size(), 4);
    if (digits.find_first_not_of("0123456789") != std::string::npos) continue;
    out.push_back({std::stoi(digits), e.path().string()});
  }
  std::sort(out.begin(), out.end(),
            [](const NumberedFile& a, const NumberedFile& b) { return a.index < b.index; });
  return out;
}

// Detects the single `<prefix>NNNN.png` family in a directory.
std::string detect_png_prefix(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::set<std::string> prefixes;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name.size() < 4 + 4 + 4) continue;
    if (name.compare(name.size() - 4, 4, ".png") != 0) continue;
    const std::string digits = name.substr(name.size() - 8, 4);
    if (digits.find_first_not_of("0123456789") != std::string::npos) continue;
    prefixes.insert(name.substr(0, name.size() - 8));
  }
  if (prefixes.empty()) throw InvalidInputError("no numbered PNG files in " + dir);
  if (prefixes.size() > 1)
    throw InvalidInputError("multiple numbered PNG families in " + dir +
                            "; pass an explicit prediction prefix");
  return *prefixes.begin();
}

void ensure_dir(const fs::path& p) { fs::create_directories(p); }

void write_sequence(const SynthSequence& seq, const std::string& dir) {
  ensure_dir(dir);
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const std::string idx = pad4(static_cast<int>(i));
    write_png(seq.frames[i], dir + "/frame_" + idx + ".png");
    write_png(seq.masks[i], dir + "/mask_" + idx + ".png");
  }
}

TensorBlob flow_to_blob(const FlowField& f) {
  TensorBlob blob;
  blob.dims = {2, static_cast<std::uint32_t>(f.height), static_cast<std::uint32_t>(f.width)};
  blob.payload.reserve(f.u.size() * 2);
  blob.payload.insert(blob.payload.end(), f.u.begin(), f.u.end());
  blob.payload.insert(blob.payload.end(), f.v.begin(), f.v.end());
  return blob;
}

FlowField flow_from_blob(const TensorBlob& blob) {
  if (blob.dims.size() != 3 || blob.dims[0] != 2)
    throw FormatError("flow blob must have dims (2,h,w)");
  FlowField f(static_cast<int>(blob.dims[1]), static_cast<int>(blob.dims[2]));
  const std::size_t n = f.u.size();
  std::copy(blob.payload.begin(), blob.payload.begin() + n, f.u.begin());
  std::copy(blob.payload.begin() + n, blob.payload.end(), f.v.begin());
  return f;
}

ImageBuffer load_gray_frame(const std::string& path) {
  ImageBuffer img = read_png(path);
  return img.channels == 1 ? img : rgb_to_gray(img);
}

// Hand-class softmax probability from 2-channel logits.
ImageBuffer hand_prob_from_logits(const TensorF& logits) {
  if (logits.channels != 2) throw InvalidInputError("gesture net must output 2 channels");
  ImageBuffer prob(logits.height, logits.width, 1);
  for (int y = 0; y < logits.height; ++y) {
    for (int x = 0; x < logits.width; ++x) {
      const float a = logits.at(0, y, x);
      const float b = logits.at(1, y, x);
      const float m = std::max(a, b);
      const float ea = std::exp(a - m), eb = std::exp(b - m);
      prob.at(0, y, x) = eb / (ea + eb);
    }
  }
  return prob;
}

struct StageTimer {
  std::string name;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  explicit StageTimer(std::string n) : name(std::move(n)) {}
  ~StageTimer() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "[pipeline] " << name << " (" << fmt_f(s, 1) << "s)" << std::endl;
  }
};

}  // namespace

void stage_flow(const std::string& frames_dir, const std::string& out_dir,
                const TvL1Params& params) {
  params.validate();
  const auto frames = list_numbered(frames_dir, "frame_", ".png");
  if (frames.size() < 2) throw InvalidInputError("stage_flow: need at least 2 frames in " + frames_dir);
  ensure_dir(out_dir);
  ImageBuffer prev = load_gray_frame(frames[0].path);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    ImageBuffer next = load_gray_frame(frames[i].path);
    const FlowField f = tvl1_flow(prev, next, params);
    write_blob(flow_to_blob(f), out_dir + "/flow_" + pad4(frames[i].index) + ".gbt");
    prev = std::move(next);
  }
}

void stage_bgsub(const std::string& frames_dir, const std::string& out_dir,
                 const ForegroundConfig& cfg) {
  cfg.validate();
  const auto frames = list_numbered(frames_dir, "frame_", ".png");
  if (frames.size() < 2)
    throw InvalidInputError("stage_bgsub: need at least 2 frames in " + frames_dir);
  ensure_dir(out_dir);
  ForegroundModel model = fg_init(read_png(frames[0].path), cfg);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const ImageBuffer post = fg_update(model, read_png(frames[i].path));
    write_png(post, out_dir + "/prob_" + pad4(frames[i].index) + ".png");
  }
}

void stage_stack(const std::string& prob_dir, const std::string& flow_dir,
                 const std::string& frames_dir, const std::string& out_dir, float flow_norm_max,
                 const std::vector<int>& zero_channels) {
  const auto probs = list_numbered(prob_dir, "prob_", ".png");
  if (probs.empty()) throw InvalidInputError("stage_stack: no probability maps in " + prob_dir);
  ensure_dir(out_dir);
  for (const auto& p : probs) {
    const std::string idx = pad4(p.index);
    const std::string flow_path = flow_dir + "/flow_" + idx + ".gbt";
    if (!fs::exists(flow_path)) throw IoError("stage_stack: missing " + flow_path);
    const FlowField flow = flow_from_blob(read_blob(flow_path));
    MotionStack stack = build_motion_stack(read_png(p.path), flow, flow_norm_max);
    for (const int c : zero_channels) {
      if (c < 0 || c > 2) throw InvalidInputError("stage_stack: zero channel out of range");
      float* plane = stack.channels.plane(c);
      std::fill(plane, plane + stack.channels.plane_size(), 0.0f);
    }
    write_blob(to_blob(stack.channels), out_dir + "/stack_" + idx + ".gbt");
    if (!frames_dir.empty()) {
      const std::string mask_path = frames_dir + "/mask_" + idx + ".png";
      if (fs::exists(mask_path))
        fs::copy_file(mask_path, out_dir + "/mask_" + idx + ".png",
                      fs::copy_options::overwrite_existing);
    }
  }
}

NetParams stage_train_gesture(const std::vector<std::string>& data_dirs,
                              const GestureTrainCfg& cfg, RngStream& rng,
                              const std::string& out_params, TrainReport* report) {
  cfg.validate();
  if (data_dirs.empty()) throw InvalidInputError("stage_train_gesture: no data directories");
  std::vector<GestureExample> examples;
  for (const auto& dir : data_dirs) {
    const auto stacks = list_numbered(dir, "stack_", ".gbt");
    if (stacks.empty()) throw InvalidInputError("stage_train_gesture: no stacks in " + dir);
    for (const auto& s : stacks) {
      const std::string mask_path = dir + "/mask_" + pad4(s.index) + ".png";
      if (!fs::exists(mask_path)) throw IoError("stage_train_gesture: missing " + mask_path);
      GestureExample ex;
      ex.stack.channels = image_from_blob(read_blob(s.path));
      ex.mask = read_png(mask_path);
      examples.push_back(std::move(ex));
    }
  }
  NetParams params = train_gesture_net(examples, cfg, rng, report);
  ensure_dir(fs::path(out_params).parent_path());
  save_net(out_params, gesture_net_spec(cfg), params);
  return params;
}

void stage_pseudo_label(const std::string& params_path, const std::string& stack_dir,
                        const std::string& out_dir, const GestureTrainCfg& cfg, float eps_var,
                        float threshold, RngStream& rng) {
  const TrainedNet net = load_net(params_path);
  const auto stacks = list_numbered(stack_dir, "stack_", ".gbt");
  if (stacks.empty()) throw InvalidInputError("stage_pseudo_label: no stacks in " + stack_dir);
  ensure_dir(out_dir);
  for (const auto& s : stacks) {
    MotionStack stack;
    stack.channels = image_from_blob(read_blob(s.path));
    const UncertaintyMap umap = mc_predict(net.spec, net.params, stack, cfg, rng);
    const PseudoLabel label = make_pseudo_label(umap, eps_var, threshold);
    const std::string idx = pad4(s.index);
    write_png(umap.mean, out_dir + "/mean_" + idx + ".png");
    write_png(label.t, out_dir + "/t_" + idx + ".png");
    write_blob(to_blob(label.precision), out_dir + "/prec_" + idx + ".gbt");
  }
}

void stage_gesture_eval(const std::string& params_path, const std::string& stack_dir,
                        const std::string& out_dir) {
  const TrainedNet net = load_net(params_path);
  const auto stacks = list_numbered(stack_dir, "stack_", ".gbt");
  if (stacks.empty()) throw InvalidInputError("stage_gesture_eval: no stacks in " + stack_dir);
  ensure_dir(out_dir);
  for (const auto& s : stacks) {
    const TensorF input = tensor_from_image(image_from_blob(read_blob(s.path)));
    const TensorF logits = net_forward(net.spec, net.params, input, false, nullptr);
    write_png(hand_prob_from_logits(logits), out_dir + "/prob_" + pad4(s.index) + ".png");
  }
}

NetParams stage_train_appearance(const std::vector<std::string>& frame_dirs,
                                 const std::vector<std::string>& label_dirs,
                                 const std::string& background_dir, const AppearanceTrainCfg& cfg,
                                 const AugmentCfg& aug_cfg, RngStream& rng,
                                 const std::string& out_params, TrainReport* report) {
  cfg.validate();
  if (frame_dirs.size() != label_dirs.size() || frame_dirs.empty())
    throw InvalidInputError("stage_train_appearance: frame/label directory lists must pair up");
  std::vector<TrainSample> samples;
  for (std::size_t d = 0; d < frame_dirs.size(); ++d) {
    const auto labels = list_numbered(label_dirs[d], "t_", ".png");
    if (labels.empty())
      throw InvalidInputError("stage_train_appearance: no labels in " + label_dirs[d]);
    for (const auto& l : labels) {
      const std::string idx = pad4(l.index);
      const std::string frame_path = frame_dirs[d] + "/frame_" + idx + ".png";
      const std::string prec_path = label_dirs[d] + "/prec_" + idx + ".gbt";
      if (!fs::exists(frame_path)) throw IoError("stage_train_appearance: missing " + frame_path);
      if (!fs::exists(prec_path)) throw IoError("stage_train_appearance: missing " + prec_path);
      TrainSample s;
      s.frame = read_png(frame_path);
      s.label.t = read_png(l.path);
      s.label.precision = image_from_blob(read_blob(prec_path));
      samples.push_back(std::move(s));
    }
  }
  AugmentCfg aug = aug_cfg;
  aug.background_images.clear();
  if (aug.enable_background && !background_dir.empty()) {
    for (const auto& b : list_numbered(background_dir, "bg_", ".png"))
      aug.background_images.push_back(read_png(b.path));
  }
  if (aug.background_images.empty()) aug.enable_background = false;
  NetParams params = train_appearance_net(samples, cfg, aug, rng, report);
  ensure_dir(fs::path(out_params).parent_path());
  save_net(out_params, appearance_net_spec(cfg), params);
  return params;
}

void stage_segment_dir(const std::string& params_path, const std::string& frames_dir,
                       const std::string& out_dir, float alpha) {
  const TrainedNet net = load_net(params_path);
  const auto frames = list_numbered(frames_dir, "frame_", ".png");
  if (frames.empty()) throw InvalidInputError("stage_segment_dir: no frames in " + frames_dir);
  ensure_dir(out_dir);
  for (const auto& f : frames) {
    const ImageBuffer prob = segment(net.spec, net.params, read_png(f.path), alpha);
    write_png(prob, out_dir + "/seg_" + pad4(f.index) + ".png");
  }
}

F1Report evaluate_dirs(const std::string& pred_dir, const std::string& pred_prefix,
                       const std::string& truth_dir, float threshold) {
  const std::string prefix = pred_prefix.empty() ? detect_png_prefix(pred_dir) : pred_prefix;
  const auto preds = list_numbered(pred_dir, prefix, ".png");
  if (preds.empty())
    throw InvalidInputError("evaluate_dirs: no `" + prefix + "*.png` maps in " + pred_dir);
  std::vector<ImageBuffer> probs, truths;
  for (const auto& p : preds) {
    const std::string mask_path = truth_dir + "/mask_" + pad4(p.index) + ".png";
    if (!fs::exists(mask_path)) throw IoError("evaluate_dirs: missing " + mask_path);
    probs.push_back(read_png(p.path));
    truths.push_back(read_png(mask_path));
  }
  return f1_score_sequence(probs, truths, threshold);
}

Config pipeline_default_config() {
  static const std::vector<std::pair<const char*, const char*>> kDefaults = {
      {"seed", "1"},
      {"out_dir", ""},
      {"stage", "full"},
      {"width", "128"},
      {"height", "96"},
      {"frames_per_phase", "30"},
      {"test_frames", "60"},
      {"jitter_px", "1.0"},
      {"brightness", "1.0"},
      {"glove", "false"},
      {"sensor_noise", "0.008"},
      {"appearance_seed", ""},
      {"num_gesture_videos", "1"},
      {"gesture_train_users", "2"},
      {"gesture_params", ""},
      {"gesture_epochs", "40"},
      {"gesture_lr", "0.01"},
      {"gesture_lr_power", "0.9"},
      {"gesture_dropout_after", "conv3,conv4,conv5"},
      {"gesture_dropout_ratio", "0.4"},
      {"w_hand", "5.0"},
      {"w_bg", "0.6"},
      {"mc_samples", "100"},
      {"eps_var", "0.0001"},
      {"pseudo_threshold", "0.5"},
      {"appearance_epochs", "60"},
      {"appearance_lr", "1e-6"},
      {"appearance_lr_power", "0.9"},
      {"appearance_dropout_after", "conv4,conv5,fc6,fc7"},
      {"appearance_dropout_ratio", "0.4"},
      {"alpha", "0.5"},
      {"use_precision", "true"},
      {"aug_transform", "true"},
      {"aug_brightness", "true"},
      {"aug_background", "true"},
      {"background_count", "30"},
      {"crop_fraction", "0.8"},
      {"flow_lambda", "0.15"},
      {"flow_epsilon", "0.01"},
      {"flow_max_iters", "300"},
      {"flow_pyramid_levels", "4"},
      {"flow_warps", "3"},
      {"flow_norm_max", "8.0"},
      {"bg_prior", "0.8"},
      {"bg_learning_rate", "0.6"},
      {"bg_smoothing", "0.0"},
      {"bg_bins", "16"},
      {"eval_threshold", "0.5"},
      {"stack_zero_channels", ""},
  };
  Config cfg;
  for (const auto& [k, v] : kDefaults) cfg.set(k, v);
  return cfg;
}

namespace {

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

std::vector<int> parse_zero_channels(const std::string& s) {
  std::set<int> chans;
  for (const auto& tok : split_csv(s)) {
    if (tok == "bg")
      chans.insert(0);
    else if (tok == "flowx")
      chans.insert(1);
    else if (tok == "flowy")
      chans.insert(2);
    else
      throw ConfigError("stack_zero_channels: unknown token `" + tok +
                        "` (expected bg, flowx, flowy)");
  }
  return {chans.begin(), chans.end()};
}

struct Resolved {
  std::uint64_t seed = 1;
  std::uint64_t appearance_seed = 1;
  std::string out_dir, stage, gesture_params;
  SynthCfg synth;
  int num_videos = 1;
  int train_users = 2;
  int background_count = 30;
  GestureTrainCfg gcfg;
  AppearanceTrainCfg acfg;
  AugmentCfg aug;
  TvL1Params flow;
  ForegroundConfig fg;
  float flow_norm_max = 8.0f;
  float eps_var = 1e-4f;
  float pseudo_threshold = 0.5f;
  float eval_threshold = 0.5f;
  std::vector<int> zero_channels;
};

Resolved resolve(const Config& c) {
  Resolved r;
  r.seed = c.get_u64("seed");
  r.appearance_seed = c.get_u64("appearance_seed");
  r.out_dir = c.get_string("out_dir");
  r.stage = c.get_string("stage");
  if (r.stage != "full" && r.stage != "gesture")
    throw ConfigError("config: stage must be `full` or `gesture`, got `" + r.stage + "`");
  r.gesture_params = c.get_string("gesture_params");

  r.synth.height = static_cast<int>(c.get_int("height"));
  r.synth.width = static_cast<int>(c.get_int("width"));
  r.synth.frames_per_phase = static_cast<int>(c.get_int("frames_per_phase"));
  r.synth.test_frames = static_cast<int>(c.get_int("test_frames"));
  r.synth.jitter_px = static_cast<float>(c.get_double("jitter_px"));
  r.synth.brightness = static_cast<float>(c.get_double("brightness"));
  r.synth.glove = c.get_bool("glove");
  r.synth.sensor_noise = static_cast<float>(c.get_double("sensor_noise"));
  r.synth.appearance_seed = r.appearance_seed;
  r.synth.validate();

  r.num_videos = static_cast<int>(c.get_int("num_gesture_videos"));
  r.train_users = static_cast<int>(c.get_int("gesture_train_users"));
  r.background_count = static_cast<int>(c.get_int("background_count"));
  if (r.num_videos < 1) throw ConfigError("config: num_gesture_videos must be >= 1");
  if (r.train_users < 0) throw ConfigError("config: gesture_train_users must be >= 0");
  if (r.background_count < 0) throw ConfigError("config: background_count must be >= 0");
  if (r.gesture_params.empty() && r.train_users < 1)
    throw ConfigError("config: gesture_train_users must be >= 1 unless gesture_params is given");

  r.gcfg.epochs = static_cast<int>(c.get_int("gesture_epochs"));
  r.gcfg.base_lr = c.get_double("gesture_lr");
  r.gcfg.lr_power = c.get_double("gesture_lr_power");
  r.gcfg.dropout_after = split_csv(c.get_string("gesture_dropout_after"));
  r.gcfg.dropout_ratio = static_cast<float>(c.get_double("gesture_dropout_ratio"));
  r.gcfg.w_hand = static_cast<float>(c.get_double("w_hand"));
  r.gcfg.w_bg = static_cast<float>(c.get_double("w_bg"));
  r.gcfg.mc_samples = static_cast<int>(c.get_int("mc_samples"));
  r.gcfg.validate();

  r.acfg.epochs = static_cast<int>(c.get_int("appearance_epochs"));
  r.acfg.base_lr = c.get_double("appearance_lr");
  r.acfg.lr_power = c.get_double("appearance_lr_power");
  r.acfg.dropout_after = split_csv(c.get_string("appearance_dropout_after"));
  r.acfg.dropout_ratio = static_cast<float>(c.get_double("appearance_dropout_ratio"));
  r.acfg.alpha = static_cast<float>(c.get_double("alpha"));
  r.acfg.use_precision = c.get_bool("use_precision");
  r.acfg.validate();

  r.aug.enable_transform = c.get_bool("aug_transform");
  r.aug.enable_brightness = c.get_bool("aug_brightness");
  r.aug.enable_background = c.get_bool("aug_background");
  r.aug.crop_fraction = static_cast<float>(c.get_double("crop_fraction"));
  r.aug.validate();

  r.flow.lambda = static_cast<float>(c.get_double("flow_lambda"));
  r.flow.epsilon = static_cast<float>(c.get_double("flow_epsilon"));
  r.flow.max_iters = static_cast<int>(c.get_int("flow_max_iters"));
  r.flow.pyramid_levels = static_cast<int>(c.get_int("flow_pyramid_levels"));
  r.flow.warps_per_level = static_cast<int>(c.get_int("flow_warps"));
  r.flow.validate();

  r.fg.prior_background = static_cast<float>(c.get_double("bg_prior"));
  r.fg.learning_rate = static_cast<float>(c.get_double("bg_learning_rate"));
  r.fg.smoothing = static_cast<float>(c.get_double("bg_smoothing"));
  r.fg.num_bins = static_cast<int>(c.get_int("bg_bins"));
  r.fg.validate();

  r.flow_norm_max = static_cast<float>(c.get_double("flow_norm_max"));
  r.eps_var = static_cast<float>(c.get_double("eps_var"));
  r.pseudo_threshold = static_cast<float>(c.get_double("pseudo_threshold"));
  r.eval_threshold = static_cast<float>(c.get_double("eval_threshold"));
  if (r.flow_norm_max <= 0.0f) throw ConfigError("config: flow_norm_max must be > 0");
  if (r.eval_threshold <= 0.0f || r.eval_threshold >= 1.0f)
    throw ConfigError("config: eval_threshold must be in (0,1)");
  r.zero_channels = parse_zero_channels(c.get_string("stack_zero_channels"));
  return r;
}

F1Report pool_reports(const std::vector<F1Report>& parts) {
  F1Report total;
  for (const auto& p : parts) {
    total.true_pos += p.true_pos;
    total.false_pos += p.false_pos;
    total.false_neg += p.false_neg;
    total.per_frame_f1.insert(total.per_frame_f1.end(), p.per_frame_f1.begin(),
                              p.per_frame_f1.end());
  }
  f1_finalize_counts(&total);
  return total;
}

json f1_to_json(const F1Report& r) {
  return json{{"true_pos", r.true_pos},   {"false_pos", r.false_pos},
              {"false_neg", r.false_neg}, {"precision", r.precision},
              {"recall", r.recall},       {"f1", r.f1}};
}

std::string f1_line(const F1Report& r) {
  return fmt_f(r.f1) + "  (precision " + fmt_f(r.precision) + ", recall " + fmt_f(r.recall) + ")";
}

void write_reports(const PipelineResult& res, const std::string& out_dir) {
  std::ostringstream txt;
  txt << "gestboot pipeline report\n";
  txt << "========================\n\n";
  txt << "seed            : " << res.resolved.get_string("seed") << "\n";
  txt << "stage           : " << res.resolved.get_string("stage") << "\n";
  txt << "gesture videos  : " << res.resolved.get_string("num_gesture_videos") << "\n\n";
  txt << "gesture-net F1 on gesture video(s) : " << f1_line(res.gesture_f1) << "\n";
  if (res.ran_appearance_stage) {
    txt << "pseudo-label F1                    : " << f1_line(res.pseudo_f1) << "\n";
    txt << "held-out test F1                   : " << f1_line(res.test_f1) << "\n";
    if (!res.test_f1.per_frame_f1.empty()) {
      double mn = 1.0, mx = 0.0, sum = 0.0;
      for (const double v : res.test_f1.per_frame_f1) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
        sum += v;
      }
      txt << "per-frame test F1 min/mean/max     : " << fmt_f(mn) << " / "
          << fmt_f(sum / static_cast<double>(res.test_f1.per_frame_f1.size())) << " / "
          << fmt_f(mx) << "\n";
    }
  }
  txt << "\nconfig (resolved)\n-----------------\n" << res.resolved.canonical();
  {
    std::ofstream f(out_dir + "/report.txt", std::ios::binary);
    if (!f) throw IoError("cannot write " + out_dir + "/report.txt");
    f << txt.str();
  }

  std::ostringstream nd;
  nd << json{{"record", "config"},
             {"given", res.given.canonical()},
             {"resolved", res.resolved.canonical()}}
            .dump()
     << "\n";
  {
    json j = f1_to_json(res.gesture_f1);
    j["record"] = "gesture_f1";
    nd << j.dump() << "\n";
  }
  if (res.ran_appearance_stage) {
    json jp = f1_to_json(res.pseudo_f1);
    jp["record"] = "pseudo_f1";
    nd << jp.dump() << "\n";
    json jt = f1_to_json(res.test_f1);
    jt["record"] = "test_f1";
    nd << jt.dump() << "\n";
    nd << json{{"record", "test_f1_per_frame"}, {"values", res.test_f1.per_frame_f1}}.dump()
       << "\n";
  }
  std::ofstream f(out_dir + "/report.ndjson", std::ios::binary);
  if (!f) throw IoError("cannot write " + out_dir + "/report.ndjson");
  f << nd.str();
}

}  // namespace

PipelineResult run_pipeline(const Config& cfg_in, const std::string& out_dir_override) {
  Config given = cfg_in;
  apply_env_seed_override(&given);
  Config resolved = pipeline_default_config();
  for (const auto& [k, v] : given.entries()) {
    if (!resolved.has(k)) throw ConfigError("config: unknown key `" + k + "`");
    resolved.set(k, v);
  }
  if (resolved.get_string("appearance_seed").empty())
    resolved.set("appearance_seed", resolved.get_string("seed"));
  std::string out_dir = out_dir_override.empty() ? resolved.get_string("out_dir") : out_dir_override;
  if (out_dir.empty()) throw ConfigError("config: missing required key `out_dir`");
  resolved.set("out_dir", out_dir);
  const Resolved R = resolve(resolved);

  PipelineResult res;
  res.given = given;
  res.resolved = resolved;
  res.out_dir = out_dir;
  res.ran_appearance_stage = (R.stage == "full");
  ensure_dir(out_dir);
  {
    std::ofstream f(out_dir + "/config_given.txt", std::ios::binary);
    f << given.canonical();
    std::ofstream g(out_dir + "/config_resolved.txt", std::ios::binary);
    g << resolved.canonical();
  }

  RngStream root(R.seed);
  const bool train_gesture = R.gesture_params.empty();

  std::vector<std::string> target_frame_dirs, target_stack_dirs, target_label_dirs;
  std::vector<std::string> user_stack_dirs;

  {
    StageTimer t("synth");
    for (int k = 0; k < R.num_videos; ++k) {
      RngStream r = root.split(kTagSynthTargetVid + static_cast<std::uint64_t>(k));
      const SynthSequence seq = synth_gesture_sequence(R.synth, r);
      write_sequence(seq, out_dir + "/gesture/vid" + std::to_string(k));
      target_frame_dirs.push_back(out_dir + "/gesture/vid" + std::to_string(k));
    }
    RngStream rt = root.split(kTagSynthTest);
    write_sequence(synth_test_sequence(R.synth, rt), out_dir + "/test");
    if (R.stage == "full" && R.aug.enable_background && R.background_count > 0) {
      RngStream rb = root.split(kTagSynthBackground);
      const auto bgs = synth_background_frames(R.synth, rb, R.background_count);
      ensure_dir(out_dir + "/background");
      for (std::size_t i = 0; i < bgs.size(); ++i)
        write_png(bgs[i], out_dir + "/background/bg_" + pad4(static_cast<int>(i)) + ".png");
    }
    if (train_gesture) {
      for (int j = 0; j < R.train_users; ++j) {
        SynthCfg ucfg = R.synth;
        ucfg.appearance_seed =
            R.appearance_seed + kUserSeedStride * static_cast<std::uint64_t>(j + 1);
        RngStream r = root.split(kTagSynthTrainUser + static_cast<std::uint64_t>(j));
        write_sequence(synth_gesture_sequence(ucfg, r), out_dir + "/trainuser" + std::to_string(j));
      }
    }
  }

  {
    StageTimer t("motion (flow + bgsub + stacks)");
    std::vector<std::pair<std::string, std::string>> videos;  // (frames dir, name)
    for (int k = 0; k < R.num_videos; ++k)
      videos.push_back({target_frame_dirs[static_cast<std::size_t>(k)], "vid" + std::to_string(k)});
    if (train_gesture)
      for (int j = 0; j < R.train_users; ++j)
        videos.push_back({out_dir + "/trainuser" + std::to_string(j), "user" + std::to_string(j)});
    for (const auto& [frames, name] : videos) {
      stage_flow(frames, out_dir + "/flow/" + name, R.flow);
      stage_bgsub(frames, out_dir + "/bgsub/" + name, R.fg);
      stage_stack(out_dir + "/bgsub/" + name, out_dir + "/flow/" + name, frames,
                  out_dir + "/stacks/" + name, R.flow_norm_max, R.zero_channels);
    }
    for (int k = 0; k < R.num_videos; ++k)
      target_stack_dirs.push_back(out_dir + "/stacks/vid" + std::to_string(k));
    if (train_gesture)
      for (int j = 0; j < R.train_users; ++j)
        user_stack_dirs.push_back(out_dir + "/stacks/user" + std::to_string(j));
  }

  std::string gparams = R.gesture_params;
  if (train_gesture) {
    StageTimer t("train gesture net");
    gparams = out_dir + "/params/gesture.params";
    RngStream rg = root.split(kTagTrainGesture);
    stage_train_gesture(user_stack_dirs, R.gcfg, rg, gparams);
  }

  if (R.stage == "gesture") {
    StageTimer t("gesture-net evaluation");
    std::vector<F1Report> parts;
    for (int k = 0; k < R.num_videos; ++k) {
      const std::string eval_dir = out_dir + "/gesture_eval/vid" + std::to_string(k);
      stage_gesture_eval(gparams, target_stack_dirs[static_cast<std::size_t>(k)], eval_dir);
      parts.push_back(evaluate_dirs(eval_dir, "prob_",
                                    target_frame_dirs[static_cast<std::size_t>(k)],
                                    R.eval_threshold));
    }
    res.gesture_f1 = pool_reports(parts);
    write_reports(res, out_dir);
    return res;
  }

  {
    StageTimer t("pseudo-labels (MC dropout)");
    std::vector<F1Report> mean_parts, t_parts;
    for (int k = 0; k < R.num_videos; ++k) {
      const std::string label_dir = out_dir + "/labels/vid" + std::to_string(k);
      RngStream rm = root.split(kTagMcVid + static_cast<std::uint64_t>(k));
      stage_pseudo_label(gparams, target_stack_dirs[static_cast<std::size_t>(k)], label_dir,
                         R.gcfg, R.eps_var, R.pseudo_threshold, rm);
      target_label_dirs.push_back(label_dir);
      mean_parts.push_back(evaluate_dirs(label_dir, "mean_",
                                         target_frame_dirs[static_cast<std::size_t>(k)],
                                         R.eval_threshold));
      t_parts.push_back(evaluate_dirs(label_dir, "t_",
                                      target_frame_dirs[static_cast<std::size_t>(k)],
                                      R.eval_threshold));
    }
    res.gesture_f1 = pool_reports(mean_parts);
    res.pseudo_f1 = pool_reports(t_parts);
  }

  const std::string aparams = out_dir + "/params/appearance.params";
  {
    StageTimer t("train appearance net");
    RngStream ra = root.split(kTagTrainAppearance);
    const std::string bg_dir =
        (R.aug.enable_background && R.background_count > 0) ? out_dir + "/background" : "";
    stage_train_appearance(target_frame_dirs, target_label_dirs, bg_dir, R.acfg, R.aug, ra,
                           aparams);
  }

  {
    StageTimer t("evaluation");
    stage_segment_dir(aparams, out_dir + "/test", out_dir + "/seg", R.acfg.alpha);
    res.test_f1 = evaluate_dirs(out_dir + "/seg", "seg_", out_dir + "/test", R.eval_threshold);
  }

  write_reports(res, out_dir);
  return res;
}

PipelineResult run_pipeline_file(const std::string& config_path) {
  return run_pipeline(Config::parse_file(config_path));
}

}  // namespace gestboot
