#pragma once

#include <string>
#include <vector>

#include "gestboot/appearance.hpp"
#include "gestboot/config.hpp"
#include "gestboot/gesture.hpp"
#include "gestboot/metrics.hpp"
#include "gestboot/motion.hpp"
#include "gestboot/net.hpp"
#include "gestboot/rng.hpp"

namespace gestboot {

// Every stage reads its inputs back from files and writes file artifacts, so
// running `pipeline` is byte-identical to chaining the stage subcommands by
// hand on the same directories. Frame-indexed files share the index suffix:
// frame_0007.png, mask_0007.png, flow_0007.gbt, prob_0007.png, stack_0007.gbt.

// TV-L1 flow for each consecutive grayscale frame pair; flow_%04d.gbt (2,h,w)
// is the flow from frame index-1 to index.
void stage_flow(const std::string& frames_dir, const std::string& out_dir,
                const TvL1Params& params);

// Background model seeded on frame 0; prob_%04d.png holds the foreground
// posterior for every later frame.
void stage_bgsub(const std::string& frames_dir, const std::string& out_dir,
                 const ForegroundConfig& cfg);

// Fuses prob + flow into stack_%04d.gbt (3,h,w). zero_channels (subset of
// {0:bg, 1:flow-x, 2:flow-y}) blanks cues for input-ablation runs. Truth
// masks found next to the probability inputs are copied along so a stack
// directory is self-contained training data.
void stage_stack(const std::string& prob_dir, const std::string& flow_dir,
                 const std::string& frames_dir, const std::string& out_dir, float flow_norm_max,
                 const std::vector<int>& zero_channels);

// Trains the gesture net on stack+mask pairs from the given directories and
// saves it (blob sequence + JSON manifest) to out_params.
NetParams stage_train_gesture(const std::vector<std::string>& data_dirs,
                              const GestureTrainCfg& cfg, RngStream& rng,
                              const std::string& out_params, TrainReport* report = nullptr);

// MC-dropout inference over a stack directory: writes per-frame mean_%04d.png,
// t_%04d.png and prec_%04d.gbt.
void stage_pseudo_label(const std::string& params_path, const std::string& stack_dir,
                        const std::string& out_dir, const GestureTrainCfg& cfg, float eps_var,
                        float threshold, RngStream& rng);

// Plain dropout-off gesture-net inference (hand-class probability) over a
// stack directory; prob_%04d.png per frame.
void stage_gesture_eval(const std::string& params_path, const std::string& stack_dir,
                        const std::string& out_dir);

// Trains the appearance net on (frame dir, label dir) pairs; background_dir
// may be empty when background augmentation is off.
NetParams stage_train_appearance(const std::vector<std::string>& frame_dirs,
                                 const std::vector<std::string>& label_dirs,
                                 const std::string& background_dir, const AppearanceTrainCfg& cfg,
                                 const AugmentCfg& aug_cfg, RngStream& rng,
                                 const std::string& out_params, TrainReport* report = nullptr);

// Appearance-net inference over a frame directory; seg_%04d.png probability
// maps.
void stage_segment_dir(const std::string& params_path, const std::string& frames_dir,
                       const std::string& out_dir, float alpha);

// Micro-averaged F1 of prediction maps against mask_%04d.png truth masks,
// matched by index suffix. pred_prefix "" auto-detects when the prediction
// directory holds a single numbered PNG family.
F1Report evaluate_dirs(const std::string& pred_dir, const std::string& pred_prefix,
                       const std::string& truth_dir, float threshold);

struct PipelineResult {
  Config given;     // caller-supplied config after the env-seed override
  Config resolved;  // every known key materialized (defaults filled in)
  std::string out_dir;
  bool ran_appearance_stage = true;  // false when stage = gesture
  F1Report gesture_f1;  // gesture-net probability vs truth on the target gesture video(s)
  F1Report pseudo_f1;   // pseudo-label t vs truth (diagnostic)
  F1Report test_f1;     // appearance net on the held-out test video (headline)
};

// Orchestrates synth -> flow/bgsub/stack -> gesture training -> pseudo-labels
// -> appearance training -> evaluation, writing all artifacts plus report.txt
// and report.ndjson under the output directory. out_dir_override, when
// non-empty, redirects artifacts without touching the config snapshot.
PipelineResult run_pipeline(const Config& cfg, const std::string& out_dir_override = "");
PipelineResult run_pipeline_file(const std::string& config_path);

// The full key/default table run_pipeline resolves against (unknown keys are
// rejected). Exposed for tooling and tests.
Config pipeline_default_config();

}  // namespace gestboot
