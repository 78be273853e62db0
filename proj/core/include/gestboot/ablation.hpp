#pragma once

#include <string>
#include <vector>

#include "gestboot/config.hpp"
#include "gestboot/metrics.hpp"

namespace gestboot {

struct AblationResult {
  std::string variant;          // unique id within the study
  F1Report f1;                  // gesture-net F1 for `inputs`, held-out test F1 otherwise
  std::string config_snapshot;  // canonical variant config (base + studied keys)
};

// Runs one controlled study. Studies: `inputs` (5 cue combinations),
// `augmentation` (6 strategy combinations), `dropout` (6 placements x 2
// ratios), `videos` (1/2/4 gesture videos), `uncertainty` (precision vs
// identity weighting). Every variant shares the base config — and therefore
// seed and dataset — and differs from its siblings only in the studied keys.
// Artifacts land under out_root/<study>/<variant>/ plus a summary table;
// out_root falls back to the base config's out_dir.
std::vector<AblationResult> ablation_runner(const std::string& study, const Config& base_config,
                                            const std::string& out_root = "");

}  // namespace gestboot
