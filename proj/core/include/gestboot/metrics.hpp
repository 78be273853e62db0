#pragma once

#include <vector>

#include "gestboot/image.hpp"

namespace gestboot {

struct F1Report {
  long long true_pos = 0;
  long long false_pos = 0;
  long long false_neg = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<double> per_frame_f1;  // only filled by the sequence overload
};

// Pixel-level F1 of a probability map against a binary truth mask.
// Prediction is positive where prob >= threshold; truth is positive where
// the mask is >= 0.5. Degenerate cases (no positives anywhere) score 0.
F1Report f1_score(const ImageBuffer& prob, const ImageBuffer& truth, float threshold = 0.5f);

// Micro-averaged over a sequence: counts pooled across frames, with the
// per-frame F1 breakdown retained.
F1Report f1_score_sequence(const std::vector<ImageBuffer>& probs,
                           const std::vector<ImageBuffer>& truths, float threshold = 0.5f);

// Recomputes precision/recall/f1 from the raw counts (for reports assembled
// by pooling counts across sources).
void f1_finalize_counts(F1Report* report);

}  // namespace gestboot
