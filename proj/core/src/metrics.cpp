#include "gestboot/metrics.hpp"

#include "gestboot/error.hpp"

namespace gestboot {
namespace {

void accumulate(const ImageBuffer& prob, const ImageBuffer& truth, float threshold, F1Report* r) {
  if (prob.channels != 1 || truth.channels != 1)
    throw InvalidInputError("f1_score: expects single-channel maps");
  if (prob.height != truth.height || prob.width != truth.width)
    throw InvalidInputError("f1_score: prediction/truth dims differ");
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const bool p = prob.data[i] >= threshold;
    const bool t = truth.data[i] >= 0.5f;
    if (p && t)
      ++r->true_pos;
    else if (p)
      ++r->false_pos;
    else if (t)
      ++r->false_neg;
  }
}

void finish(F1Report* r) {
  const double tp = static_cast<double>(r->true_pos);
  const double denom_p = tp + static_cast<double>(r->false_pos);
  const double denom_r = tp + static_cast<double>(r->false_neg);
  r->precision = denom_p > 0.0 ? tp / denom_p : 0.0;
  r->recall = denom_r > 0.0 ? tp / denom_r : 0.0;
  r->f1 = (r->precision + r->recall) > 0.0
              ? 2.0 * r->precision * r->recall / (r->precision + r->recall)
              : 0.0;
}

}  // namespace

void f1_finalize_counts(F1Report* report) { finish(report); }

F1Report f1_score(const ImageBuffer& prob, const ImageBuffer& truth, float threshold) {
  F1Report r;
  accumulate(prob, truth, threshold, &r);
  finish(&r);
  return r;
}

F1Report f1_score_sequence(const std::vector<ImageBuffer>& probs,
                           const std::vector<ImageBuffer>& truths, float threshold) {
  if (probs.size() != truths.size())
    throw InvalidInputError("f1_score_sequence: sequence lengths differ");
  if (probs.empty()) throw InvalidInputError("f1_score_sequence: empty sequence");
  F1Report total;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    F1Report frame;
    accumulate(probs[i], truths[i], threshold, &frame);
    finish(&frame);
    total.true_pos += frame.true_pos;
    total.false_pos += frame.false_pos;
    total.false_neg += frame.false_neg;
    total.per_frame_f1.push_back(frame.f1);
  }
  finish(&total);
  return total;
}

}  // namespace gestboot
