#include <algorithm>

#include "gestboot/error.hpp"
#include "gestboot/motion.hpp"

namespace gestboot {

MotionStack build_motion_stack(const ImageBuffer& fg_prob, const FlowField& flow,
                               float flow_norm_max) {
  fg_prob.validate();
  if (fg_prob.channels != 1) {
    throw InvalidInputError("motion stack: fg_prob must be single-channel");
  }
  if (flow.height != fg_prob.height || flow.width != fg_prob.width) {
    throw InvalidInputError("motion stack: flow dims do not match fg_prob");
  }
  if (flow_norm_max <= 0.0f) {
    throw InvalidInputError("motion stack: flow_norm_max must be > 0");
  }

  MotionStack stack;
  stack.channels = ImageBuffer(fg_prob.height, fg_prob.width, 3);
  const std::size_t n = fg_prob.plane_size();
  float* prob = stack.channels.plane(0);
  float* fu = stack.channels.plane(1);
  float* fv = stack.channels.plane(2);
  for (std::size_t i = 0; i < n; ++i) {
    prob[i] = fg_prob.data[i];
    fu[i] = std::clamp(flow.u[i] / flow_norm_max, -1.0f, 1.0f) * 0.5f + 0.5f;
    fv[i] = std::clamp(flow.v[i] / flow_norm_max, -1.0f, 1.0f) * 0.5f + 0.5f;
  }
  return stack;
}

}  // namespace gestboot
