#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gestboot/image.hpp"
#include "gestboot/rng.hpp"

namespace gestboot {

// Planar channel-major tensor. Templated so the gradient checker can run the
// whole engine in double precision; training and inference use float.
template <typename T>
struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor3() = default;
  Tensor3(int c, int h, int w)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, T(0)) {}

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return data.size(); }
  T& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  T at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  bool same_dims(const Tensor3& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

using TensorF = Tensor3<float>;
using TensorD = Tensor3<double>;

TensorF tensor_from_image(const ImageBuffer& img);
ImageBuffer image_from_tensor(const TensorF& t);
TensorD widen(const TensorF& t);
TensorF narrow(const TensorD& t);

enum class LayerKind { kConv, kRelu, kDropout, kUpsample };

struct LayerSpec {
  LayerKind kind = LayerKind::kConv;
  std::string name;  // conv layers carry unique names; dropout layers "drop@<layer>"
  // conv
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int pad = 0;
  // dropout
  float ratio = 0.0f;
  // upsample (nominal factor; output is resized to the recorded input dims)
  int factor = 1;
};

struct NetSpec {
  int input_channels = 0;
  std::vector<LayerSpec> layers;

  int output_channels() const;
  void validate() const;
};

// Desk-scale segmentation net: five 3x3 conv layers (strides 1,2,1,2,1) and
// two 1x1 "fully connected" layers, relu in between, finished by a bilinear
// upsample back to input resolution. dropout_after lists layer names
// ("conv1".."conv5", "fc6", "fc7") that get an inverted-dropout layer right
// after their activation (after the raw logits in fc7's case).
NetSpec make_toy_net(int input_channels, int output_channels,
                     const std::vector<std::string>& dropout_after, float dropout_ratio);

template <typename T>
struct ConvParam {
  int out_channels = 0;
  int in_channels = 0;
  int kernel = 0;
  std::vector<T> w;  // [out][in][ky][kx]
  std::vector<T> b;  // [out]
};

template <typename T>
struct NetParamsT {
  std::vector<ConvParam<T>> convs;  // one entry per conv layer, in spec order
};

using NetParams = NetParamsT<float>;

// Glorot-uniform weights (s = sqrt(6/(fan_in+fan_out))), zero biases. Draw
// order is fixed: layers in order, weights in [out][in][ky][kx] order.
template <typename T>
NetParamsT<T> init_params(const NetSpec& spec, RngStream& rng);

NetParamsT<double> widen_params(const NetParams& p);

template <typename T>
struct ForwardCache {
  bool valid = false;
  Tensor3<T> input;
  std::vector<Tensor3<T>> acts;                  // output of each layer
  std::vector<std::vector<uint8_t>> drop_masks;  // per layer; empty unless dropout
};

// Runs the net. Logits come back at input resolution (final upsample). With
// dropout_on, each dropout layer zeroes units with probability ratio and
// scales survivors by 1/(1-ratio); rng is required in that case. cache, when
// given, is filled for a later net_backward call.
template <typename T>
Tensor3<T> net_forward(const NetSpec& spec, const NetParamsT<T>& params, const Tensor3<T>& input,
                       bool dropout_on, RngStream* rng, ForwardCache<T>* cache = nullptr);

template <typename T>
struct GradientsT {
  std::vector<ConvParam<T>> convs;  // same shapes as the parameters
  Tensor3<T> input;                 // gradient with respect to the net input
};

using Gradients = GradientsT<float>;

template <typename T>
GradientsT<T> net_backward(const NetSpec& spec, const NetParamsT<T>& params,
                           const ForwardCache<T>& cache, const Tensor3<T>& grad_output);

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor3<T> grad;  // d loss / d logits
};

// Per-pixel weighted two-class softmax cross-entropy, averaged over pixels.
// logits channel 0 = background, channel 1 = hand; target is a single-channel
// {0,1} mask; each pixel's term is scaled by w_hand or w_bg by its class.
template <typename T>
LossResult<T> weighted_softmax_loss(const Tensor3<T>& logits, const Tensor3<T>& target,
                                    T w_hand = T(5), T w_bg = T(0.6));

// Elementwise 1/(1+exp(-alpha*x)). alpha in (0,1): a flattened logistic that
// delays saturation during training.
template <typename T>
Tensor3<T> soft_sigmoid(const Tensor3<T>& x, T alpha);

// L = sum_i p_i (sigma(x_i) - t_i)^2 over a single-channel logit map with
// per-pixel precision weights p >= 0 and targets t in [0,1].
// dL/dx_i = 2 * alpha * sigma(x_i)(1-sigma(x_i)) * p_i * (sigma(x_i) - t_i).
template <typename T>
LossResult<T> precision_weighted_loss(const Tensor3<T>& x, const Tensor3<T>& t,
                                      const Tensor3<T>& precision, T alpha);

// Base rate used at full 380x1030 scale together with the unnormalized
// sum-form loss; kept as a named constant. The desk-scale default below pairs
// with mean-normalized losses at 96x128.
inline constexpr double kFullScaleBaseLr = 1e-8;

struct PolyLrSchedule {
  double base_lr = 1e-2;
  double power = 0.9;
  int max_iter = 1;

  // lr(iter) = base_lr * (1 - iter/max_iter)^power; throws once exhausted.
  double lr(int iter) const;
};

template <typename T>
void sgd_step(NetParamsT<T>& params, const GradientsT<T>& grads, const PolyLrSchedule& schedule,
              int iter);

enum class LossKind { kSquaredError, kWeightedSoftmax, kPrecisionWeighted };

struct GradCheckReport {
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Central finite-difference check of every parameter and input gradient on a
// small random net, double precision. Dropout layers, if present, replay the
// same masks across all evaluations. fd_step balances truncation against
// roundoff; for exactly-quadratic losses a larger step costs nothing and cuts
// roundoff.
GradCheckReport grad_check(const NetSpec& spec, LossKind kind, double tolerance, RngStream& rng,
                           int input_h = 8, int input_w = 10, double fd_step = 1e-6);

// Serialized network: binary tensor stream (weights and biases per conv
// layer, in order) plus a "<path>.json" manifest describing the architecture
// and tensor shapes with alphabetically ordered keys.
struct TrainedNet {
  NetSpec spec;
  NetParams params;
};

void save_net(const std::string& path, const NetSpec& spec, const NetParams& params);
TrainedNet load_net(const std::string& path);

}  // namespace gestboot
