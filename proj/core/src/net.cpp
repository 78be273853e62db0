#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include <Eigen/Dense>

#include "gestboot/error.hpp"
#include "gestboot/net.hpp"

namespace gestboot {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;

struct Shape {
  int c = 0, h = 0, w = 0;
};

int conv_out_dim(int n, int kernel, int stride, int pad) {
  const int span = n + 2 * pad - kernel;
  if (span < 0) throw InvalidInputError("conv: kernel larger than padded input");
  return span / stride + 1;
}

// Output shape of every layer given the input shape; validates composition.
std::vector<Shape> walk_shapes(const NetSpec& spec, Shape in) {
  std::vector<Shape> shapes;
  shapes.reserve(spec.layers.size());
  Shape cur = in;
  for (const LayerSpec& layer : spec.layers) {
    switch (layer.kind) {
      case LayerKind::kConv:
        cur = Shape{layer.out_channels, conv_out_dim(cur.h, layer.kernel, layer.stride, layer.pad),
                    conv_out_dim(cur.w, layer.kernel, layer.stride, layer.pad)};
        break;
      case LayerKind::kRelu:
      case LayerKind::kDropout:
        break;
      case LayerKind::kUpsample:
        cur = Shape{cur.c, in.h, in.w};
        break;
    }
    if (cur.h < 1 || cur.w < 1 || cur.c < 1) {
      throw InvalidInputError("net: layer '" + layer.name + "' collapses the activation");
    }
    shapes.push_back(cur);
  }
  return shapes;
}

// colmat is (in_ch*k*k) x (oh*ow), row-major; row index = (ic*k + ky)*k + kx.
template <typename T>
void im2col(const Tensor3<T>& in, int kernel, int stride, int pad, int oh, int ow,
            std::vector<T>& colmat) {
  const std::size_t cols = static_cast<std::size_t>(oh) * ow;
  colmat.assign(static_cast<std::size_t>(in.channels) * kernel * kernel * cols, T(0));
  for (int ic = 0; ic < in.channels; ++ic) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        T* row = colmat.data() + ((static_cast<std::size_t>(ic) * kernel + ky) * kernel + kx) * cols;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= in.height) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= in.width) continue;
            row[static_cast<std::size_t>(oy) * ow + ox] = in.at(ic, iy, ix);
          }
        }
      }
    }
  }
}

template <typename T>
Tensor3<T> conv_forward(const Tensor3<T>& in, const ConvParam<T>& prm, int stride, int pad) {
  const int oh = conv_out_dim(in.height, prm.kernel, stride, pad);
  const int ow = conv_out_dim(in.width, prm.kernel, stride, pad);
  Tensor3<T> out(prm.out_channels, oh, ow);
  const std::size_t cols = out.plane_size();
  const int ick2 = prm.in_channels * prm.kernel * prm.kernel;

  std::vector<T> colmat;
  im2col(in, prm.kernel, stride, pad, oh, ow, colmat);
  CMapRM<T> wmat(prm.w.data(), prm.out_channels, ick2);
  CMapRM<T> cmat(colmat.data(), ick2, static_cast<Eigen::Index>(cols));
  MapRM<T> omat(out.data.data(), prm.out_channels, static_cast<Eigen::Index>(cols));
  omat.noalias() = wmat * cmat;
  for (int oc = 0; oc < prm.out_channels; ++oc) omat.row(oc).array() += prm.b[oc];
  return out;
}

// Gradients w.r.t. weights, bias and input for one conv layer.
template <typename T>
void conv_backward(const Tensor3<T>& in, const ConvParam<T>& prm, int stride, int pad,
                   const Tensor3<T>& grad_out, ConvParam<T>& grad_prm, Tensor3<T>& grad_in) {
  const int oh = grad_out.height, ow = grad_out.width;
  const std::size_t cols = grad_out.plane_size();
  const int ick2 = prm.in_channels * prm.kernel * prm.kernel;

  std::vector<T> colmat;
  im2col(in, prm.kernel, stride, pad, oh, ow, colmat);

  grad_prm.out_channels = prm.out_channels;
  grad_prm.in_channels = prm.in_channels;
  grad_prm.kernel = prm.kernel;
  grad_prm.w.assign(prm.w.size(), T(0));
  grad_prm.b.assign(prm.b.size(), T(0));

  CMapRM<T> gout(grad_out.data.data(), prm.out_channels, static_cast<Eigen::Index>(cols));
  CMapRM<T> cmat(colmat.data(), ick2, static_cast<Eigen::Index>(cols));
  MapRM<T> gw(grad_prm.w.data(), prm.out_channels, ick2);
  gw.noalias() = gout * cmat.transpose();
  for (int oc = 0; oc < prm.out_channels; ++oc) grad_prm.b[oc] = gout.row(oc).sum();

  // grad_col = W^T * grad_out, then scatter-add back onto the input grid.
  MatRM<T> gcol(ick2, static_cast<Eigen::Index>(cols));
  CMapRM<T> wmat(prm.w.data(), prm.out_channels, ick2);
  gcol.noalias() = wmat.transpose() * gout;

  grad_in = Tensor3<T>(in.channels, in.height, in.width);
  for (int ic = 0; ic < in.channels; ++ic) {
    for (int ky = 0; ky < prm.kernel; ++ky) {
      for (int kx = 0; kx < prm.kernel; ++kx) {
        const T* row = gcol.data() + ((static_cast<std::size_t>(ic) * prm.kernel + ky) * prm.kernel + kx) * cols;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= in.height) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= in.width) continue;
            grad_in.at(ic, iy, ix) += row[static_cast<std::size_t>(oy) * ow + ox];
          }
        }
      }
    }
  }
}

// Bilinear resize with half-pixel centers and clamped sampling.
template <typename T>
Tensor3<T> upsample_forward(const Tensor3<T>& in, int oh, int ow) {
  if (in.height == oh && in.width == ow) return in;
  Tensor3<T> out(in.channels, oh, ow);
  const double sy = static_cast<double>(in.height) / oh;
  const double sx = static_cast<double>(in.width) / ow;
  for (int y = 0; y < oh; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    const int y0 = static_cast<int>(std::floor(fy));
    const T wy = static_cast<T>(fy - y0);
    const int ya = std::clamp(y0, 0, in.height - 1);
    const int yb = std::clamp(y0 + 1, 0, in.height - 1);
    for (int x = 0; x < ow; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      const int x0 = static_cast<int>(std::floor(fx));
      const T wx = static_cast<T>(fx - x0);
      const int xa = std::clamp(x0, 0, in.width - 1);
      const int xb = std::clamp(x0 + 1, 0, in.width - 1);
      for (int c = 0; c < in.channels; ++c) {
        const T top = in.at(c, ya, xa) + wx * (in.at(c, ya, xb) - in.at(c, ya, xa));
        const T bot = in.at(c, yb, xa) + wx * (in.at(c, yb, xb) - in.at(c, yb, xa));
        out.at(c, y, x) = top + wy * (bot - top);
      }
    }
  }
  return out;
}

// Exact adjoint of upsample_forward: distribute each output gradient onto the
// four (clamped) source pixels with the interpolation weights.
template <typename T>
Tensor3<T> upsample_backward(const Tensor3<T>& grad_out, int ih, int iw) {
  if (grad_out.height == ih && grad_out.width == iw) return grad_out;
  Tensor3<T> grad_in(grad_out.channels, ih, iw);
  const double sy = static_cast<double>(ih) / grad_out.height;
  const double sx = static_cast<double>(iw) / grad_out.width;
  for (int y = 0; y < grad_out.height; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    const int y0 = static_cast<int>(std::floor(fy));
    const T wy = static_cast<T>(fy - y0);
    const int ya = std::clamp(y0, 0, ih - 1);
    const int yb = std::clamp(y0 + 1, 0, ih - 1);
    for (int x = 0; x < grad_out.width; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      const int x0 = static_cast<int>(std::floor(fx));
      const T wx = static_cast<T>(fx - x0);
      const int xa = std::clamp(x0, 0, iw - 1);
      const int xb = std::clamp(x0 + 1, 0, iw - 1);
      for (int c = 0; c < grad_out.channels; ++c) {
        const T g = grad_out.at(c, y, x);
        grad_in.at(c, ya, xa) += (T(1) - wy) * (T(1) - wx) * g;
        grad_in.at(c, ya, xb) += (T(1) - wy) * wx * g;
        grad_in.at(c, yb, xa) += wy * (T(1) - wx) * g;
        grad_in.at(c, yb, xb) += wy * wx * g;
      }
    }
  }
  return grad_in;
}

template <typename T>
T stable_sigmoid(T x, T alpha) {
  const T ax = alpha * x;
  if (ax >= T(0)) return T(1) / (T(1) + std::exp(-ax));
  const T e = std::exp(ax);
  return e / (T(1) + e);
}

}  // namespace

int NetSpec::output_channels() const {
  int c = input_channels;
  for (const LayerSpec& layer : layers) {
    if (layer.kind == LayerKind::kConv) c = layer.out_channels;
  }
  return c;
}

void NetSpec::validate() const {
  if (input_channels < 1) throw InvalidInputError("net: input_channels must be >= 1");
  if (layers.empty()) throw InvalidInputError("net: no layers");
  std::set<std::string> conv_names;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& layer = layers[i];
    switch (layer.kind) {
      case LayerKind::kConv:
        if (layer.out_channels < 1 || layer.kernel < 1 || layer.stride < 1 || layer.pad < 0) {
          throw InvalidInputError("net: bad conv geometry in '" + layer.name + "'");
        }
        if (layer.name.empty() || !conv_names.insert(layer.name).second) {
          throw InvalidInputError("net: conv layers need unique names");
        }
        break;
      case LayerKind::kDropout:
        if (layer.ratio < 0.0f || layer.ratio >= 1.0f) {
          throw InvalidInputError("net: dropout ratio must be in [0,1)");
        }
        break;
      case LayerKind::kUpsample:
        if (layer.factor < 1) throw InvalidInputError("net: upsample factor must be >= 1");
        if (i + 1 != layers.size()) {
          throw InvalidInputError("net: upsample must be the final layer");
        }
        break;
      case LayerKind::kRelu:
        break;
    }
  }
  // Composition against a representative input; rejects nets that collapse.
  walk_shapes(*this, Shape{input_channels, 64, 64});
}

NetSpec make_toy_net(int input_channels, int output_channels,
                     const std::vector<std::string>& dropout_after, float dropout_ratio) {
  const std::set<std::string> want(dropout_after.begin(), dropout_after.end());
  const std::set<std::string> known{"conv1", "conv2", "conv3", "conv4", "conv5", "fc6", "fc7"};
  for (const std::string& name : want) {
    if (!known.count(name)) throw InvalidInputError("make_toy_net: unknown placement '" + name + "'");
  }

  NetSpec spec;
  spec.input_channels = input_channels;
  auto conv = [](std::string name, int oc, int k, int s, int p) {
    LayerSpec l;
    l.kind = LayerKind::kConv;
    l.name = std::move(name);
    l.out_channels = oc;
    l.kernel = k;
    l.stride = s;
    l.pad = p;
    return l;
  };
  auto relu = [] {
    LayerSpec l;
    l.kind = LayerKind::kRelu;
    return l;
  };
  auto maybe_drop = [&](const std::string& after) {
    std::vector<LayerSpec> out;
    if (want.count(after) && dropout_ratio > 0.0f) {
      LayerSpec l;
      l.kind = LayerKind::kDropout;
      l.name = "drop@" + after;
      l.ratio = dropout_ratio;
      out.push_back(l);
    }
    return out;
  };

  auto push = [&spec](const std::vector<LayerSpec>& ls) {
    for (const LayerSpec& l : ls) spec.layers.push_back(l);
  };
  spec.layers.push_back(conv("conv1", 16, 3, 1, 1));
  spec.layers.push_back(relu());
  push(maybe_drop("conv1"));
  spec.layers.push_back(conv("conv2", 32, 3, 2, 1));
  spec.layers.push_back(relu());
  push(maybe_drop("conv2"));
  spec.layers.push_back(conv("conv3", 32, 3, 1, 1));
  spec.layers.push_back(relu());
  push(maybe_drop("conv3"));
  spec.layers.push_back(conv("conv4", 64, 3, 2, 1));
  spec.layers.push_back(relu());
  push(maybe_drop("conv4"));
  spec.layers.push_back(conv("conv5", 64, 3, 1, 1));
  spec.layers.push_back(relu());
  push(maybe_drop("conv5"));
  spec.layers.push_back(conv("fc6", 64, 1, 1, 0));
  spec.layers.push_back(relu());
  push(maybe_drop("fc6"));
  spec.layers.push_back(conv("fc7", output_channels, 1, 1, 0));
  push(maybe_drop("fc7"));
  LayerSpec up;
  up.kind = LayerKind::kUpsample;
  up.factor = 4;
  spec.layers.push_back(up);
  spec.validate();
  return spec;
}

TensorF tensor_from_image(const ImageBuffer& img) {
  img.validate();
  TensorF t(img.channels, img.height, img.width);
  t.data = img.data;
  return t;
}

ImageBuffer image_from_tensor(const TensorF& t) {
  ImageBuffer img(t.height, t.width, t.channels);
  img.data = t.data;
  return img;
}

TensorD widen(const TensorF& t) {
  TensorD d(t.channels, t.height, t.width);
  std::copy(t.data.begin(), t.data.end(), d.data.begin());
  return d;
}

TensorF narrow(const TensorD& t) {
  TensorF f(t.channels, t.height, t.width);
  for (std::size_t i = 0; i < t.data.size(); ++i) f.data[i] = static_cast<float>(t.data[i]);
  return f;
}

template <typename T>
NetParamsT<T> init_params(const NetSpec& spec, RngStream& rng) {
  spec.validate();
  NetParamsT<T> params;
  int in_ch = spec.input_channels;
  for (const LayerSpec& layer : spec.layers) {
    if (layer.kind != LayerKind::kConv) continue;
    ConvParam<T> p;
    p.out_channels = layer.out_channels;
    p.in_channels = in_ch;
    p.kernel = layer.kernel;
    const double fan_in = static_cast<double>(in_ch) * layer.kernel * layer.kernel;
    const double fan_out = static_cast<double>(layer.out_channels) * layer.kernel * layer.kernel;
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    p.w.resize(static_cast<std::size_t>(layer.out_channels) * in_ch * layer.kernel * layer.kernel);
    for (T& w : p.w) w = static_cast<T>(rng.uniform(-s, s));
    p.b.assign(layer.out_channels, T(0));
    params.convs.push_back(std::move(p));
    in_ch = layer.out_channels;
  }
  return params;
}

NetParamsT<double> widen_params(const NetParams& p) {
  NetParamsT<double> out;
  out.convs.reserve(p.convs.size());
  for (const ConvParam<float>& c : p.convs) {
    ConvParam<double> d;
    d.out_channels = c.out_channels;
    d.in_channels = c.in_channels;
    d.kernel = c.kernel;
    d.w.assign(c.w.begin(), c.w.end());
    d.b.assign(c.b.begin(), c.b.end());
    out.convs.push_back(std::move(d));
  }
  return out;
}

template <typename T>
Tensor3<T> net_forward(const NetSpec& spec, const NetParamsT<T>& params, const Tensor3<T>& input,
                       bool dropout_on, RngStream* rng, ForwardCache<T>* cache) {
  if (input.channels != spec.input_channels) {
    throw InvalidInputError("net_forward: input channel mismatch");
  }
  if (input.height < 1 || input.width < 1) throw InvalidInputError("net_forward: empty input");

  if (cache) {
    cache->valid = false;
    cache->input = input;
    cache->acts.clear();
    cache->drop_masks.assign(spec.layers.size(), {});
  }

  Tensor3<T> cur = input;
  std::size_t conv_idx = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    switch (layer.kind) {
      case LayerKind::kConv: {
        if (conv_idx >= params.convs.size()) {
          throw InvalidInputError("net_forward: params do not match spec");
        }
        const ConvParam<T>& prm = params.convs[conv_idx++];
        if (prm.in_channels != cur.channels || prm.out_channels != layer.out_channels ||
            prm.kernel != layer.kernel) {
          throw InvalidInputError("net_forward: conv param shape mismatch at '" + layer.name + "'");
        }
        cur = conv_forward(cur, prm, layer.stride, layer.pad);
        break;
      }
      case LayerKind::kRelu:
        for (T& v : cur.data) v = std::max(v, T(0));
        break;
      case LayerKind::kDropout:
        if (dropout_on && layer.ratio > 0.0f) {
          if (!rng) throw InvalidInputError("net_forward: dropout needs an rng");
          std::vector<uint8_t> mask(cur.size());
          const T scale = T(1) / (T(1) - static_cast<T>(layer.ratio));
          for (std::size_t j = 0; j < cur.size(); ++j) {
            mask[j] = rng->bernoulli(1.0 - layer.ratio) ? 1 : 0;
            cur.data[j] = mask[j] ? cur.data[j] * scale : T(0);
          }
          if (cache) cache->drop_masks[i] = std::move(mask);
        }
        break;
      case LayerKind::kUpsample:
        cur = upsample_forward(cur, input.height, input.width);
        break;
    }
    if (cache) cache->acts.push_back(cur);
  }
  if (conv_idx != params.convs.size()) {
    throw InvalidInputError("net_forward: params do not match spec");
  }
  if (cache) cache->valid = true;
  return cur;
}

template <typename T>
GradientsT<T> net_backward(const NetSpec& spec, const NetParamsT<T>& params,
                           const ForwardCache<T>& cache, const Tensor3<T>& grad_output) {
  if (!cache.valid || cache.acts.size() != spec.layers.size()) {
    throw InvalidInputError("net_backward: stale or mismatched forward cache");
  }
  if (!grad_output.same_dims(cache.acts.back())) {
    throw InvalidInputError("net_backward: grad_output shape mismatch");
  }

  GradientsT<T> grads;
  grads.convs.resize(params.convs.size());

  Tensor3<T> grad = grad_output;
  std::size_t conv_idx = params.convs.size();
  for (std::size_t ii = spec.layers.size(); ii-- > 0;) {
    const LayerSpec& layer = spec.layers[ii];
    const Tensor3<T>& layer_in = ii == 0 ? cache.input : cache.acts[ii - 1];
    switch (layer.kind) {
      case LayerKind::kConv: {
        --conv_idx;
        Tensor3<T> grad_in;
        conv_backward(layer_in, params.convs[conv_idx], layer.stride, layer.pad, grad,
                      grads.convs[conv_idx], grad_in);
        grad = std::move(grad_in);
        break;
      }
      case LayerKind::kRelu: {
        const Tensor3<T>& out = cache.acts[ii];
        for (std::size_t j = 0; j < grad.size(); ++j) {
          if (out.data[j] <= T(0)) grad.data[j] = T(0);
        }
        break;
      }
      case LayerKind::kDropout: {
        const std::vector<uint8_t>& mask = cache.drop_masks[ii];
        if (!mask.empty()) {
          const T scale = T(1) / (T(1) - static_cast<T>(layer.ratio));
          for (std::size_t j = 0; j < grad.size(); ++j) {
            grad.data[j] = mask[j] ? grad.data[j] * scale : T(0);
          }
        }
        break;
      }
      case LayerKind::kUpsample:
        grad = upsample_backward(grad, layer_in.height, layer_in.width);
        break;
    }
  }
  grads.input = std::move(grad);
  return grads;
}

template <typename T>
LossResult<T> weighted_softmax_loss(const Tensor3<T>& logits, const Tensor3<T>& target, T w_hand,
                                    T w_bg) {
  if (logits.channels != 2) throw InvalidInputError("weighted_softmax_loss: need 2 logit channels");
  if (target.channels != 1 || target.height != logits.height || target.width != logits.width) {
    throw InvalidInputError("weighted_softmax_loss: target dims mismatch");
  }
  const std::size_t n = logits.plane_size();
  LossResult<T> result;
  result.grad = Tensor3<T>(2, logits.height, logits.width);
  double loss = 0.0;
  const T inv_n = T(1) / static_cast<T>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T t = target.data[i];
    if (t != T(0) && t != T(1)) {
      throw InvalidInputError("weighted_softmax_loss: target must be binary");
    }
    const T l0 = logits.data[i];
    const T l1 = logits.data[n + i];
    const T m = std::max(l0, l1);
    const T e0 = std::exp(l0 - m);
    const T e1 = std::exp(l1 - m);
    const T z = e0 + e1;
    const T p0 = e0 / z;
    const T p1 = e1 / z;
    const bool hand = t == T(1);
    const T w = hand ? w_hand : w_bg;
    const T p_true = hand ? p1 : p0;
    loss += -static_cast<double>(w) * std::log(static_cast<double>(p_true));
    result.grad.data[i] = w * (p0 - (hand ? T(0) : T(1))) * inv_n;
    result.grad.data[n + i] = w * (p1 - (hand ? T(1) : T(0))) * inv_n;
  }
  result.loss = loss / static_cast<double>(n);
  return result;
}

template <typename T>
Tensor3<T> soft_sigmoid(const Tensor3<T>& x, T alpha) {
  if (!(alpha > T(0) && alpha < T(1))) {
    throw InvalidInputError("soft_sigmoid: alpha must be in (0,1)");
  }
  Tensor3<T> out(x.channels, x.height, x.width);
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = stable_sigmoid(x.data[i], alpha);
  return out;
}

template <typename T>
LossResult<T> precision_weighted_loss(const Tensor3<T>& x, const Tensor3<T>& t,
                                      const Tensor3<T>& precision, T alpha) {
  if (!(alpha > T(0) && alpha < T(1))) {
    throw InvalidInputError("precision_weighted_loss: alpha must be in (0,1)");
  }
  if (!x.same_dims(t) || !x.same_dims(precision)) {
    throw InvalidInputError("precision_weighted_loss: dims mismatch");
  }
  LossResult<T> result;
  result.grad = Tensor3<T>(x.channels, x.height, x.width);
  double loss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T p = precision.data[i];
    if (p < T(0)) throw InvalidInputError("precision_weighted_loss: negative precision");
    const T ti = t.data[i];
    if (ti < T(0) || ti > T(1)) {
      throw InvalidInputError("precision_weighted_loss: target outside [0,1]");
    }
    const T s = stable_sigmoid(x.data[i], alpha);
    const T diff = s - ti;
    loss += static_cast<double>(p) * static_cast<double>(diff) * static_cast<double>(diff);
    result.grad.data[i] = T(2) * alpha * s * (T(1) - s) * p * diff;
  }
  result.loss = loss;
  return result;
}

double PolyLrSchedule::lr(int iter) const {
  if (base_lr <= 0.0) throw InvalidInputError("poly schedule: base_lr must be > 0");
  if (max_iter < 1) throw InvalidInputError("poly schedule: max_iter must be >= 1");
  if (iter < 0 || iter >= max_iter) throw InvalidInputError("poly schedule exhausted");
  return base_lr * std::pow(1.0 - static_cast<double>(iter) / max_iter, power);
}

template <typename T>
void sgd_step(NetParamsT<T>& params, const GradientsT<T>& grads, const PolyLrSchedule& schedule,
              int iter) {
  if (params.convs.size() != grads.convs.size()) {
    throw InvalidInputError("sgd_step: gradient/param layer count mismatch");
  }
  const T lr = static_cast<T>(schedule.lr(iter));
  for (std::size_t l = 0; l < params.convs.size(); ++l) {
    ConvParam<T>& p = params.convs[l];
    const ConvParam<T>& g = grads.convs[l];
    if (p.w.size() != g.w.size() || p.b.size() != g.b.size()) {
      throw InvalidInputError("sgd_step: gradient shape mismatch");
    }
    for (std::size_t i = 0; i < p.w.size(); ++i) p.w[i] -= lr * g.w[i];
    for (std::size_t i = 0; i < p.b.size(); ++i) p.b[i] -= lr * g.b[i];
  }
}

namespace {

// One loss evaluation for the checker; dropout masks replay via rng clones.
double gc_loss(const NetSpec& spec, const NetParamsT<double>& params, const TensorD& input,
               LossKind kind, const TensorD& target, const TensorD& precision, uint64_t mask_seed,
               bool has_dropout, TensorD* grad_logits_out) {
  RngStream rng(mask_seed);
  TensorD out = net_forward<double>(spec, params, input, has_dropout, &rng, nullptr);
  switch (kind) {
    case LossKind::kSquaredError: {
      double loss = 0.0;
      if (grad_logits_out) *grad_logits_out = TensorD(out.channels, out.height, out.width);
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = out.data[i] - target.data[i];
        loss += d * d;
        if (grad_logits_out) grad_logits_out->data[i] = 2.0 * d;
      }
      return loss;
    }
    case LossKind::kWeightedSoftmax: {
      LossResult<double> r = weighted_softmax_loss<double>(out, target, 5.0, 0.6);
      if (grad_logits_out) *grad_logits_out = std::move(r.grad);
      return r.loss;
    }
    case LossKind::kPrecisionWeighted: {
      LossResult<double> r = precision_weighted_loss<double>(out, target, precision, 0.5);
      if (grad_logits_out) *grad_logits_out = std::move(r.grad);
      return r.loss;
    }
  }
  throw InvalidInputError("grad_check: unknown loss kind");
}

}  // namespace

GradCheckReport grad_check(const NetSpec& spec, LossKind kind, double tolerance, RngStream& rng,
                           int input_h, int input_w, double fd_step) {
  spec.validate();
  NetParamsT<double> params = init_params<double>(spec, rng);
  TensorD input(spec.input_channels, input_h, input_w);
  for (double& v : input.data) v = rng.uniform(0.0, 1.0);

  bool has_dropout = false;
  for (const LayerSpec& l : spec.layers) {
    if (l.kind == LayerKind::kDropout && l.ratio > 0.0f) has_dropout = true;
  }
  const uint64_t mask_seed = rng.next_u64();

  // Probe output shape, then build loss targets.
  {
    RngStream probe(mask_seed);
    (void)net_forward<double>(spec, params, input, has_dropout, &probe, nullptr);
  }
  const int out_ch = spec.output_channels();
  TensorD target(kind == LossKind::kWeightedSoftmax ? 1 : out_ch, input_h, input_w);
  TensorD precision;
  if (kind == LossKind::kWeightedSoftmax) {
    for (double& v : target.data) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  } else {
    for (double& v : target.data) v = rng.uniform(0.0, 1.0);
  }
  if (kind == LossKind::kPrecisionWeighted) {
    precision = TensorD(out_ch, input_h, input_w);
    for (double& v : precision.data) v = rng.uniform(0.5, 1.5);
  }

  // Analytic gradients.
  TensorD grad_logits;
  (void)gc_loss(spec, params, input, kind, target, precision, mask_seed, has_dropout,
                &grad_logits);
  ForwardCache<double> cache;
  {
    RngStream replay(mask_seed);
    (void)net_forward<double>(spec, params, input, has_dropout, &replay, &cache);
  }
  GradientsT<double> analytic = net_backward<double>(spec, params, cache, grad_logits);

  GradCheckReport report;
  report.tolerance = tolerance;
  const double h = fd_step;
  const auto rel_err = [](double a, double f) {
    return std::abs(a - f) / std::max(std::abs(a) + std::abs(f), 1e-3);
  };
  const auto fd_at = [&](double* slot) {
    const double saved = *slot;
    *slot = saved + h;
    const double lp =
        gc_loss(spec, params, input, kind, target, precision, mask_seed, has_dropout, nullptr);
    *slot = saved - h;
    const double lm =
        gc_loss(spec, params, input, kind, target, precision, mask_seed, has_dropout, nullptr);
    *slot = saved;
    return (lp - lm) / (2.0 * h);
  };

  for (std::size_t l = 0; l < params.convs.size(); ++l) {
    for (std::size_t i = 0; i < params.convs[l].w.size(); ++i) {
      const double fd = fd_at(&params.convs[l].w[i]);
      report.max_rel_error = std::max(report.max_rel_error, rel_err(analytic.convs[l].w[i], fd));
    }
    for (std::size_t i = 0; i < params.convs[l].b.size(); ++i) {
      const double fd = fd_at(&params.convs[l].b[i]);
      report.max_rel_error = std::max(report.max_rel_error, rel_err(analytic.convs[l].b[i], fd));
    }
  }
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double fd = fd_at(&input.data[i]);
    report.max_rel_error = std::max(report.max_rel_error, rel_err(analytic.input.data[i], fd));
  }

  report.pass = report.max_rel_error < tolerance;
  return report;
}

template struct Tensor3<float>;
template struct Tensor3<double>;
template struct ConvParam<float>;
template struct ConvParam<double>;
template struct NetParamsT<float>;
template struct NetParamsT<double>;
template struct ForwardCache<float>;
template struct ForwardCache<double>;
template struct GradientsT<float>;
template struct GradientsT<double>;

template NetParamsT<float> init_params<float>(const NetSpec&, RngStream&);
template NetParamsT<double> init_params<double>(const NetSpec&, RngStream&);
template Tensor3<float> net_forward<float>(const NetSpec&, const NetParamsT<float>&,
                                           const Tensor3<float>&, bool, RngStream*,
                                           ForwardCache<float>*);
template Tensor3<double> net_forward<double>(const NetSpec&, const NetParamsT<double>&,
                                             const Tensor3<double>&, bool, RngStream*,
                                             ForwardCache<double>*);
template GradientsT<float> net_backward<float>(const NetSpec&, const NetParamsT<float>&,
                                               const ForwardCache<float>&, const Tensor3<float>&);
template GradientsT<double> net_backward<double>(const NetSpec&, const NetParamsT<double>&,
                                                 const ForwardCache<double>&,
                                                 const Tensor3<double>&);
template LossResult<float> weighted_softmax_loss<float>(const Tensor3<float>&,
                                                        const Tensor3<float>&, float, float);
template LossResult<double> weighted_softmax_loss<double>(const Tensor3<double>&,
                                                          const Tensor3<double>&, double, double);
template Tensor3<float> soft_sigmoid<float>(const Tensor3<float>&, float);
template Tensor3<double> soft_sigmoid<double>(const Tensor3<double>&, double);
template LossResult<float> precision_weighted_loss<float>(const Tensor3<float>&,
                                                          const Tensor3<float>&,
                                                          const Tensor3<float>&, float);
template LossResult<double> precision_weighted_loss<double>(const Tensor3<double>&,
                                                            const Tensor3<double>&,
                                                            const Tensor3<double>&, double);
template void sgd_step<float>(NetParamsT<float>&, const GradientsT<float>&, const PolyLrSchedule&,
                              int);
template void sgd_step<double>(NetParamsT<double>&, const GradientsT<double>&,
                               const PolyLrSchedule&, int);

}  // namespace gestboot
