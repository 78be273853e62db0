#include <algorithm>
#include <cmath>
#include <vector>

#include "gestboot/error.hpp"
#include "gestboot/motion.hpp"

// Dual TV-L1 optical flow in the Zach-Pock-Bischof formulation: coarse-to-fine
// pyramid, per-level warping of the second image, and an inner primal-dual
// loop alternating a pointwise thresholding step on the data term with a
// fixed-point update of the dual variable of the TV term.

namespace gestboot {

void TvL1Params::validate() const {
  if (lambda <= 0.0f) throw InvalidInputError("tvl1: lambda must be > 0");
  if (epsilon <= 0.0f) throw InvalidInputError("tvl1: epsilon must be > 0");
  if (max_iters < 1) throw InvalidInputError("tvl1: max_iters must be >= 1");
  if (pyramid_levels < 1) throw InvalidInputError("tvl1: pyramid_levels must be >= 1");
  if (pyramid_scale <= 0.0f || pyramid_scale >= 1.0f) {
    throw InvalidInputError("tvl1: pyramid_scale must be in (0,1)");
  }
  if (warps_per_level < 1) throw InvalidInputError("tvl1: warps_per_level must be >= 1");
  if (theta <= 0.0f || tau > 0.125f || tau <= 0.0f) {
    throw InvalidInputError("tvl1: need 0 < tau <= 0.125 and theta > 0");
  }
}

namespace {

struct Plane {
  int h = 0, w = 0;
  std::vector<float> v;
  Plane() = default;
  Plane(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0.0f) {}
  float* data() { return v.data(); }
  const float* data() const { return v.data(); }
  std::size_t size() const { return v.size(); }
  float& operator[](std::size_t i) { return v[i]; }
  float operator[](std::size_t i) const { return v[i]; }
};

// Separable gaussian blur with reflected borders.
void gaussian_blur(Plane& img, float sigma) {
  if (sigma <= 0.0f) return;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0f * sigma)));
  std::vector<float> kernel(2 * radius + 1);
  float sum = 0.0f;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5f * i * i / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (float& k : kernel) k /= sum;

  const int h = img.h, w = img.w;
  const auto reflect = [](int i, int n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
    return std::clamp(i, 0, n - 1);
  };
  std::vector<float> tmp(img.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * img.v[static_cast<std::size_t>(y) * w + reflect(x + k, w)];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[k + radius] * tmp[static_cast<std::size_t>(reflect(y + k, h)) * w + x];
      }
      img.v[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
}

float sample_bilinear(const Plane& p, float y, float x) {
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const float fy = y - y0;
  const float fx = x - x0;
  const auto cl = [](int v, int hi) { return std::clamp(v, 0, hi); };
  const int ya = cl(y0, p.h - 1), yb = cl(y0 + 1, p.h - 1);
  const int xa = cl(x0, p.w - 1), xb = cl(x0 + 1, p.w - 1);
  const float v00 = p.v[static_cast<std::size_t>(ya) * p.w + xa];
  const float v01 = p.v[static_cast<std::size_t>(ya) * p.w + xb];
  const float v10 = p.v[static_cast<std::size_t>(yb) * p.w + xa];
  const float v11 = p.v[static_cast<std::size_t>(yb) * p.w + xb];
  const float top = v00 + fx * (v01 - v00);
  const float bot = v10 + fx * (v11 - v10);
  return top + fy * (bot - top);
}

// Half-pixel-center bilinear resample, same convention as imagecore.
Plane resample(const Plane& src, int nh, int nw) {
  Plane out(nh, nw);
  const float sy = static_cast<float>(src.h) / nh;
  const float sx = static_cast<float>(src.w) / nw;
  for (int y = 0; y < nh; ++y) {
    const float srcy = (y + 0.5f) * sy - 0.5f;
    for (int x = 0; x < nw; ++x) {
      out.v[static_cast<std::size_t>(y) * nw + x] =
          sample_bilinear(src, srcy, (x + 0.5f) * sx - 0.5f);
    }
  }
  return out;
}

// Antialiased downscale: blur proportional to the zoom, then resample.
Plane zoom_out(const Plane& src, float scale, int nh, int nw) {
  Plane tmp = src;
  const float sigma = 0.6f * std::sqrt(1.0f / (scale * scale) - 1.0f);
  gaussian_blur(tmp, sigma);
  return resample(tmp, nh, nw);
}

// Warp I by the current flow: out(x) = I(x + u(x)), clamped at borders.
void warp(const Plane& img, const std::vector<float>& u, const std::vector<float>& v,
          Plane& out) {
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * img.w + x;
      out.v[i] = sample_bilinear(img, y + v[i], x + u[i]);
    }
  }
}

// Centered differences inside, one-sided at the borders.
void centered_gradient(const Plane& img, Plane& gx, Plane& gy) {
  const int h = img.h, w = img.w;
  for (int y = 0; y < h; ++y) {
    const int yp = std::min(y + 1, h - 1);
    const int ym = std::max(y - 1, 0);
    const float wy = (yp - ym) == 2 ? 0.5f : 1.0f;
    for (int x = 0; x < w; ++x) {
      const int xp = std::min(x + 1, w - 1);
      const int xm = std::max(x - 1, 0);
      const float wx = (xp - xm) == 2 ? 0.5f : 1.0f;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      gx.v[i] = wx * (img.v[static_cast<std::size_t>(y) * w + xp] -
                      img.v[static_cast<std::size_t>(y) * w + xm]);
      gy.v[i] = wy * (img.v[static_cast<std::size_t>(yp) * w + x] -
                      img.v[static_cast<std::size_t>(ym) * w + x]);
    }
  }
}

// Forward differences with Neumann boundary (zero at the far edge).
void forward_gradient(const std::vector<float>& f, int h, int w, std::vector<float>& fx,
                      std::vector<float>& fy) {
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      fx[i] = (x < w - 1) ? f[i + 1] - f[i] : 0.0f;
      fy[i] = (y < h - 1) ? f[i + w] - f[i] : 0.0f;
    }
  }
}

// Adjoint of the forward gradient.
void divergence(const std::vector<float>& p1, const std::vector<float>& p2, int h, int w,
                std::vector<float>& div) {
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const float dx = (x == 0) ? p1[i] : (x == w - 1) ? -p1[i - 1] : p1[i] - p1[i - 1];
      const float dy = (y == 0) ? p2[i] : (y == h - 1) ? -p2[i - w] : p2[i] - p2[i - w];
      div[i] = dx + dy;
    }
  }
}

double tvl1_energy(const Plane& i0, const Plane& i1, const std::vector<float>& u,
                   const std::vector<float>& v, float lambda) {
  const int h = i0.h, w = i0.w;
  Plane warped(h, w);
  warp(i1, u, v, warped);
  std::vector<float> ux(u.size()), uy(u.size()), vx(u.size()), vy(u.size());
  forward_gradient(u, h, w, ux, uy);
  forward_gradient(v, h, w, vx, vy);
  double e = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    e += lambda * std::abs(warped.v[i] - i0.v[i]);
    e += std::hypot(ux[i], uy[i]) + std::hypot(vx[i], vy[i]);
  }
  return e;
}

// One pyramid level of the primal-dual solver. u/v carry the upsampled
// initialization in and the refined flow out. Each warp's refinement is
// accepted only if it lowers the true (non-linearized) energy; otherwise the
// previous flow is kept and remaining warps are skipped, so the logged energy
// sequence is non-increasing.
void solve_level(const Plane& i0, const Plane& i1, std::vector<float>& u, std::vector<float>& v,
                 const TvL1Params& prm, TvL1Diag* diag) {
  const int h = i0.h, w = i0.w;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  const float l_t = prm.lambda * prm.theta;
  constexpr float kGradFloor = 1e-10f;

  Plane i1x(h, w), i1y(h, w), i1w(h, w), i1wx(h, w), i1wy(h, w);
  centered_gradient(i1, i1x, i1y);

  std::vector<float> rho_c(n), grad(n), v1(n), v2(n);
  std::vector<float> p11(n, 0.0f), p12(n, 0.0f), p21(n, 0.0f), p22(n, 0.0f);
  std::vector<float> div_p(n), gx(n), gy(n);

  double e_prev = tvl1_energy(i0, i1, u, v, prm.lambda);
  if (diag) diag->energy_per_warp.push_back(e_prev);
  std::vector<float> u_keep, v_keep;

  for (int warpiter = 0; warpiter < prm.warps_per_level; ++warpiter) {
    u_keep = u;
    v_keep = v;
    warp(i1, u, v, i1w);
    warp(i1x, u, v, i1wx);
    warp(i1y, u, v, i1wy);

    for (std::size_t i = 0; i < n; ++i) {
      grad[i] = i1wx[i] * i1wx[i] + i1wy[i] * i1wy[i];
      // Constant part of the linearized residual rho(u).
      rho_c[i] = i1w.v[i] - i1wx[i] * u[i] - i1wy[i] * v[i] - i0.v[i];
    }

    for (int iter = 0; iter < prm.max_iters; ++iter) {
      // Data step: pointwise shrinkage of the linearized residual.
      for (std::size_t i = 0; i < n; ++i) {
        const float rho = rho_c[i] + i1wx[i] * u[i] + i1wy[i] * v[i];
        float d1, d2;
        if (rho < -l_t * grad[i]) {
          d1 = l_t * i1wx[i];
          d2 = l_t * i1wy[i];
        } else if (rho > l_t * grad[i]) {
          d1 = -l_t * i1wx[i];
          d2 = -l_t * i1wy[i];
        } else if (grad[i] < kGradFloor) {
          d1 = d2 = 0.0f;
        } else {
          const float fi = -rho / grad[i];
          d1 = fi * i1wx[i];
          d2 = fi * i1wy[i];
        }
        v1[i] = u[i] + d1;
        v2[i] = v[i] + d2;
      }

      // TV step: u = v + theta * div(p), then dual ascent on p.
      double update = 0.0;
      divergence(p11, p12, h, w, div_p);
      for (std::size_t i = 0; i < n; ++i) {
        const float prev = u[i];
        u[i] = v1[i] + prm.theta * div_p[i];
        update += std::abs(u[i] - prev);
      }
      divergence(p21, p22, h, w, div_p);
      for (std::size_t i = 0; i < n; ++i) {
        const float prev = v[i];
        v[i] = v2[i] + prm.theta * div_p[i];
        update += std::abs(v[i] - prev);
      }

      const float taut = prm.tau / prm.theta;
      forward_gradient(u, h, w, gx, gy);
      for (std::size_t i = 0; i < n; ++i) {
        const float ng = 1.0f + taut * std::hypot(gx[i], gy[i]);
        p11[i] = (p11[i] + taut * gx[i]) / ng;
        p12[i] = (p12[i] + taut * gy[i]) / ng;
      }
      forward_gradient(v, h, w, gx, gy);
      for (std::size_t i = 0; i < n; ++i) {
        const float ng = 1.0f + taut * std::hypot(gx[i], gy[i]);
        p21[i] = (p21[i] + taut * gx[i]) / ng;
        p22[i] = (p22[i] + taut * gy[i]) / ng;
      }

      if (update / (2.0 * static_cast<double>(n)) < prm.epsilon) break;
    }

    const double e_new = tvl1_energy(i0, i1, u, v, prm.lambda);
    if (e_new > e_prev) {
      u = u_keep;
      v = v_keep;
      if (diag) diag->energy_per_warp.push_back(e_prev);
      break;
    }
    e_prev = e_new;
    if (diag) diag->energy_per_warp.push_back(e_new);
  }
}

}  // namespace

FlowField tvl1_flow(const ImageBuffer& prev, const ImageBuffer& next, const TvL1Params& params,
                    TvL1Diag* diag) {
  params.validate();
  prev.validate();
  next.validate();
  if (prev.channels != 1 || next.channels != 1) {
    throw InvalidInputError("tvl1_flow expects grayscale inputs");
  }
  if (prev.height != next.height || prev.width != next.width) {
    throw InvalidInputError("tvl1_flow: frame dims mismatch");
  }

  const int h = prev.height, w = prev.width;
  Plane i0(h, w), i1(h, w);
  std::copy(prev.data.begin(), prev.data.end(), i0.v.begin());
  std::copy(next.data.begin(), next.data.end(), i1.v.begin());

  // Joint normalization to [0, 255]; lambda is calibrated for that range.
  float lo = i0.v[0], hi = i0.v[0];
  for (float x : i0.v) { lo = std::min(lo, x); hi = std::max(hi, x); }
  for (float x : i1.v) { lo = std::min(lo, x); hi = std::max(hi, x); }
  if (hi > lo) {
    const float s = 255.0f / (hi - lo);
    for (float& x : i0.v) x = (x - lo) * s;
    for (float& x : i1.v) x = (x - lo) * s;
  }
  gaussian_blur(i0, 0.8f);
  gaussian_blur(i1, 0.8f);

  // Pyramid, finest first. Levels are capped so the coarsest stays >= 16 px.
  std::vector<Plane> pyr0{i0}, pyr1{i1};
  for (int lvl = 1; lvl < params.pyramid_levels; ++lvl) {
    const Plane& prev0 = pyr0.back();
    const int nh = std::max(1, static_cast<int>(std::lround(prev0.h * params.pyramid_scale)));
    const int nw = std::max(1, static_cast<int>(std::lround(prev0.w * params.pyramid_scale)));
    if (nh < 16 || nw < 16) break;
    pyr0.push_back(zoom_out(pyr0.back(), params.pyramid_scale, nh, nw));
    pyr1.push_back(zoom_out(pyr1.back(), params.pyramid_scale, nh, nw));
  }

  const int levels = static_cast<int>(pyr0.size());
  std::vector<float> u(pyr0.back().size(), 0.0f), v(pyr0.back().size(), 0.0f);
  for (int lvl = levels - 1; lvl >= 0; --lvl) {
    solve_level(pyr0[lvl], pyr1[lvl], u, v, params, lvl == 0 ? diag : nullptr);
    if (lvl == 0) break;
    // Upsample the flow to the next finer level and rescale the displacements.
    const Plane& fine = pyr0[lvl - 1];
    Plane cu(pyr0[lvl].h, pyr0[lvl].w), cv(pyr0[lvl].h, pyr0[lvl].w);
    cu.v = u;
    cv.v = v;
    Plane fu = resample(cu, fine.h, fine.w);
    Plane fv = resample(cv, fine.h, fine.w);
    const float rx = static_cast<float>(fine.w) / pyr0[lvl].w;
    const float ry = static_cast<float>(fine.h) / pyr0[lvl].h;
    u = std::move(fu.v);
    v = std::move(fv.v);
    for (float& x : u) x *= rx;
    for (float& x : v) x *= ry;
  }

  FlowField flow(h, w);
  flow.u = std::move(u);
  flow.v = std::move(v);
  return flow;
}

}  // namespace gestboot
