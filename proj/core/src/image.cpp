#include "gestboot/image.hpp"

#include <algorithm>
#include <cmath>

#include "gestboot/error.hpp"

namespace gestboot {

ImageBuffer::ImageBuffer(int h, int w, int c, float fill)
    : height(h), width(w), channels(c) {
  if (h < 1 || w < 1 || c < 1) {
    throw InvalidInputError("ImageBuffer dims must be positive, got " + std::to_string(h) +
                            "x" + std::to_string(w) + "x" + std::to_string(c));
  }
  data.assign(static_cast<std::size_t>(h) * w * c, fill);
}

void ImageBuffer::validate() const {
  if (height < 1 || width < 1 || channels < 1) {
    throw InvalidInputError("ImageBuffer has degenerate dims");
  }
  if (data.size() != size()) {
    throw InvalidInputError("ImageBuffer data length does not match dims");
  }
}

ImageBuffer rgb_to_hsv(const ImageBuffer& img) {
  if (img.channels != 3) {
    throw InvalidInputError("rgb_to_hsv expects 3 channels, got " +
                            std::to_string(img.channels));
  }
  ImageBuffer out(img.height, img.width, 3);
  const std::size_t n = img.plane_size();
  const float* r = img.plane(0);
  const float* g = img.plane(1);
  const float* b = img.plane(2);
  float* h = out.plane(0);
  float* s = out.plane(1);
  float* v = out.plane(2);
  for (std::size_t i = 0; i < n; ++i) {
    const float maxc = std::max({r[i], g[i], b[i]});
    const float minc = std::min({r[i], g[i], b[i]});
    const float delta = maxc - minc;
    v[i] = maxc;
    s[i] = maxc > 0.0f ? delta / maxc : 0.0f;
    if (delta <= 0.0f) {
      h[i] = 0.0f;
      continue;
    }
    float hue;  // in sixths of a turn
    if (maxc == r[i]) {
      hue = (g[i] - b[i]) / delta;
      if (hue < 0.0f) hue += 6.0f;
    } else if (maxc == g[i]) {
      hue = 2.0f + (b[i] - r[i]) / delta;
    } else {
      hue = 4.0f + (r[i] - g[i]) / delta;
    }
    hue /= 6.0f;
    if (hue >= 1.0f) hue -= 1.0f;
    h[i] = hue;
  }
  return out;
}

ImageBuffer hsv_to_rgb(const ImageBuffer& img) {
  if (img.channels != 3) {
    throw InvalidInputError("hsv_to_rgb expects 3 channels, got " +
                            std::to_string(img.channels));
  }
  ImageBuffer out(img.height, img.width, 3);
  const std::size_t n = img.plane_size();
  const float* h = img.plane(0);
  const float* s = img.plane(1);
  const float* v = img.plane(2);
  float* r = out.plane(0);
  float* g = out.plane(1);
  float* b = out.plane(2);
  for (std::size_t i = 0; i < n; ++i) {
    const float hue = h[i] * 6.0f;
    const int sector = std::min(5, static_cast<int>(hue));
    const float f = hue - sector;
    const float p = v[i] * (1.0f - s[i]);
    const float q = v[i] * (1.0f - s[i] * f);
    const float t = v[i] * (1.0f - s[i] * (1.0f - f));
    switch (sector) {
      case 0: r[i] = v[i]; g[i] = t; b[i] = p; break;
      case 1: r[i] = q; g[i] = v[i]; b[i] = p; break;
      case 2: r[i] = p; g[i] = v[i]; b[i] = t; break;
      case 3: r[i] = p; g[i] = q; b[i] = v[i]; break;
      case 4: r[i] = t; g[i] = p; b[i] = v[i]; break;
      default: r[i] = v[i]; g[i] = p; b[i] = q; break;
    }
  }
  return out;
}

ImageBuffer rgb_to_gray(const ImageBuffer& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3) {
    throw InvalidInputError("rgb_to_gray expects 1 or 3 channels");
  }
  ImageBuffer out(img.height, img.width, 1);
  const std::size_t n = img.plane_size();
  const float* r = img.plane(0);
  const float* g = img.plane(1);
  const float* b = img.plane(2);
  for (std::size_t i = 0; i < n; ++i) {
    out.data[i] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
  }
  return out;
}

namespace {

// Bilinear fetch at continuous pixel-index coordinates with clamped borders.
float sample_clamped(const float* plane, int h, int w, float y, float x) {
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const float fy = y - y0;
  const float fx = x - x0;
  const auto cl = [](int v, int hi) { return std::clamp(v, 0, hi); };
  const int ya = cl(y0, h - 1), yb = cl(y0 + 1, h - 1);
  const int xa = cl(x0, w - 1), xb = cl(x0 + 1, w - 1);
  const float v00 = plane[static_cast<std::size_t>(ya) * w + xa];
  const float v01 = plane[static_cast<std::size_t>(ya) * w + xb];
  const float v10 = plane[static_cast<std::size_t>(yb) * w + xa];
  const float v11 = plane[static_cast<std::size_t>(yb) * w + xb];
  const float top = v00 + fx * (v01 - v00);
  const float bot = v10 + fx * (v11 - v10);
  return top + fy * (bot - top);
}

ImageBuffer resize_impl(const ImageBuffer& img, int new_h, int new_w, Sampling sampling) {
  img.validate();
  if (new_h < 1 || new_w < 1) {
    throw InvalidInputError("resize target must be at least 1x1");
  }
  if (new_h == img.height && new_w == img.width) return img;
  ImageBuffer out(new_h, new_w, img.channels);
  const float sy = static_cast<float>(img.height) / new_h;
  const float sx = static_cast<float>(img.width) / new_w;
  for (int c = 0; c < img.channels; ++c) {
    const float* src = img.plane(c);
    float* dst = out.plane(c);
    for (int y = 0; y < new_h; ++y) {
      const float srcy = (y + 0.5f) * sy - 0.5f;
      for (int x = 0; x < new_w; ++x) {
        const float srcx = (x + 0.5f) * sx - 0.5f;
        float v;
        if (sampling == Sampling::kBilinear) {
          v = sample_clamped(src, img.height, img.width, srcy, srcx);
        } else {
          const int iy = std::clamp(static_cast<int>(std::lround(srcy)), 0, img.height - 1);
          const int ix = std::clamp(static_cast<int>(std::lround(srcx)), 0, img.width - 1);
          v = src[static_cast<std::size_t>(iy) * img.width + ix];
        }
        dst[static_cast<std::size_t>(y) * new_w + x] = v;
      }
    }
  }
  return out;
}

}  // namespace

ImageBuffer resize_bilinear(const ImageBuffer& img, int new_h, int new_w) {
  return resize_impl(img, new_h, new_w, Sampling::kBilinear);
}

ImageBuffer resize_nearest(const ImageBuffer& img, int new_h, int new_w) {
  return resize_impl(img, new_h, new_w, Sampling::kNearest);
}

ImageBuffer crop(const ImageBuffer& img, int top, int left, int h, int w) {
  img.validate();
  if (h < 1 || w < 1 || top < 0 || left < 0 || top + h > img.height || left + w > img.width) {
    throw InvalidInputError("crop window out of bounds");
  }
  ImageBuffer out(h, w, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    const float* src = img.plane(c);
    float* dst = out.plane(c);
    for (int y = 0; y < h; ++y) {
      const float* row = src + static_cast<std::size_t>(top + y) * img.width + left;
      std::copy(row, row + w, dst + static_cast<std::size_t>(y) * w);
    }
  }
  return out;
}

ImageBuffer rotate_about_center(const ImageBuffer& img, float degrees, float fill,
                                Sampling sampling) {
  img.validate();
  if (!std::isfinite(degrees)) {
    throw InvalidInputError("rotation angle must be finite");
  }
  const double rad = degrees * (3.14159265358979323846 / 180.0);
  const double cs = std::cos(rad);
  const double sn = std::sin(rad);
  // Pixel centers live at (y + 0.5, x + 0.5); the pivot is the image center.
  const double cy = img.height * 0.5;
  const double cx = img.width * 0.5;
  ImageBuffer out(img.height, img.width, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    const float* src = img.plane(c);
    float* dst = out.plane(c);
    for (int y = 0; y < img.height; ++y) {
      const double dy = (y + 0.5) - cy;
      for (int x = 0; x < img.width; ++x) {
        const double dx = (x + 0.5) - cx;
        // Inverse map: rotate the output grid backwards into the source.
        const double sxc = cs * dx + sn * dy + cx;
        const double syc = -sn * dx + cs * dy + cy;
        const float sy = static_cast<float>(syc - 0.5);
        const float sx = static_cast<float>(sxc - 0.5);
        float v;
        if (sy < -0.5f || sy > img.height - 0.5f || sx < -0.5f || sx > img.width - 0.5f) {
          v = fill;
        } else if (sampling == Sampling::kBilinear) {
          v = sample_clamped(src, img.height, img.width, sy, sx);
        } else {
          const int iy = std::clamp(static_cast<int>(std::lround(sy)), 0, img.height - 1);
          const int ix = std::clamp(static_cast<int>(std::lround(sx)), 0, img.width - 1);
          v = src[static_cast<std::size_t>(iy) * img.width + ix];
        }
        dst[static_cast<std::size_t>(y) * img.width + x] = v;
      }
    }
  }
  return out;
}

ImageBuffer hflip(const ImageBuffer& img) {
  img.validate();
  ImageBuffer out(img.height, img.width, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    const float* src = img.plane(c);
    float* dst = out.plane(c);
    for (int y = 0; y < img.height; ++y) {
      const float* srow = src + static_cast<std::size_t>(y) * img.width;
      float* drow = dst + static_cast<std::size_t>(y) * img.width;
      for (int x = 0; x < img.width; ++x) {
        drow[x] = srow[img.width - 1 - x];
      }
    }
  }
  return out;
}

}  // namespace gestboot
