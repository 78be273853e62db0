#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace gestboot {

// Planar raster: channel-major, row-major within each channel. Frames and
// probability maps keep values in [0, 1]; the same container carries logits
// and flow components, which are unbounded.
struct ImageBuffer {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  ImageBuffer() = default;
  ImageBuffer(int h, int w, int c, float fill = 0.0f);

  float& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }

  float* plane(int c) { return data.data() + static_cast<std::size_t>(c) * plane_size(); }
  const float* plane(int c) const {
    return data.data() + static_cast<std::size_t>(c) * plane_size();
  }

  std::size_t plane_size() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  std::size_t size() const { return plane_size() * channels; }

  bool same_dims(const ImageBuffer& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }

  // Throws InvalidInputError when data length does not match the dims or a
  // dimension is degenerate.
  void validate() const;
};

enum class Sampling { kBilinear, kNearest };

// H in [0, 1) (degrees / 360), S and V in [0, 1]. Input must be 3-channel RGB
// in [0, 1].
ImageBuffer rgb_to_hsv(const ImageBuffer& img);
ImageBuffer hsv_to_rgb(const ImageBuffer& img);

// Fixed luminance weights 0.299 R + 0.587 G + 0.114 B. 1-channel input passes
// through unchanged.
ImageBuffer rgb_to_gray(const ImageBuffer& img);

// Half-pixel-center sampling; identity sizes reproduce the input bitwise.
ImageBuffer resize_bilinear(const ImageBuffer& img, int new_h, int new_w);
ImageBuffer resize_nearest(const ImageBuffer& img, int new_h, int new_w);

// Window must lie inside the image.
ImageBuffer crop(const ImageBuffer& img, int top, int left, int h, int w);

// Rotates about the image center; samples that fall outside the source take
// the fill value. Nearest sampling keeps binary masks binary.
ImageBuffer rotate_about_center(const ImageBuffer& img, float degrees, float fill = 0.0f,
                                Sampling sampling = Sampling::kBilinear);

ImageBuffer hflip(const ImageBuffer& img);

// 8-bit grayscale or RGB PNG; values map to [0, 1] by /255. Masks follow the
// 0 = background, 255 = hand convention.
ImageBuffer read_png(const std::string& path);
void write_png(const ImageBuffer& img, const std::string& path);

}  // namespace gestboot
