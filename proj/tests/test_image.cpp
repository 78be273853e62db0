#include <cmath>
#include <vector>

#include "doctest.h"
#include "gestboot/error.hpp"
#include "gestboot/image.hpp"
#include "gestboot/rng.hpp"
#include "test_util.hpp"

using namespace gestboot;

TEST_CASE("image: buffer indexing is planar CHW") {
  ImageBuffer img(2, 3, 2);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i);
  // Channel plane stride is height*width; rows are contiguous.
  CHECK(img.at(0, 0, 0) == 0.0f);
  CHECK(img.at(0, 1, 2) == 5.0f);
  CHECK(img.at(1, 0, 0) == 6.0f);
  CHECK(img.at(1, 1, 1) == 10.0f);
}

TEST_CASE("image: bilinear resize matches hand-computed half-pixel oracle") {
  // 1x2 row [0,1] upsampled to 1x4. With half-pixel centers the source
  // coordinates are {-0.25, 0.25, 0.75, 1.25}; edge clamping gives
  // [0, 0.25, 0.75, 1].
  ImageBuffer src(1, 2, 1);
  src.at(0, 0, 0) = 0.0f;
  src.at(0, 0, 1) = 1.0f;
  const ImageBuffer dst = resize_bilinear(src, 1, 4);
  REQUIRE(dst.width == 4);
  CHECK(dst.at(0, 0, 0) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(dst.at(0, 0, 1) == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(dst.at(0, 0, 2) == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(dst.at(0, 0, 3) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("image: bilinear downsample averages symmetric neighbourhoods") {
  // 1x4 row [0,1,2,3] downsampled to 1x2: source coords {0.5, 2.5} ->
  // midpoints of the two halves: [0.5, 2.5].
  ImageBuffer src(1, 4, 1);
  for (int x = 0; x < 4; ++x) src.at(0, 0, x) = static_cast<float>(x);
  const ImageBuffer dst = resize_bilinear(src, 1, 2);
  CHECK(dst.at(0, 0, 0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(dst.at(0, 0, 1) == doctest::Approx(2.5).epsilon(1e-6));
}

TEST_CASE("image: same-size bilinear resize is bitwise identity") {
  RngStream rng(21);
  ImageBuffer img(13, 17, 3);
  for (float& v : img.data) v = rng.next_float();
  const ImageBuffer out = resize_bilinear(img, 13, 17);
  CHECK(out.data == img.data);
}

TEST_CASE("image: nearest resize replicates pixels on integer upscales") {
  ImageBuffer src(2, 2, 1);
  src.at(0, 0, 0) = 1.0f;
  src.at(0, 0, 1) = 2.0f;
  src.at(0, 1, 0) = 3.0f;
  src.at(0, 1, 1) = 4.0f;
  const ImageBuffer dst = resize_nearest(src, 4, 4);
  CHECK(dst.at(0, 0, 0) == 1.0f);
  CHECK(dst.at(0, 1, 1) == 1.0f);
  CHECK(dst.at(0, 0, 3) == 2.0f);
  CHECK(dst.at(0, 3, 0) == 3.0f);
  CHECK(dst.at(0, 3, 3) == 4.0f);
}

TEST_CASE("image: rgb/hsv known values and roundtrip") {
  ImageBuffer rgb(1, 3, 3);
  // Pixel 0: pure red; pixel 1: pure green; pixel 2: mid gray.
  const float vals[3][3] = {{1, 0, 0}, {0, 1, 0}, {0.5f, 0.5f, 0.5f}};
  for (int x = 0; x < 3; ++x) {
    for (int c = 0; c < 3; ++c) rgb.at(c, 0, x) = vals[x][c];
  }
  const ImageBuffer hsv = rgb_to_hsv(rgb);
  CHECK(hsv.at(0, 0, 0) == doctest::Approx(0.0).epsilon(1e-6));        // red hue
  CHECK(hsv.at(1, 0, 0) == doctest::Approx(1.0).epsilon(1e-6));        // red sat
  CHECK(hsv.at(2, 0, 0) == doctest::Approx(1.0).epsilon(1e-6));        // red val
  CHECK(hsv.at(0, 0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-5));  // green hue
  CHECK(hsv.at(1, 0, 2) == doctest::Approx(0.0).epsilon(1e-6));        // gray sat
  CHECK(hsv.at(2, 0, 2) == doctest::Approx(0.5).epsilon(1e-6));        // gray val

  RngStream rng(33);
  ImageBuffer rnd(9, 11, 3);
  for (float& v : rnd.data) v = 0.05f + 0.9f * rng.next_float();
  const ImageBuffer back = hsv_to_rgb(rgb_to_hsv(rnd));
  for (std::size_t i = 0; i < rnd.data.size(); ++i) {
    CHECK(back.data[i] == doctest::Approx(rnd.data[i]).epsilon(1e-4));
  }
}

TEST_CASE("image: grayscale uses the 0.299/0.587/0.114 weights") {
  ImageBuffer rgb(1, 1, 3);
  rgb.at(0, 0, 0) = 1.0f;
  rgb.at(1, 0, 0) = 0.0f;
  rgb.at(2, 0, 0) = 0.0f;
  CHECK(rgb_to_gray(rgb).at(0, 0, 0) == doctest::Approx(0.299).epsilon(1e-6));
  rgb.at(0, 0, 0) = 0.0f;
  rgb.at(1, 0, 0) = 1.0f;
  CHECK(rgb_to_gray(rgb).at(0, 0, 0) == doctest::Approx(0.587).epsilon(1e-6));
  rgb.at(1, 0, 0) = 0.0f;
  rgb.at(2, 0, 0) = 1.0f;
  CHECK(rgb_to_gray(rgb).at(0, 0, 0) == doctest::Approx(0.114).epsilon(1e-6));
  // Single-channel input passes through untouched.
  ImageBuffer gray(2, 2, 1);
  for (std::size_t i = 0; i < gray.data.size(); ++i) gray.data[i] = 0.25f * i;
  CHECK(rgb_to_gray(gray).data == gray.data);
}

TEST_CASE("image: crop extracts the exact window and validates bounds") {
  ImageBuffer img(5, 6, 1);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i);
  const ImageBuffer win = crop(img, 1, 2, 3, 3);
  REQUIRE(win.height == 3);
  REQUIRE(win.width == 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) {
      CHECK(win.at(0, y, x) == img.at(0, y + 1, x + 2));
    }
  }
  CHECK_THROWS_AS(crop(img, 3, 4, 3, 3), InvalidInputError);
  CHECK_THROWS_AS(crop(img, -1, 0, 2, 2), InvalidInputError);
  CHECK_THROWS_AS(crop(img, 0, 0, 0, 2), InvalidInputError);
}

TEST_CASE("image: zero-degree rotation is exact") {
  RngStream rng(8);
  ImageBuffer img(10, 12, 2);
  for (float& v : img.data) v = rng.next_float();
  const ImageBuffer rot = rotate_about_center(img, 0.0f);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    CHECK(rot.data[i] == doctest::Approx(img.data[i]).epsilon(1e-6));
  }
}

TEST_CASE("image: rotate forward then back restores the interior") {
  const ImageBuffer img = testutil::smooth_noise(33, 33, 77);
  const ImageBuffer back = rotate_about_center(rotate_about_center(img, 15.0f), -15.0f);
  // Bilinear resampling blurs slightly, so compare only well inside the
  // frame and with a loose tolerance.
  for (int y = 12; y < 21; ++y) {
    for (int x = 12; x < 21; ++x) {
      CHECK(back.at(0, y, x) == doctest::Approx(img.at(0, y, x)).epsilon(0.06));
    }
  }
}

TEST_CASE("image: nearest-neighbour rotation preserves the value set") {
  // Binary input must stay binary under label-style rotation.
  ImageBuffer mask(15, 15, 1);
  for (int y = 5; y < 10; ++y) {
    for (int x = 4; x < 11; ++x) mask.at(0, y, x) = 1.0f;
  }
  const ImageBuffer rot = rotate_about_center(mask, 30.0f, 0.0f, Sampling::kNearest);
  for (float v : rot.data) CHECK((v == 0.0f || v == 1.0f));
}

TEST_CASE("image: hflip mirrors columns and is an involution") {
  ImageBuffer img(2, 3, 1);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i);
  const ImageBuffer flipped = hflip(img);
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 3; ++x) {
      CHECK(flipped.at(0, y, x) == img.at(0, y, 2 - x));
    }
  }
  RngStream rng(55);
  ImageBuffer rnd(7, 9, 3);
  for (float& v : rnd.data) v = rng.next_float();
  CHECK(hflip(hflip(rnd)).data == rnd.data);
}

TEST_CASE("image: png roundtrip is exact for 8-bit-quantized data") {
  const auto dir = testutil::fresh_dir("png_roundtrip");
  RngStream rng(66);

  ImageBuffer gray(14, 19, 1);
  for (float& v : gray.data) v = static_cast<float>(rng.next_below(256)) / 255.0f;
  write_png(gray, (dir / "gray.png").string());
  const ImageBuffer gray_back = read_png((dir / "gray.png").string());
  REQUIRE(gray_back.channels == 1);
  REQUIRE(gray_back.height == 14);
  REQUIRE(gray_back.width == 19);
  CHECK(gray_back.data == gray.data);

  ImageBuffer rgb(9, 7, 3);
  for (float& v : rgb.data) v = static_cast<float>(rng.next_below(256)) / 255.0f;
  write_png(rgb, (dir / "rgb.png").string());
  const ImageBuffer rgb_back = read_png((dir / "rgb.png").string());
  REQUIRE(rgb_back.channels == 3);
  CHECK(rgb_back.data == rgb.data);

  // Binary masks written as {0,1} survive exactly.
  ImageBuffer mask(6, 6, 1);
  mask.at(0, 2, 3) = 1.0f;
  write_png(mask, (dir / "mask.png").string());
  CHECK(read_png((dir / "mask.png").string()).data == mask.data);
}

TEST_CASE("image: png writes are byte-stable") {
  const auto dir = testutil::fresh_dir("png_stable");
  ImageBuffer img(8, 8, 3);
  RngStream rng(101);
  for (float& v : img.data) v = rng.next_float();
  write_png(img, (dir / "a.png").string());
  write_png(img, (dir / "b.png").string());
  CHECK(testutil::file_bytes(dir / "a.png") == testutil::file_bytes(dir / "b.png"));
}

TEST_CASE("image: png reader rejects missing files") {
  CHECK_THROWS_AS(read_png("/nonexistent/definitely_missing.png"), IoError);
}
