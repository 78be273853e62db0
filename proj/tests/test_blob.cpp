#include <cstring>
#include <vector>

#include "doctest.h"
#include "gestboot/blob.hpp"
#include "gestboot/error.hpp"
#include "gestboot/rng.hpp"
#include "test_util.hpp"

using namespace gestboot;

TEST_CASE("blob: 2x3 file matches the frozen byte layout") {
  // "GBT1" + rank=2 + dims(2,3) + six float32 values, all little-endian:
  // 4 + 4 + 8 + 24 = 40 bytes, spelled out by hand below.
  TensorBlob blob;
  blob.dims = {2, 3};
  blob.payload = {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f};
  const auto dir = testutil::fresh_dir("blob_oracle");
  const std::string path = (dir / "t.gbt").string();
  write_blob(blob, path);

  const std::vector<unsigned char> expected = {
      'G',  'B',  'T',  '1',                    // magic
      0x02, 0x00, 0x00, 0x00,                   // rank
      0x02, 0x00, 0x00, 0x00,                   // dim 0
      0x03, 0x00, 0x00, 0x00,                   // dim 1
      0x00, 0x00, 0x80, 0x3F,                   // 1.0f
      0x00, 0x00, 0x00, 0x40,                   // 2.0f
      0x00, 0x00, 0x40, 0x40,                   // 3.0f
      0x00, 0x00, 0x80, 0x40,                   // 4.0f
      0x00, 0x00, 0xA0, 0x40,                   // 5.0f
      0x00, 0x00, 0xC0, 0x40,                   // 6.0f
  };
  CHECK(testutil::file_bytes(path) == expected);

  const TensorBlob back = read_blob(path);
  CHECK(back.dims == blob.dims);
  CHECK(back.payload == blob.payload);
}

TEST_CASE("blob: roundtrip preserves arbitrary rank and payload bits") {
  RngStream rng(4);
  TensorBlob blob;
  blob.dims = {3, 4, 5};
  blob.payload.resize(60);
  for (float& v : blob.payload) v = static_cast<float>(rng.uniform(-10.0, 10.0));
  const auto dir = testutil::fresh_dir("blob_roundtrip");
  const std::string path = (dir / "r.gbt").string();
  write_blob(blob, path);
  const TensorBlob back = read_blob(path);
  CHECK(back.dims == blob.dims);
  CHECK(back.payload == blob.payload);
  CHECK(back.element_count() == 60);
}

TEST_CASE("blob: malformed files are rejected") {
  const auto dir = testutil::fresh_dir("blob_bad");
  TensorBlob blob;
  blob.dims = {2, 2};
  blob.payload = {1, 2, 3, 4};
  const std::string path = (dir / "good.gbt").string();
  write_blob(blob, path);
  std::vector<unsigned char> bytes = testutil::file_bytes(path);

  SUBCASE("bad magic") {
    bytes[0] = 'X';
    write_file_bytes(bytes, (dir / "magic.gbt").string());
    CHECK_THROWS_AS(read_blob((dir / "magic.gbt").string()), FormatError);
  }
  SUBCASE("truncated payload") {
    bytes.resize(bytes.size() - 3);
    write_file_bytes(bytes, (dir / "trunc.gbt").string());
    CHECK_THROWS_AS(read_blob((dir / "trunc.gbt").string()), FormatError);
  }
  SUBCASE("trailing bytes") {
    bytes.push_back(0);
    write_file_bytes(bytes, (dir / "trail.gbt").string());
    CHECK_THROWS_AS(read_blob((dir / "trail.gbt").string()), FormatError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_blob((dir / "nope.gbt").string()), IoError);
  }
}

TEST_CASE("blob: sequential encoding parses back in order") {
  TensorBlob a, b;
  a.dims = {2};
  a.payload = {9.0f, -1.0f};
  b.dims = {1, 3};
  b.payload = {0.5f, 0.25f, 0.125f};
  std::vector<unsigned char> bytes;
  append_blob_bytes(a, bytes);
  append_blob_bytes(b, bytes);
  std::size_t off = 0;
  const TensorBlob pa = parse_blob_bytes(bytes, off);
  const TensorBlob pb = parse_blob_bytes(bytes, off);
  CHECK(off == bytes.size());
  CHECK(pa.dims == a.dims);
  CHECK(pa.payload == a.payload);
  CHECK(pb.dims == b.dims);
  CHECK(pb.payload == b.payload);
}

TEST_CASE("blob: image conversion keeps dims and memory layout") {
  RngStream rng(12);
  ImageBuffer img(4, 5, 3);
  for (float& v : img.data) v = rng.next_float();
  const TensorBlob blob = to_blob(img);
  REQUIRE(blob.dims == std::vector<std::uint32_t>{3, 4, 5});
  CHECK(blob.payload == img.data);
  const ImageBuffer back = image_from_blob(blob);
  CHECK(back.channels == 3);
  CHECK(back.height == 4);
  CHECK(back.width == 5);
  CHECK(back.data == img.data);
}
