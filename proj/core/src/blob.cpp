#include "gestboot/blob.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <limits>
#include <memory>

#include "gestboot/error.hpp"

namespace gestboot {

namespace {

constexpr char kMagic[4] = {'G', 'B', 'T', '1'};
constexpr std::uint32_t kMaxRank = 8;

void put_u32_le(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

std::size_t TensorBlob::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return dims.empty() ? 0 : n;
}

void append_blob_bytes(const TensorBlob& blob, std::vector<unsigned char>& out) {
  if (blob.dims.empty()) throw InvalidInputError("blob rank must be at least 1");
  if (blob.dims.size() > kMaxRank) throw InvalidInputError("blob rank too large");
  for (std::uint32_t d : blob.dims) {
    if (d == 0) throw InvalidInputError("blob dims must be positive");
  }
  if (blob.payload.size() != blob.element_count()) {
    throw InvalidInputError("blob payload length does not match dims");
  }
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32_le(out, static_cast<std::uint32_t>(blob.dims.size()));
  for (std::uint32_t d : blob.dims) put_u32_le(out, d);
  static_assert(sizeof(float) == 4);
  for (float f : blob.payload) {
    put_u32_le(out, std::bit_cast<std::uint32_t>(f));
  }
}

// Parses one blob starting at `off`; advances `off` past it.
TensorBlob parse_blob_bytes(const std::vector<unsigned char>& bytes, std::size_t& off) {
  if (bytes.size() - off < 8) throw FormatError("blob truncated before header");
  if (std::memcmp(bytes.data() + off, kMagic, 4) != 0) {
    throw FormatError("bad blob magic (expected GBT1)");
  }
  const std::uint32_t rank = get_u32_le(bytes.data() + off + 4);
  if (rank == 0) throw FormatError("blob rank 0 rejected");
  if (rank > kMaxRank) throw FormatError("blob rank too large");
  off += 8;
  if (bytes.size() - off < static_cast<std::size_t>(rank) * 4) {
    throw FormatError("blob truncated in dims");
  }
  TensorBlob blob;
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint32_t d = get_u32_le(bytes.data() + off);
    off += 4;
    if (d == 0) throw FormatError("blob dim 0 rejected");
    if (count > std::numeric_limits<std::size_t>::max() / d) {
      throw FormatError("blob dims overflow");
    }
    count *= d;
    blob.dims.push_back(d);
  }
  if (bytes.size() - off < count * 4) throw FormatError("blob truncated in payload");
  blob.payload.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    blob.payload[i] = std::bit_cast<float>(get_u32_le(bytes.data() + off));
    off += 4;
  }
  return blob;
}

std::vector<unsigned char> read_file_bytes(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open for reading: " + path);
  std::fseek(fp.get(), 0, SEEK_END);
  const long sz = std::ftell(fp.get());
  if (sz < 0) throw IoError("cannot stat: " + path);
  std::fseek(fp.get(), 0, SEEK_SET);
  std::vector<unsigned char> bytes(static_cast<std::size_t>(sz));
  if (sz > 0 && std::fread(bytes.data(), 1, bytes.size(), fp.get()) != bytes.size()) {
    throw IoError("short read: " + path);
  }
  return bytes;
}

void write_file_bytes(const std::vector<unsigned char>& bytes, const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open for writing: " + path);
  if (!bytes.empty() && std::fwrite(bytes.data(), 1, bytes.size(), fp.get()) != bytes.size()) {
    throw IoError("short write: " + path);
  }
}

TensorBlob read_blob(const std::string& path) {
  const std::vector<unsigned char> bytes = read_file_bytes(path);
  std::size_t off = 0;
  TensorBlob blob = parse_blob_bytes(bytes, off);
  if (off != bytes.size()) throw FormatError("trailing bytes after blob: " + path);
  return blob;
}

void write_blob(const TensorBlob& blob, const std::string& path) {
  std::vector<unsigned char> bytes;
  append_blob_bytes(blob, bytes);
  write_file_bytes(bytes, path);
}

TensorBlob to_blob(const ImageBuffer& img) {
  img.validate();
  TensorBlob blob;
  blob.dims = {static_cast<std::uint32_t>(img.channels), static_cast<std::uint32_t>(img.height),
               static_cast<std::uint32_t>(img.width)};
  blob.payload = img.data;
  return blob;
}

ImageBuffer image_from_blob(const TensorBlob& blob) {
  if (blob.dims.size() != 3) throw FormatError("image blob must have rank 3 (c,h,w)");
  ImageBuffer img(static_cast<int>(blob.dims[1]), static_cast<int>(blob.dims[2]),
                  static_cast<int>(blob.dims[0]));
  img.data = blob.payload;
  img.validate();
  return img;
}

}  // namespace gestboot
