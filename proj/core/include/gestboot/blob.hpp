#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gestboot/image.hpp"

namespace gestboot {

// On-disk tensor: magic "GBT1", u32 rank, u32 dims..., then float32 payload,
// row-major, all little-endian. Used for flow fields, probability maps,
// precision maps and network weights.
struct TensorBlob {
  std::vector<std::uint32_t> dims;
  std::vector<float> payload;

  std::size_t element_count() const;
};

TensorBlob read_blob(const std::string& path);
void write_blob(const TensorBlob& blob, const std::string& path);

// Building blocks for files that hold a sequence of blobs (network weights).
void append_blob_bytes(const TensorBlob& blob, std::vector<unsigned char>& out);
TensorBlob parse_blob_bytes(const std::vector<unsigned char>& bytes, std::size_t& off);
std::vector<unsigned char> read_file_bytes(const std::string& path);
void write_file_bytes(const std::vector<unsigned char>& bytes, const std::string& path);

// Images exchange as (channels, height, width) blobs; the payload is the
// ImageBuffer memory verbatim.
TensorBlob to_blob(const ImageBuffer& img);
ImageBuffer image_from_blob(const TensorBlob& blob);

}  // namespace gestboot
