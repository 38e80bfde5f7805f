#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sp3d/tensor.hpp"

namespace sp3d {

// TensorBlob on-disk format:
//   magic "SPT1" | dtype u8 (1 = float32 LE, 2 = float64 LE) | ndim u8 |
//   ndim x u32 LE dims | row-major payload.
// Round trips are bit-exact; dtype 2 exists so checkpoints preserve the
// double-precision training state exactly.
enum class BlobDtype : uint8_t { Float32 = 1, Float64 = 2 };

std::vector<uint8_t> encode_blob(const Tensor& t, BlobDtype dtype);
Tensor decode_blob(const uint8_t* bytes, size_t size, size_t* consumed = nullptr);

void write_blob_file(const std::string& path, const Tensor& t,
                     BlobDtype dtype = BlobDtype::Float32);
Tensor read_blob_file(const std::string& path);

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace sp3d
