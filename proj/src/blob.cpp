#include "sp3d/blob.hpp"

#include <cstring>
#include <fstream>

namespace sp3d {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<uint8_t> encode_blob(const Tensor& t, BlobDtype dtype) {
  if (t.ndim() > 255) throw IoError("tensor rank too large for blob format");
  std::vector<uint8_t> out;
  const size_t elem = dtype == BlobDtype::Float32 ? 4 : 8;
  out.reserve(6 + 4 * static_cast<size_t>(t.ndim()) + elem * static_cast<size_t>(t.numel()));
  out.push_back('S');
  out.push_back('P');
  out.push_back('T');
  out.push_back('1');
  out.push_back(static_cast<uint8_t>(dtype));
  out.push_back(static_cast<uint8_t>(t.ndim()));
  for (int64_t i = 0; i < t.ndim(); ++i) {
    if (t.dim(static_cast<int>(i)) > 0xffffffffLL) throw IoError("dimension exceeds u32");
    put_u32(out, static_cast<uint32_t>(t.dim(static_cast<int>(i))));
  }
  if (dtype == BlobDtype::Float32) {
    for (int64_t i = 0; i < t.numel(); ++i) {
      const float f = static_cast<float>(t[i]);
      uint8_t b[4];
      std::memcpy(b, &f, 4);
      out.insert(out.end(), b, b + 4);
    }
  } else {
    for (int64_t i = 0; i < t.numel(); ++i) {
      const double d = t[i];
      uint8_t b[8];
      std::memcpy(b, &d, 8);
      out.insert(out.end(), b, b + 8);
    }
  }
  return out;
}

Tensor decode_blob(const uint8_t* bytes, size_t size, size_t* consumed) {
  if (size < 6 || std::memcmp(bytes, "SPT1", 4) != 0)
    throw IoError("not a TensorBlob: bad magic");
  const uint8_t dtype = bytes[4];
  if (dtype != 1 && dtype != 2) throw IoError("unknown TensorBlob dtype code");
  const size_t ndim = bytes[5];
  size_t off = 6;
  if (size < off + 4 * ndim) throw IoError("truncated TensorBlob header");
  std::vector<int64_t> shape(ndim);
  int64_t n = 1;
  for (size_t i = 0; i < ndim; ++i) {
    shape[i] = get_u32(bytes + off);
    off += 4;
    n *= shape[i];
  }
  const size_t elem = dtype == 1 ? 4 : 8;
  if (size < off + elem * static_cast<size_t>(n)) throw IoError("truncated TensorBlob payload");
  Tensor t(shape);
  if (dtype == 1) {
    for (int64_t i = 0; i < n; ++i) {
      float f;
      std::memcpy(&f, bytes + off, 4);
      off += 4;
      t[i] = static_cast<double>(f);
    }
  } else {
    for (int64_t i = 0; i < n; ++i) {
      double d;
      std::memcpy(&d, bytes + off, 8);
      off += 8;
      t[i] = d;
    }
  }
  if (consumed) *consumed = off;
  return t;
}

void write_blob_file(const std::string& path, const Tensor& t, BlobDtype dtype) {
  write_file_bytes(path, encode_blob(t, dtype));
}

Tensor read_blob_file(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return decode_blob(bytes.data(), bytes.size());
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  in.seekg(0, std::ios::end);
  const std::streamoff len = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<uint8_t> bytes(static_cast<size_t>(len));
  if (len > 0) in.read(reinterpret_cast<char*>(bytes.data()), len);
  if (!in) throw IoError("read failed: " + path);
  return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace sp3d
