#include "fastdraw/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "fastdraw/error.hpp"

namespace fastdraw {

namespace {

constexpr std::array<char, 4> kMagic = {'F', 'D', 'T', '1'};
constexpr std::uint32_t kMaxRank = 8;

static_assert(sizeof(float) == 4);

template <typename T>
T byteswap_if_big(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&value, bytes, sizeof(T));
  }
  return value;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  v = byteswap_if_big(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    fail(ErrorCode::format, "truncated tensor header");
  }
  return byteswap_if_big(v);
}

}  // namespace

std::size_t RawTensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void write_tensor(std::ostream& out, const RawTensor& tensor) {
  if (tensor.dims.empty() || tensor.dims.size() > kMaxRank) {
    fail(ErrorCode::shape, "tensor rank must be in [1, 8]");
  }
  if (tensor.element_count() != tensor.data.size()) {
    fail(ErrorCode::shape, "tensor payload does not match dims");
  }
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, static_cast<std::uint32_t>(tensor.dims.size()));
  for (auto d : tensor.dims) put_u32(out, d);
  put_u32(out, tensor.L);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(tensor.data.data()),
              static_cast<std::streamsize>(tensor.data.size() * sizeof(float)));
  } else {
    for (float f : tensor.data) {
      f = byteswap_if_big(f);
      out.write(reinterpret_cast<const char*>(&f), sizeof f);
    }
  }
  if (!out) fail(ErrorCode::io, "failed writing tensor");
}

RawTensor read_tensor(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size())) fail(ErrorCode::format, "truncated tensor magic");
  if (magic != kMagic) fail(ErrorCode::format, "bad tensor magic (expected FDT1)");
  RawTensor t;
  const std::uint32_t rank = get_u32(in);
  if (rank == 0 || rank > kMaxRank) {
    std::ostringstream oss;
    oss << "unsupported tensor rank " << rank;
    fail(ErrorCode::format, oss.str());
  }
  t.dims.resize(rank);
  std::size_t count = 1;
  for (auto& d : t.dims) {
    d = get_u32(in);
    count *= d;
    if (count > (std::size_t{1} << 32)) fail(ErrorCode::format, "tensor too large");
  }
  t.L = get_u32(in);
  t.data.resize(count);
  if (!in.read(reinterpret_cast<char*>(t.data.data()),
               static_cast<std::streamsize>(count * sizeof(float)))) {
    fail(ErrorCode::format, "truncated tensor payload");
  }
  for (auto& f : t.data) f = byteswap_if_big(f);
  return t;
}

void save_raw_tensor(const std::string& path, const RawTensor& tensor) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open " + path + " for writing");
  write_tensor(out, tensor);
}

RawTensor load_raw_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  return read_tensor(in);
}

}  // namespace fastdraw
