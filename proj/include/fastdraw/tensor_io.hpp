#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fastdraw {

// FDT1 tensor file:
//   "FDT1" | u32 rank | rank x u32 dims | u32 L | f32 payload (row-major)
// All integers and floats little-endian.
struct RawTensor {
  std::vector<std::uint32_t> dims;
  std::uint32_t L = 0;
  std::vector<float> data;

  std::size_t element_count() const;
};

void write_tensor(std::ostream& out, const RawTensor& tensor);
RawTensor read_tensor(std::istream& in);

void save_raw_tensor(const std::string& path, const RawTensor& tensor);
RawTensor load_raw_tensor(const std::string& path);

}  // namespace fastdraw
