#include "fastdraw/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fastdraw/error.hpp"

namespace fastdraw {

double Image::mean() const {
  if (data.empty()) return 0.0;
  return std::accumulate(data.begin(), data.end(), 0.0) / static_cast<double>(data.size());
}

namespace {

unsigned char to_byte(float v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

void skip_space_and_comments(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c == ' ' || c == '\n' || c == '\r' || c == '\t') {
      in.get();
    } else {
      return;
    }
  }
}

}  // namespace

void save_ppm(const std::string& path, const Image& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open " + path + " for writing");
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(image.width) * 3);
  for (int h = 0; h < image.height; ++h) {
    for (int w = 0; w < image.width; ++w) {
      for (int c = 0; c < 3; ++c) row[static_cast<std::size_t>(w) * 3 + c] = to_byte(image.at(c, h, w));
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) fail(ErrorCode::io, "failed writing " + path);
}

Image load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6") fail(ErrorCode::format, path + ": not a binary PPM (P6)");
  int w = 0, h = 0, maxval = 0;
  skip_space_and_comments(in);
  in >> w;
  skip_space_and_comments(in);
  in >> h;
  skip_space_and_comments(in);
  in >> maxval;
  if (!in || w <= 0 || h <= 0 || maxval != 255) fail(ErrorCode::format, path + ": bad PPM header");
  in.get();
  Image img(h, w);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()))) {
      fail(ErrorCode::format, path + ": truncated PPM payload");
    }
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = row[static_cast<std::size_t>(x) * 3 + c] / 255.0f;
    }
  }
  return img;
}

Image quantized(const Image& image) {
  Image out = image;
  for (auto& v : out.data) v = to_byte(v) / 255.0f;
  return out;
}

}  // namespace fastdraw
