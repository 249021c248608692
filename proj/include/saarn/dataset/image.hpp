#pragma once

// 8-bit raster types and their lossless on-disk forms: binary PPM (P6) for
// RGB images and binary PGM (P5, values 0/255) for masks.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "saarn/errors.hpp"

namespace saarn::dataset {

struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;  // row-major HWC

  Image() = default;
  Image(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), rgb(static_cast<std::size_t>(h) * w * 3, fill) {}

  std::uint8_t* pixel(int y, int x) { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* pixel(int y, int x) const {
    return &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
  }
  bool operator==(const Image&) const = default;
};

struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1, row-major

  Mask() = default;
  Mask(int h, int w) : height(h), width(w), bits(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int y, int x) { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
  }
  bool operator==(const Mask&) const = default;
};

namespace detail {

inline int read_header_int(std::istream& is) {
  int c = is.peek();
  while (c == '#' || std::isspace(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(is, skip);
    } else {
      is.get();
    }
    c = is.peek();
  }
  int v = -1;
  is >> v;
  if (!is) throw FormatError("malformed netpbm header");
  return v;
}

inline std::vector<std::uint8_t> read_netpbm(const std::string& path, const char* magic,
                                             int channels, int& height, int& width) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path + "'");
  std::string m(2, '\0');
  is.read(m.data(), 2);
  if (m != magic) throw FormatError("'" + path + "' is not a " + magic + " file");
  width = read_header_int(is);
  height = read_header_int(is);
  const int maxval = read_header_int(is);
  if (maxval != 255 || width <= 0 || height <= 0)
    throw FormatError("'" + path + "': unsupported netpbm header");
  is.get();  // single whitespace before raster
  std::vector<std::uint8_t> data(static_cast<std::size_t>(width) * height * channels);
  is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!is) throw FormatError("'" + path + "': truncated raster");
  return data;
}

inline void write_netpbm(const std::string& path, const char* magic, int height, int width,
                         const std::vector<std::uint8_t>& data) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  os << magic << '\n' << width << ' ' << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!os) throw FormatError("write to '" + path + "' failed");
}

}  // namespace detail

inline void write_ppm(const std::string& path, const Image& img) {
  detail::write_netpbm(path, "P6", img.height, img.width, img.rgb);
}

inline Image read_ppm(const std::string& path) {
  Image img;
  img.rgb = detail::read_netpbm(path, "P6", 3, img.height, img.width);
  return img;
}

inline void write_mask_pgm(const std::string& path, const Mask& mask) {
  std::vector<std::uint8_t> data(mask.bits.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = mask.bits[i] ? 255 : 0;
  detail::write_netpbm(path, "P5", mask.height, mask.width, data);
}

inline Mask read_mask_pgm(const std::string& path) {
  Mask m;
  m.bits = detail::read_netpbm(path, "P5", 1, m.height, m.width);
  for (auto& v : m.bits) {
    if (v != 0 && v != 255) throw FormatError("'" + path + "': mask values must be 0 or 255");
    v = v ? 1 : 0;
  }
  return m;
}

// Sub-image [y0, y0+h) x [x0, x0+w), clamped to the image.
inline Image crop(const Image& img, int y0, int x0, int h, int w) {
  y0 = std::clamp(y0, 0, img.height - 1);
  x0 = std::clamp(x0, 0, img.width - 1);
  h = std::clamp(h, 1, img.height - y0);
  w = std::clamp(w, 1, img.width - x0);
  Image out(h, w);
  for (int y = 0; y < h; ++y)
    std::copy_n(img.pixel(y0 + y, x0), static_cast<std::size_t>(w) * 3, out.pixel(y, 0));
  return out;
}

inline Image upsample_nearest(const Image& img, int factor) {
  Image out(img.height * factor, img.width * factor);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      std::copy_n(img.pixel(y / factor, x / factor), 3, out.pixel(y, x));
  return out;
}

}  // namespace saarn::dataset
