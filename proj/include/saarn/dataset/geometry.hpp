#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "saarn/dataset/image.hpp"
#include "saarn/errors.hpp"

namespace saarn::dataset {

// Rotated rectangle in pixel coordinates; w runs along the direction at
// `angle` radians from the +x axis (y pointing down).
struct OrientedBox {
  double cx = 0, cy = 0;
  double w = 1, h = 1;
  double angle = 0;

  void validate() const {
    if (!(w > 0) || !(h > 0)) throw InvalidInputError("oriented box needs w > 0 and h > 0");
    if (!(angle >= -std::numbers::pi / 2) || !(angle < std::numbers::pi / 2))
      throw InvalidInputError("oriented box angle must lie in [-pi/2, pi/2)");
  }

  // Box-frame coordinates of point (x, y).
  std::array<double, 2> local(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double c = std::cos(angle), s = std::sin(angle);
    return {dx * c + dy * s, -dx * s + dy * c};
  }

  bool contains(double x, double y) const {
    constexpr double kEps = 1e-9;
    const auto [u, v] = local(x, y);
    return std::abs(u) <= w / 2 + kEps && std::abs(v) <= h / 2 + kEps;
  }

  // Corners in order around the box.
  std::array<std::array<double, 2>, 4> corners() const {
    const double c = std::cos(angle), s = std::sin(angle);
    std::array<std::array<double, 2>, 4> out;
    const std::array<std::array<double, 2>, 4> unit{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};
    for (std::size_t i = 0; i < 4; ++i) {
      const double u = unit[i][0] * w / 2, v = unit[i][1] * h / 2;
      out[i] = {cx + u * c - v * s, cy + u * s + v * c};
    }
    return out;
  }

  double area() const { return w * h; }
};

// Pixels whose centre (x + 0.5, y + 0.5) lies inside the box, boundary
// included.
inline Mask rasterize_obb(const OrientedBox& box, int height, int width) {
  box.validate();
  Mask m(height, width);
  double x0 = box.cx, x1 = box.cx, y0 = box.cy, y1 = box.cy;
  for (const auto& p : box.corners()) {
    x0 = std::min(x0, p[0]);
    x1 = std::max(x1, p[0]);
    y0 = std::min(y0, p[1]);
    y1 = std::max(y1, p[1]);
  }
  const int ys = std::max(0, static_cast<int>(std::floor(y0)) - 1);
  const int ye = std::min(height - 1, static_cast<int>(std::ceil(y1)) + 1);
  const int xs = std::max(0, static_cast<int>(std::floor(x0)) - 1);
  const int xe = std::min(width - 1, static_cast<int>(std::ceil(x1)) + 1);
  for (int y = ys; y <= ye; ++y)
    for (int x = xs; x <= xe; ++x)
      if (box.contains(x + 0.5, y + 0.5)) m.at(y, x) = 1;
  return m;
}

inline double coverage_ratio(const Mask& mask) {
  if (mask.bits.empty()) return 0.0;
  return static_cast<double>(mask.count()) / static_cast<double>(mask.bits.size());
}

struct TileOffset {
  int y = 0;
  int x = 0;
  bool operator==(const TileOffset&) const = default;
};

struct Tile {
  Image image;
  TileOffset offset;
};

// Start positions along one axis: a tile grid, with the last tile shifted
// back so it ends exactly at the image edge.
inline std::vector<int> tile_starts(int length, int tile) {
  std::vector<int> starts;
  for (int s = 0; s + tile <= length; s += tile) starts.push_back(s);
  if (starts.back() + tile < length) starts.push_back(length - tile);
  return starts;
}

inline std::vector<TileOffset> tile_offsets(int height, int width, int tile_size = 1080) {
  if (tile_size <= 0) throw InvalidInputError("tile size must be positive");
  if (height < tile_size || width < tile_size)
    throw InvalidInputError("image " + std::to_string(width) + "x" + std::to_string(height) +
                            " is smaller than the tile size " + std::to_string(tile_size));
  std::vector<TileOffset> out;
  for (int y : tile_starts(height, tile_size))
    for (int x : tile_starts(width, tile_size)) out.push_back({y, x});
  return out;
}

// Row-major over (y, x) offsets; every tile is exactly tile_size square.
inline std::vector<Tile> tile_image(const Image& img, int tile_size = 1080) {
  std::vector<Tile> tiles;
  for (const auto& off : tile_offsets(img.height, img.width, tile_size))
    tiles.push_back({crop(img, off.y, off.x, tile_size, tile_size), off});
  return tiles;
}

// Axis-aligned pixel bounds [y0, y1] x [x0, x1] of the box, clamped.
struct PixelRect {
  int y0, x0, y1, x1;
};

inline PixelRect pixel_bounds(const OrientedBox& box, int height, int width) {
  double x0 = box.cx, x1 = box.cx, y0 = box.cy, y1 = box.cy;
  for (const auto& p : box.corners()) {
    x0 = std::min(x0, p[0]);
    x1 = std::max(x1, p[0]);
    y0 = std::min(y0, p[1]);
    y1 = std::max(y1, p[1]);
  }
  return {std::clamp(static_cast<int>(std::floor(y0)), 0, height - 1),
          std::clamp(static_cast<int>(std::floor(x0)), 0, width - 1),
          std::clamp(static_cast<int>(std::ceil(y1)) - 1, 0, height - 1),
          std::clamp(static_cast<int>(std::ceil(x1)) - 1, 0, width - 1)};
}

// Crop around the instance, upsampled for legibility.
inline Image crop_instance(const Image& img, const OrientedBox& box, int upsample = 4) {
  const auto r = pixel_bounds(box, img.height, img.width);
  return upsample_nearest(crop(img, r.y0, r.x0, r.y1 - r.y0 + 1, r.x1 - r.x0 + 1), upsample);
}

// Copy of the image with a one-pixel red rectangle around the instance.
inline Image mark_instance(const Image& img, const OrientedBox& box) {
  Image out = img;
  const auto r = pixel_bounds(box, img.height, img.width);
  const int y0 = std::max(0, r.y0 - 1), x0 = std::max(0, r.x0 - 1);
  const int y1 = std::min(img.height - 1, r.y1 + 1), x1 = std::min(img.width - 1, r.x1 + 1);
  auto paint = [&](int y, int x) {
    auto* p = out.pixel(y, x);
    p[0] = 255;
    p[1] = 0;
    p[2] = 0;
  };
  for (int x = x0; x <= x1; ++x) {
    paint(y0, x);
    paint(y1, x);
  }
  for (int y = y0; y <= y1; ++y) {
    paint(y, x0);
    paint(y, x1);
  }
  return out;
}

}  // namespace saarn::dataset
