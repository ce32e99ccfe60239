#pragma once

#include <cstdint>
#include <vector>

#include "landseg/error.hpp"

namespace landseg {

// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  RasterImage() = default;

  RasterImage(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width + x) * 3;
  }

  std::uint8_t* pixel(int x, int y) { return rgb.data() + offset(x, y); }
  const std::uint8_t* pixel(int x, int y) const { return rgb.data() + offset(x, y); }

  void set_pixel(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    std::uint8_t* p = pixel(x, y);
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  bool operator==(const RasterImage&) const = default;

  void validate() const {
    if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
      throw DimensionError("raster stores " + std::to_string(rgb.size()) + " bytes for " +
                           std::to_string(width) + "x" + std::to_string(height));
    }
  }
};

}  // namespace landseg
