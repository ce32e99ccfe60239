#include "landseg/tiling.hpp"

#include <cmath>
#include <string>

#include "landseg/error.hpp"

namespace landseg {

std::vector<int> tile_offsets(int dim, int tile) {
  if (tile < 1) throw ParameterError("tile size must be positive");
  if (dim < tile) {
    throw ParameterError("dimension " + std::to_string(dim) + " is smaller than tile size " +
                         std::to_string(tile));
  }
  const int n = (dim + tile - 1) / tile;
  std::vector<int> offsets(static_cast<std::size_t>(n));
  if (n == 1) return offsets;  // {0}
  for (int i = 0; i < n; ++i) {
    offsets[static_cast<std::size_t>(i)] =
        static_cast<int>(std::llround(static_cast<double>(i) * (dim - tile) / (n - 1)));
  }
  return offsets;
}

std::vector<TileOrigin> tile_grid(int width, int height, int tile) {
  const std::vector<int> xs = tile_offsets(width, tile);
  const std::vector<int> ys = tile_offsets(height, tile);
  std::vector<TileOrigin> grid;
  grid.reserve(xs.size() * ys.size());
  for (int y : ys)
    for (int x : xs) grid.push_back({x, y});
  return grid;
}

namespace {

void check_crop(int src_w, int src_h, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || w < 1 || h < 1 || x + w > src_w || y + h > src_h) {
    throw ParameterError("crop " + std::to_string(w) + "x" + std::to_string(h) + "+" +
                         std::to_string(x) + "+" + std::to_string(y) + " outside " +
                         std::to_string(src_w) + "x" + std::to_string(src_h));
  }
}

}  // namespace

RasterImage crop_image(const RasterImage& src, int x, int y, int w, int h) {
  check_crop(src.width, src.height, x, y, w, h);
  RasterImage out(w, h);
  for (int row = 0; row < h; ++row) {
    const std::uint8_t* from = src.pixel(x, y + row);
    std::uint8_t* to = out.pixel(0, row);
    std::copy(from, from + static_cast<std::size_t>(w) * 3, to);
  }
  return out;
}

LabelMask crop_mask(const LabelMask& src, int x, int y, int w, int h) {
  check_crop(src.width, src.height, x, y, w, h);
  LabelMask out(w, h);
  for (int row = 0; row < h; ++row) {
    const std::uint8_t* from = &src.classes[static_cast<std::size_t>(y + row) * src.width + x];
    std::copy(from, from + w, &out.classes[static_cast<std::size_t>(row) * w]);
  }
  return out;
}

std::vector<std::pair<RasterImage, TileOrigin>> tile_image(const RasterImage& scene,
                                                           int tile_size) {
  scene.validate();
  std::vector<std::pair<RasterImage, TileOrigin>> tiles;
  for (const TileOrigin& origin : tile_grid(scene.width, scene.height, tile_size)) {
    tiles.emplace_back(crop_image(scene, origin.x, origin.y, tile_size, tile_size), origin);
  }
  return tiles;
}

}  // namespace landseg
