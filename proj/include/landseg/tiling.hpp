#pragma once

#include <utility>
#include <vector>

#include "landseg/image.hpp"
#include "landseg/mask.hpp"

namespace landseg {

// Per-axis tile origins: n = ceil(dim / tile) offsets evenly spaced from
// 0 to dim - tile (rounded to integers), so the axis is fully covered.
// Adjacent tiles overlap whenever tile does not divide dim.
std::vector<int> tile_offsets(int dim, int tile);

struct TileOrigin {
  int x = 0;
  int y = 0;

  bool operator==(const TileOrigin&) const = default;
};

// Row-major grid of tile origins covering a width x height scene.
std::vector<TileOrigin> tile_grid(int width, int height, int tile);

RasterImage crop_image(const RasterImage& src, int x, int y, int w, int h);
LabelMask crop_mask(const LabelMask& src, int x, int y, int w, int h);

// Scene -> list of (tile, origin) on the even grid.
std::vector<std::pair<RasterImage, TileOrigin>> tile_image(const RasterImage& scene,
                                                           int tile_size = 512);

}  // namespace landseg
