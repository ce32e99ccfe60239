#pragma once

#include <filesystem>

#include "landseg/image.hpp"

namespace landseg {

// PNG input, converted to 8-bit RGB (palette/gray expanded, alpha
// stripped, 16-bit depth reduced).
RasterImage load_png(const std::filesystem::path& path);

// 8-bit RGB PNG output. Fixed settings, so identical rasters produce
// identical files.
void save_png(const RasterImage& image, const std::filesystem::path& path);

}  // namespace landseg
