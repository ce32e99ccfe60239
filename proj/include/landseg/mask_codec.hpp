#pragma once

#include <cstddef>

#include "landseg/image.hpp"
#include "landseg/mask.hpp"
#include "landseg/palette.hpp"

namespace landseg {

struct DecodeStats {
  std::size_t off_palette = 0;  // pixels mapped to unknown in lenient mode
};

// Color mask image -> class indices. Strict mode throws DataError naming
// the first off-palette pixel; lenient mode maps such pixels to the
// unknown class and counts them in `stats`.
LabelMask decode_mask(const RasterImage& image, const ClassPalette& palette, bool strict,
                      DecodeStats* stats = nullptr);

// Exact inverse of decode_mask on palette-valid inputs.
RasterImage encode_mask(const LabelMask& mask, const ClassPalette& palette);

}  // namespace landseg
