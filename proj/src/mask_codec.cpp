#include "landseg/mask_codec.hpp"

#include <string>

#include "landseg/error.hpp"

namespace landseg {

LabelMask decode_mask(const RasterImage& image, const ClassPalette& palette, bool strict,
                      DecodeStats* stats) {
  image.validate();
  LabelMask mask(image.width, image.height);
  std::size_t off_palette = 0;
  const std::uint8_t* px = image.rgb.data();
  for (std::size_t i = 0; i < mask.classes.size(); ++i, px += 3) {
    const std::optional<int> cls = palette.class_of(px[0], px[1], px[2]);
    if (cls) {
      mask.classes[i] = static_cast<std::uint8_t>(*cls);
      continue;
    }
    if (strict) {
      const int x = static_cast<int>(i % static_cast<std::size_t>(image.width));
      const int y = static_cast<int>(i / static_cast<std::size_t>(image.width));
      throw DataError("off-palette color (" + std::to_string(px[0]) + "," + std::to_string(px[1]) +
                      "," + std::to_string(px[2]) + ") at pixel (x=" + std::to_string(x) +
                      ", y=" + std::to_string(y) + ")");
    }
    mask.classes[i] = kClassUnknown;
    ++off_palette;
  }
  if (stats) stats->off_palette = off_palette;
  return mask;
}

RasterImage encode_mask(const LabelMask& mask, const ClassPalette& palette) {
  mask.validate();
  RasterImage image(mask.width, mask.height);
  std::uint8_t* px = image.rgb.data();
  for (std::size_t i = 0; i < mask.classes.size(); ++i, px += 3) {
    const auto& rgb = palette.entry(mask.classes[i]).rgb;
    px[0] = rgb[0];
    px[1] = rgb[1];
    px[2] = rgb[2];
  }
  return image;
}

}  // namespace landseg
