#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "landseg/image.hpp"
#include "landseg/mask.hpp"
#include "landseg/palette.hpp"

namespace landseg {

struct SynthSpec {
  std::uint64_t seed = 1;
  int scene_size = 64;   // must be divisible by 16
  int num_scenes = 8;
  std::array<double, kNumClasses> class_mix{};  // fractions, sum to 1
};

struct SynthScene {
  RasterImage image;
  LabelMask mask;
};

// Procedural stand-in scenes: a smooth random field is quantile-banded
// into class regions (realized mix matches the request up to pixel
// rounding), and each region is rendered with its palette color plus
// shading and per-pixel noise. Deterministic per seed.
std::vector<SynthScene> synth_generate(const SynthSpec& spec, const ClassPalette& palette);

}  // namespace landseg
