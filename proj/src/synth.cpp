#include "landseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "landseg/error.hpp"
#include "landseg/rng.hpp"

namespace landseg {

namespace {

constexpr double kTwoPi = 6.283185307179586;

// Smooth random scalar field: a handful of random plane waves.
struct WaveField {
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;

  static WaveField make(Rng& rng, int n_waves) {
    WaveField f;
    f.waves.reserve(static_cast<std::size_t>(n_waves));
    for (int i = 0; i < n_waves; ++i) {
      f.waves.push_back({rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                         rng.uniform(0.0, kTwoPi), rng.uniform(0.5, 1.0)});
    }
    return f;
  }

  double operator()(double x, double y) const {
    double v = 0.0;
    for (const Wave& w : waves) v += w.amp * std::sin(kTwoPi * (w.fx * x + w.fy * y) + w.phase);
    return v;
  }
};

}  // namespace

std::vector<SynthScene> synth_generate(const SynthSpec& spec, const ClassPalette& palette) {
  if (spec.scene_size < 16 || spec.scene_size % 16 != 0) {
    throw ParameterError("scene size must be a positive multiple of 16, got " +
                         std::to_string(spec.scene_size));
  }
  if (spec.num_scenes < 1) throw ParameterError("need at least one scene");
  double mix_sum = 0.0;
  for (double f : spec.class_mix) {
    if (f < 0.0) throw ParameterError("class mix fractions must be non-negative");
    mix_sum += f;
  }
  if (std::abs(mix_sum - 1.0) > 1e-6) {
    throw ParameterError("class mix fractions must sum to 1, got " + std::to_string(mix_sum));
  }

  const int size = spec.scene_size;
  const std::size_t total = static_cast<std::size_t>(size) * size;

  std::vector<SynthScene> scenes;
  scenes.reserve(static_cast<std::size_t>(spec.num_scenes));

  for (int scene_idx = 0; scene_idx < spec.num_scenes; ++scene_idx) {
    Rng rng = Rng::stream(spec.seed, static_cast<std::uint64_t>(scene_idx));
    const WaveField region_field = WaveField::make(rng, 6);
    const WaveField shade_field = WaveField::make(rng, 4);

    // Band the field's value order into class regions whose pixel counts
    // match the requested mix exactly (up to rounding).
    std::vector<double> field(total);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        field[static_cast<std::size_t>(y) * size + x] =
            region_field(static_cast<double>(x) / size, static_cast<double>(y) / size);
      }
    }
    std::vector<std::uint32_t> order(total);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (field[a] != field[b]) return field[a] < field[b];
      return a < b;  // tie-break on index keeps the order total
    });

    SynthScene scene;
    scene.mask = LabelMask(size, size, kClassUnknown);
    double cum = 0.0;
    std::size_t band_begin = 0;
    for (int cls = 0; cls < kNumClasses; ++cls) {
      cum += spec.class_mix[static_cast<std::size_t>(cls)];
      const std::size_t band_end = (cls == kNumClasses - 1 && mix_sum >= 1.0 - 1e-9)
                                       ? total
                                       : static_cast<std::size_t>(std::llround(cum * total));
      for (std::size_t i = band_begin; i < band_end && i < total; ++i) {
        scene.mask.classes[order[i]] = static_cast<std::uint8_t>(cls);
      }
      band_begin = std::min(band_end, total);
    }

    // Render: palette color shaded by a smooth field plus per-pixel noise.
    scene.image = RasterImage(size, size);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * size + x;
        const auto& rgb = palette.entry(scene.mask.classes[i]).rgb;
        const double shade =
            0.75 + 0.25 * (0.5 + 0.5 * std::tanh(shade_field(static_cast<double>(x) / size,
                                                             static_cast<double>(y) / size)));
        for (int ch = 0; ch < 3; ++ch) {
          const double noise = rng.uniform(-18.0, 18.0);
          const double v = rgb[static_cast<std::size_t>(ch)] * shade + noise;
          scene.image.rgb[i * 3 + static_cast<std::size_t>(ch)] =
              static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        }
      }
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

}  // namespace landseg
