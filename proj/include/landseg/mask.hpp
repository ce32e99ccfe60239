#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "landseg/error.hpp"

namespace landseg {

inline constexpr int kNumClasses = 7;
inline constexpr int kClassUnknown = 6;

// Fixed index assignment for the seven land cover classes.
inline constexpr std::array<const char*, kNumClasses> kClassNames = {
    "urban", "agriculture", "rangeland", "forest", "water", "barren", "unknown"};

// H x W grid of class indices in 0..6, one per pixel, row-major.
struct LabelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> classes;

  LabelMask() = default;

  LabelMask(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), classes(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t size() const { return classes.size(); }

  std::uint8_t at(int x, int y) const { return classes[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return classes[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const LabelMask&) const = default;

  void validate() const {
    if (classes.size() != static_cast<std::size_t>(width) * height) {
      throw DimensionError("mask stores " + std::to_string(classes.size()) + " values for " +
                           std::to_string(width) + "x" + std::to_string(height));
    }
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (classes[i] >= kNumClasses) {
        throw DataError("mask value " + std::to_string(int(classes[i])) + " at offset " +
                        std::to_string(i) + " is outside 0.." + std::to_string(kNumClasses - 1));
      }
    }
  }
};

}  // namespace landseg
