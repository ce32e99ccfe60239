#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "landseg/mask.hpp"

namespace landseg {

// Entry (g, p) counts pixels with ground-truth class g predicted as p.
// Matrices from parallel workers or multiple images merge by entrywise
// addition.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

  std::uint64_t total() const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(const LabelMask& pred, const LabelMask& gt);

// Per-class IoU; nullopt marks a class absent from both prediction and
// ground truth (a distinct "undefined" state, never 0 or 1).
using IouPerClass = std::array<std::optional<double>, kNumClasses>;

IouPerClass iou_per_class(const ConfusionMatrix& cm);

// Arithmetic mean over defined classes only. `exclude_unknown` drops
// class 6 from the average regardless of whether it occurred.
double mean_iou(const IouPerClass& per_class, bool exclude_unknown = false);

// Per-class area fractions, kept as exact pixel counts.
struct ClassPercentages {
  std::array<std::uint64_t, kNumClasses> counts{};
  std::uint64_t total = 0;

  double fraction(int cls) const {
    return static_cast<double>(counts[static_cast<std::size_t>(cls)]) /
           static_cast<double>(total);
  }

  bool operator==(const ClassPercentages&) const = default;
};

ClassPercentages class_percentages(const LabelMask& mask);

// `class,iou` rows; undefined classes render as empty values.
std::string iou_csv(const IouPerClass& per_class);

// `class,percent` rows, one decimal place.
std::string percentages_csv(const ClassPercentages& pct);

}  // namespace landseg
