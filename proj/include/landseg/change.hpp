#pragma once

#include <array>
#include <string>

#include "landseg/image.hpp"
#include "landseg/mask.hpp"
#include "landseg/metrics.hpp"
#include "landseg/model.hpp"

namespace landseg {

// Segment a scene of arbitrary size: tiles on the even grid, per-tile
// logits, overlapping regions merged by averaging logits before the
// argmax. An image of exactly tile_size matches predict_mask bit for
// bit. Tiles run in parallel; the merge order is fixed, so the result
// does not depend on completion order.
LabelMask tiled_inference(const RasterImage& image, const Model& model, int tile_size = 512);

// Per-class area percentages at two timestamps plus their deltas.
struct ChangeReport {
  std::string location_label;
  std::string t1_label;
  std::string t2_label;
  ClassPercentages t1;
  ClassPercentages t2;
  std::array<double, kNumClasses> deltas{};  // fraction deltas, t2 - t1
};

ChangeReport report_from_masks(const LabelMask& mask_t1, const LabelMask& mask_t2,
                               const std::string& location_label, const std::string& t1_label,
                               const std::string& t2_label);

struct ChangeResult {
  ChangeReport report;
  LabelMask mask_t1;
  LabelMask mask_t2;
};

// Segment both timestamps (dimensions may differ; percentages are area
// fractions) and fill the report.
ChangeResult detect_change(const RasterImage& image_t1, const RasterImage& image_t2,
                           const Model& model, const std::string& location_label,
                           const std::string& t1_label, const std::string& t2_label,
                           int tile_size = 512);

enum class ReportFormat { markdown, csv };

// Deterministic text rendering, percentages at one decimal place.
// `drop_zero_classes` hides classes at 0% in both timestamps.
std::string render_report(const ChangeReport& report, ReportFormat format,
                          bool drop_zero_classes = false);

}  // namespace landseg
