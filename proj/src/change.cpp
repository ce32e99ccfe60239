#include "landseg/change.hpp"

#include <cctype>
#include <cstdio>
#include <future>
#include <thread>
#include <vector>

#include "landseg/tiling.hpp"

namespace landseg {

LabelMask tiled_inference(const RasterImage& image, const Model& model, int tile_size) {
  image.validate();
  if (tile_size < 1 || tile_size % model.config.output_stride != 0) {
    throw ParameterError("tile size must be a positive multiple of the output stride " +
                         std::to_string(model.config.output_stride));
  }
  if (image.width < tile_size || image.height < tile_size) {
    throw ParameterError("image " + std::to_string(image.width) + "x" +
                         std::to_string(image.height) + " is smaller than tile size " +
                         std::to_string(tile_size) + "; resize or pad it upstream");
  }

  const std::vector<TileOrigin> grid = tile_grid(image.width, image.height, tile_size);
  const std::size_t area = static_cast<std::size_t>(image.width) * image.height;
  const int classes = model.config.num_classes;

  std::vector<float> logit_sum(static_cast<std::size_t>(classes) * area, 0.0f);
  std::vector<std::uint16_t> cover(area, 0);

  // Tiles run in parallel, but merging happens in fixed grid order, so
  // the result is independent of completion order.
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), 4));
  for (std::size_t base = 0; base < grid.size(); base += workers) {
    const std::size_t chunk = std::min(workers, grid.size() - base);
    std::vector<std::future<Tensor>> futures;
    futures.reserve(chunk);
    for (std::size_t t = 0; t < chunk; ++t) {
      const TileOrigin origin = grid[base + t];
      futures.push_back(std::async(std::launch::async, [&, origin]() {
        const RasterImage tile = crop_image(image, origin.x, origin.y, tile_size, tile_size);
        return model_forward(model, image_to_tensor(tile));
      }));
    }
    for (std::size_t t = 0; t < chunk; ++t) {
      const Tensor logits = futures[t].get();
      const TileOrigin origin = grid[base + t];
      for (int c = 0; c < classes; ++c) {
        const float* src = logits.plane(0, c);
        float* dst = logit_sum.data() + static_cast<std::size_t>(c) * area;
        for (int y = 0; y < tile_size; ++y) {
          const std::size_t row =
              static_cast<std::size_t>(origin.y + y) * image.width + static_cast<std::size_t>(origin.x);
          for (int x = 0; x < tile_size; ++x) {
            dst[row + static_cast<std::size_t>(x)] +=
                src[static_cast<std::size_t>(y) * tile_size + x];
          }
        }
      }
      for (int y = 0; y < tile_size; ++y) {
        const std::size_t row =
            static_cast<std::size_t>(origin.y + y) * image.width + static_cast<std::size_t>(origin.x);
        for (int x = 0; x < tile_size; ++x) ++cover[row + static_cast<std::size_t>(x)];
      }
    }
  }

  LabelMask mask(image.width, image.height);
  for (std::size_t px = 0; px < area; ++px) {
    const float norm = static_cast<float>(cover[px]);
    int best = 0;
    float best_v = logit_sum[px] / norm;
    for (int c = 1; c < classes; ++c) {
      const float v = logit_sum[static_cast<std::size_t>(c) * area + px] / norm;
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    mask.classes[px] = static_cast<std::uint8_t>(best);
  }
  return mask;
}

ChangeReport report_from_masks(const LabelMask& mask_t1, const LabelMask& mask_t2,
                               const std::string& location_label, const std::string& t1_label,
                               const std::string& t2_label) {
  ChangeReport report;
  report.location_label = location_label;
  report.t1_label = t1_label;
  report.t2_label = t2_label;
  report.t1 = class_percentages(mask_t1);
  report.t2 = class_percentages(mask_t2);
  for (int c = 0; c < kNumClasses; ++c) {
    report.deltas[static_cast<std::size_t>(c)] = report.t2.fraction(c) - report.t1.fraction(c);
  }
  return report;
}

ChangeResult detect_change(const RasterImage& image_t1, const RasterImage& image_t2,
                           const Model& model, const std::string& location_label,
                           const std::string& t1_label, const std::string& t2_label,
                           int tile_size) {
  ChangeResult result;
  try {
    result.mask_t1 = tiled_inference(image_t1, model, tile_size);
  } catch (const ParameterError& e) {
    throw ParameterError("image at t1 (" + t1_label + "): " + e.what());
  }
  try {
    result.mask_t2 = tiled_inference(image_t2, model, tile_size);
  } catch (const ParameterError& e) {
    throw ParameterError("image at t2 (" + t2_label + "): " + e.what());
  }
  result.report = report_from_masks(result.mask_t1, result.mask_t2, location_label, t1_label,
                                    t2_label);
  return result;
}

namespace {

std::string display_name(int cls) {
  std::string name = kClassNames[static_cast<std::size_t>(cls)];
  if (!name.empty()) name[0] = static_cast<char>(std::toupper(name[0]));
  return name;
}

std::string percent_str(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", fraction * 100.0);
  return buf;
}

std::string delta_str(double fraction_delta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f", fraction_delta * 100.0);
  return buf;
}

bool skip_class(const ChangeReport& r, int c, bool drop_zero) {
  return drop_zero && r.t1.counts[static_cast<std::size_t>(c)] == 0 &&
         r.t2.counts[static_cast<std::size_t>(c)] == 0;
}

}  // namespace

std::string render_report(const ChangeReport& report, ReportFormat format,
                          bool drop_zero_classes) {
  std::string out;
  if (format == ReportFormat::markdown) {
    out += "# Land cover change: " + report.location_label + "\n\n";
    out += "| Land cover type | " + report.t1_label + " | " + report.t2_label +
           " | Delta (points) |\n";
    out += "| --- | ---: | ---: | ---: |\n";
    for (int c = 0; c < kNumClasses; ++c) {
      if (skip_class(report, c, drop_zero_classes)) continue;
      out += "| " + display_name(c) + " | " + percent_str(report.t1.fraction(c)) + " | " +
             percent_str(report.t2.fraction(c)) + " | " +
             delta_str(report.deltas[static_cast<std::size_t>(c)]) + " |\n";
    }
    return out;
  }

  out += "class,t1_percent,t2_percent,delta_points\n";
  char buf[96];
  for (int c = 0; c < kNumClasses; ++c) {
    if (skip_class(report, c, drop_zero_classes)) continue;
    std::snprintf(buf, sizeof buf, "%s,%.1f,%.1f,%+.1f\n",
                  kClassNames[static_cast<std::size_t>(c)], report.t1.fraction(c) * 100.0,
                  report.t2.fraction(c) * 100.0,
                  report.deltas[static_cast<std::size_t>(c)] * 100.0);
    out += buf;
  }
  return out;
}

}  // namespace landseg
