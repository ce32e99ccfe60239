#include "landseg/metrics.hpp"

#include <cstdio>

#include "landseg/error.hpp"

namespace landseg {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (const auto& row : counts)
    for (std::uint64_t v : row) t += v;
  return t;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (int g = 0; g < kNumClasses; ++g)
    for (int p = 0; p < kNumClasses; ++p)
      counts[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)] +=
          other.counts[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)];
  return *this;
}

ConfusionMatrix confusion(const LabelMask& pred, const LabelMask& gt) {
  if (pred.width != gt.width || pred.height != gt.height) {
    throw DimensionError("confusion: prediction " + std::to_string(pred.width) + "x" +
                         std::to_string(pred.height) + " vs ground truth " +
                         std::to_string(gt.width) + "x" + std::to_string(gt.height));
  }
  pred.validate();
  gt.validate();
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < gt.classes.size(); ++i) {
    ++cm.counts[gt.classes[i]][pred.classes[i]];
  }
  return cm;
}

IouPerClass iou_per_class(const ConfusionMatrix& cm) {
  IouPerClass iou{};
  for (int c = 0; c < kNumClasses; ++c) {
    const std::size_t ci = static_cast<std::size_t>(c);
    std::uint64_t gt_total = 0, pred_total = 0;
    for (int o = 0; o < kNumClasses; ++o) {
      gt_total += cm.counts[ci][static_cast<std::size_t>(o)];
      pred_total += cm.counts[static_cast<std::size_t>(o)][ci];
    }
    const std::uint64_t intersection = cm.counts[ci][ci];
    const std::uint64_t union_count = gt_total + pred_total - intersection;
    if (union_count == 0) {
      iou[ci] = std::nullopt;  // class absent from both masks
    } else {
      iou[ci] = static_cast<double>(intersection) / static_cast<double>(union_count);
    }
  }
  return iou;
}

double mean_iou(const IouPerClass& per_class, bool exclude_unknown) {
  double sum = 0.0;
  int defined = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    if (exclude_unknown && c == kClassUnknown) continue;
    if (per_class[static_cast<std::size_t>(c)]) {
      sum += *per_class[static_cast<std::size_t>(c)];
      ++defined;
    }
  }
  if (defined == 0) throw DataError("mean IoU over an empty evaluation: no class is defined");
  return sum / defined;
}

ClassPercentages class_percentages(const LabelMask& mask) {
  mask.validate();
  if (mask.classes.empty()) throw DataError("class percentages of an empty mask");
  ClassPercentages pct;
  for (std::uint8_t c : mask.classes) ++pct.counts[c];
  pct.total = mask.classes.size();
  return pct;
}

std::string iou_csv(const IouPerClass& per_class) {
  std::string out = "class,iou\n";
  char buf[64];
  for (int c = 0; c < kNumClasses; ++c) {
    if (per_class[static_cast<std::size_t>(c)]) {
      std::snprintf(buf, sizeof buf, "%s,%.6f\n", kClassNames[static_cast<std::size_t>(c)],
                    *per_class[static_cast<std::size_t>(c)]);
    } else {
      std::snprintf(buf, sizeof buf, "%s,\n", kClassNames[static_cast<std::size_t>(c)]);
    }
    out += buf;
  }
  return out;
}

std::string percentages_csv(const ClassPercentages& pct) {
  std::string out = "class,percent\n";
  char buf[64];
  for (int c = 0; c < kNumClasses; ++c) {
    std::snprintf(buf, sizeof buf, "%s,%.1f\n", kClassNames[static_cast<std::size_t>(c)],
                  pct.fraction(c) * 100.0);
    out += buf;
  }
  return out;
}

}  // namespace landseg
