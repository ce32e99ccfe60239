#pragma once

// Shared test helpers: random fixtures and finite-difference oracles.
// Everything here is independent of the library's backward passes; the
// numeric gradients come from forward evaluations only.

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "landseg/mask.hpp"
#include "landseg/rng.hpp"
#include "landseg/tensor.hpp"

namespace landseg::testing {

template <typename T>
TensorT<T> random_tensor(Shape4 shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  TensorT<T> t(shape);
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

inline LabelMask random_mask(int w, int h, Rng& rng, int num_classes = kNumClasses) {
  LabelMask m(w, h);
  for (auto& c : m.classes) c = static_cast<std::uint8_t>(rng.index(static_cast<std::size_t>(num_classes)));
  return m;
}

// Central finite differences of a scalar function over a parameter
// vector, evaluated in place.
template <typename LossFn>
std::vector<double> central_diff(LossFn&& loss, std::vector<double>& params, double step = 1e-5) {
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = params[i];
    params[i] = orig + step;
    const double up = loss();
    params[i] = orig - step;
    const double down = loss();
    params[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

struct GradCompare {
  bool ok = true;
  double worst = 0.0;       // worst relative error seen
  std::size_t at = 0;
  double analytic = 0.0;
  double numeric = 0.0;

  std::string describe() const {
    return "worst rel err " + std::to_string(worst) + " at index " + std::to_string(at) +
           " (analytic " + std::to_string(analytic) + ", numeric " + std::to_string(numeric) + ")";
  }
};

inline GradCompare compare_grads(const std::vector<double>& analytic,
                                 const std::vector<double>& numeric, double rtol = 1e-4,
                                 double atol = 1e-7) {
  GradCompare r;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double diff = std::abs(analytic[i] - numeric[i]);
    const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
    const double rel = diff / std::max(scale, atol / rtol);
    if (rel > r.worst) {
      r.worst = rel;
      r.at = i;
      r.analytic = analytic[i];
      r.numeric = numeric[i];
    }
    if (diff > rtol * scale + atol) r.ok = false;
  }
  return r;
}

}  // namespace landseg::testing
