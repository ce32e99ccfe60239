#pragma once

#include <cassert>
#include <cstddef>
#include <string>
#include <vector>

#include "landseg/error.hpp"

namespace landseg {

// Dense rank-4 layout: (batch N, channels C, height H, width W), row-major.
struct Shape4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
           static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }

  bool operator==(const Shape4&) const = default;

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
};

// Dense rank-4 tensor. Scalar type is a template parameter: float for
// normal operation, double for wide-precision gradient verification.
// `grad` is either empty or exactly data.size() long.
template <typename T>
struct TensorT {
  Shape4 shape;
  std::vector<T> data;
  std::vector<T> grad;

  TensorT() = default;

  explicit TensorT(Shape4 s) : shape(s), data(s.count(), T(0)) {}

  TensorT(Shape4 s, std::vector<T> values) : shape(s), data(std::move(values)) {
    if (data.size() != shape.count()) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape.str());
    }
  }

  std::size_t idx(int n, int c, int y, int x) const {
    assert(n >= 0 && n < shape.n && c >= 0 && c < shape.c);
    assert(y >= 0 && y < shape.h && x >= 0 && x < shape.w);
    return ((static_cast<std::size_t>(n) * shape.c + c) * shape.h + y) * shape.w + x;
  }

  T& at(int n, int c, int y, int x) { return data[idx(n, c, y, x)]; }
  T at(int n, int c, int y, int x) const { return data[idx(n, c, y, x)]; }

  std::size_t size() const { return data.size(); }

  // Pointer to the start of one (n, c) plane.
  T* plane(int n, int c) { return data.data() + idx(n, c, 0, 0); }
  const T* plane(int n, int c) const { return data.data() + idx(n, c, 0, 0); }
};

using Tensor = TensorT<float>;

template <typename To, typename From>
TensorT<To> tensor_cast(const TensorT<From>& src) {
  TensorT<To> out(src.shape);
  for (std::size_t i = 0; i < src.data.size(); ++i) out.data[i] = static_cast<To>(src.data[i]);
  return out;
}

}  // namespace landseg
