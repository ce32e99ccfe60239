#pragma once

// Forward operations and their exact reverse-mode gradients for rank-4
// tensors. Convolution is implemented in patch-matrix (im2col + GEMM)
// form; every backward here is the analytic adjoint of its forward and
// is checked against central finite differences in the test suites.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "landseg/error.hpp"
#include "landseg/mask.hpp"
#include "landseg/tensor.hpp"

namespace landseg {

enum class Padding { same, valid };

struct ConvParams {
  int kernel_size = 3;
  int stride = 1;
  int dilation_rate = 1;
  Padding padding = Padding::same;
  int in_channels = 0;
  int out_channels = 0;
};

// Footprint width of a dilated kernel: k weights with r-1 zeros between
// adjacent ones.
inline int effective_extent(int k, int r) {
  if (k < 1 || r < 1) {
    throw ParameterError("kernel size and dilation rate must be >= 1, got k=" + std::to_string(k) +
                         " r=" + std::to_string(r));
  }
  return k + (k - 1) * (r - 1);
}

struct ConvGeometry {
  int out_h = 0;
  int out_w = 0;
  int pad_top = 0;
  int pad_left = 0;
};

// Output dims and padding for one spatial plane. Same-padding keeps
// out = ceil(in / stride) and, when the total pad is odd, puts the extra
// pixel on the bottom/right.
inline ConvGeometry conv_geometry(int h, int w, const ConvParams& p) {
  if (p.stride < 1 || p.dilation_rate < 1) {
    throw ParameterError("stride and dilation rate must be positive, got stride=" +
                         std::to_string(p.stride) + " dilation=" +
                         std::to_string(p.dilation_rate));
  }
  const int eff = effective_extent(p.kernel_size, p.dilation_rate);
  if (p.padding == Padding::same) {
    ConvGeometry g;
    g.out_h = (h + p.stride - 1) / p.stride;
    g.out_w = (w + p.stride - 1) / p.stride;
    const int pad_h = std::max((g.out_h - 1) * p.stride + eff - h, 0);
    const int pad_w = std::max((g.out_w - 1) * p.stride + eff - w, 0);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
    return g;
  }
  if (h < eff || w < eff) {
    throw DimensionError("valid-padding input " + std::to_string(h) + "x" + std::to_string(w) +
                         " is smaller than the effective kernel extent " + std::to_string(eff));
  }
  return ConvGeometry{(h - eff) / p.stride + 1, (w - eff) / p.stride + 1, 0, 0};
}

namespace detail {

// c(m x n) += a(m x kk) * b(kk x n), all row-major. The j-inner loop is
// what the compiler vectorizes; accumulation order is fixed so results
// are bit-reproducible run to run.
template <typename T>
void gemm_nn_acc(int m, int n, int kk, const T* a, const T* b, T* c) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < kk; ++p) {
      const T a_ip = a[static_cast<std::size_t>(i) * kk + p];
      if (a_ip == T(0)) continue;
      const T* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += a_ip * brow[j];
    }
  }
}

template <typename T>
void gemm_nn(int m, int n, int kk, const T* a, const T* b, T* c) {
  std::fill(c, c + static_cast<std::size_t>(m) * n, T(0));
  gemm_nn_acc(m, n, kk, a, b, c);
}

template <typename T>
void transpose(int rows, int cols, const T* src, T* dst) {
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      dst[static_cast<std::size_t>(j) * rows + i] = src[static_cast<std::size_t>(i) * cols + j];
}

// Gather dilated patches of one batch item into cols(C*k*k x outH*outW).
// Out-of-bounds taps read as zero.
template <typename T>
void im2col(const T* src, int c_in, int h, int w, const ConvParams& p, const ConvGeometry& g,
            T* cols) {
  const int k = p.kernel_size;
  const int r = p.dilation_rate;
  const std::size_t patch = static_cast<std::size_t>(g.out_h) * g.out_w;
  for (int c = 0; c < c_in; ++c) {
    const T* plane = src + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * patch;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * p.stride - g.pad_top + ky * r;
          T* out = row + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= h) {
            std::fill(out, out + g.out_w, T(0));
            continue;
          }
          const T* in_row = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * p.stride - g.pad_left + kx * r;
            out[ox] = (ix >= 0 && ix < w) ? in_row[ix] : T(0);
          }
        }
      }
    }
  }
}

// Scatter-add of patch gradients back onto one batch item.
template <typename T>
void col2im_acc(const T* cols, int c_in, int h, int w, const ConvParams& p, const ConvGeometry& g,
                T* dst) {
  const int k = p.kernel_size;
  const int r = p.dilation_rate;
  const std::size_t patch = static_cast<std::size_t>(g.out_h) * g.out_w;
  for (int c = 0; c < c_in; ++c) {
    T* plane = dst + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * patch;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * p.stride - g.pad_top + ky * r;
          if (iy < 0 || iy >= h) continue;
          T* in_row = plane + static_cast<std::size_t>(iy) * w;
          const T* grad_row = row + static_cast<std::size_t>(oy) * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * p.stride - g.pad_left + kx * r;
            if (ix >= 0 && ix < w) in_row[ix] += grad_row[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void check_conv_operands(const TensorT<T>& input, const TensorT<T>& weights,
                         const std::vector<T>* bias, const ConvParams& p) {
  const Shape4 expect{p.out_channels, p.in_channels, p.kernel_size, p.kernel_size};
  if (weights.shape != expect) {
    throw DimensionError("conv weights " + weights.shape.str() + " do not match params " +
                         expect.str());
  }
  if (input.shape.c != p.in_channels) {
    throw DimensionError("conv input has " + std::to_string(input.shape.c) + " channels, params say " +
                         std::to_string(p.in_channels));
  }
  if (bias && !bias->empty() && static_cast<int>(bias->size()) != p.out_channels) {
    throw DimensionError("conv bias has " + std::to_string(bias->size()) + " entries for " +
                         std::to_string(p.out_channels) + " output channels");
  }
}

}  // namespace detail

template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weights, const std::vector<T>& bias,
                  const ConvParams& p) {
  detail::check_conv_operands(input, weights, &bias, p);
  const ConvGeometry g = conv_geometry(input.shape.h, input.shape.w, p);
  const int kk = p.in_channels * p.kernel_size * p.kernel_size;
  const std::size_t patch = static_cast<std::size_t>(g.out_h) * g.out_w;

  TensorT<T> out(Shape4{input.shape.n, p.out_channels, g.out_h, g.out_w});
  std::vector<T> cols(static_cast<std::size_t>(kk) * patch);
  for (int n = 0; n < input.shape.n; ++n) {
    detail::im2col(input.plane(n, 0), p.in_channels, input.shape.h, input.shape.w, p, g,
                   cols.data());
    detail::gemm_nn(p.out_channels, static_cast<int>(patch), kk, weights.data.data(), cols.data(),
                    out.plane(n, 0));
    if (!bias.empty()) {
      for (int oc = 0; oc < p.out_channels; ++oc) {
        T* plane = out.plane(n, oc);
        const T b = bias[oc];
        for (std::size_t i = 0; i < patch; ++i) plane[i] += b;
      }
    }
  }
  return out;
}

template <typename T>
struct ConvGrads {
  TensorT<T> input_grad;
  TensorT<T> weight_grad;
  std::vector<T> bias_grad;
};

template <typename T>
ConvGrads<T> conv2d_backward(const TensorT<T>& output_grad, const TensorT<T>& saved_input,
                             const TensorT<T>& weights, const ConvParams& p) {
  detail::check_conv_operands<T>(saved_input, weights, nullptr, p);
  const ConvGeometry g = conv_geometry(saved_input.shape.h, saved_input.shape.w, p);
  const Shape4 out_shape{saved_input.shape.n, p.out_channels, g.out_h, g.out_w};
  if (output_grad.shape != out_shape) {
    throw DimensionError("conv output grad " + output_grad.shape.str() +
                         " does not match forward output " + out_shape.str());
  }

  const int kk = p.in_channels * p.kernel_size * p.kernel_size;
  const std::size_t patch = static_cast<std::size_t>(g.out_h) * g.out_w;

  ConvGrads<T> grads;
  grads.input_grad = TensorT<T>(saved_input.shape);
  grads.weight_grad = TensorT<T>(weights.shape);
  grads.bias_grad.assign(p.out_channels, T(0));

  std::vector<T> cols(static_cast<std::size_t>(kk) * patch);
  std::vector<T> cols_t(cols.size());
  std::vector<T> dcols(cols.size());
  std::vector<T> weights_t(weights.data.size());
  detail::transpose(p.out_channels, kk, weights.data.data(), weights_t.data());

  for (int n = 0; n < saved_input.shape.n; ++n) {
    const T* gout = output_grad.plane(n, 0);

    for (int oc = 0; oc < p.out_channels; ++oc) {
      const T* plane = gout + static_cast<std::size_t>(oc) * patch;
      T acc(0);
      for (std::size_t i = 0; i < patch; ++i) acc += plane[i];
      grads.bias_grad[oc] += acc;
    }

    detail::im2col(saved_input.plane(n, 0), p.in_channels, saved_input.shape.h,
                   saved_input.shape.w, p, g, cols.data());
    detail::transpose(kk, static_cast<int>(patch), cols.data(), cols_t.data());
    detail::gemm_nn_acc(p.out_channels, kk, static_cast<int>(patch), gout, cols_t.data(),
                        grads.weight_grad.data.data());

    detail::gemm_nn(kk, static_cast<int>(patch), p.out_channels, weights_t.data(), gout,
                    dcols.data());
    detail::col2im_acc(dcols.data(), p.in_channels, saved_input.shape.h, saved_input.shape.w, p, g,
                       grads.input_grad.plane(n, 0));
  }
  return grads;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> out(x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
  return out;
}

// Subgradient at exactly 0 is 0.
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& output_grad, const TensorT<T>& saved_input) {
  if (output_grad.shape != saved_input.shape) {
    throw DimensionError("relu grad shape " + output_grad.shape.str() + " vs input " +
                         saved_input.shape.str());
  }
  TensorT<T> out(saved_input.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = saved_input.data[i] > T(0) ? output_grad.data[i] : T(0);
  return out;
}

template <typename T>
TensorT<T> maxpool2d(const TensorT<T>& x, int window, int stride) {
  if (window < 1 || stride < 1) {
    throw ParameterError("maxpool window and stride must be >= 1");
  }
  if (window > x.shape.h || window > x.shape.w) {
    throw ParameterError("maxpool window " + std::to_string(window) + " exceeds input " +
                         std::to_string(x.shape.h) + "x" + std::to_string(x.shape.w));
  }
  const int oh = (x.shape.h - window) / stride + 1;
  const int ow = (x.shape.w - window) / stride + 1;
  TensorT<T> out(Shape4{x.shape.n, x.shape.c, oh, ow});
  for (int n = 0; n < x.shape.n; ++n) {
    for (int c = 0; c < x.shape.c; ++c) {
      const T* plane = x.plane(n, c);
      T* optr = out.plane(n, c);
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          T best = plane[static_cast<std::size_t>(oy * stride) * x.shape.w + ox * stride];
          for (int ky = 0; ky < window; ++ky) {
            const T* row = plane + static_cast<std::size_t>(oy * stride + ky) * x.shape.w;
            for (int kx = 0; kx < window; ++kx) {
              const T v = row[ox * stride + kx];
              if (v > best) best = v;
            }
          }
          optr[static_cast<std::size_t>(oy) * ow + ox] = best;
        }
      }
    }
  }
  return out;
}

// Ties route the gradient to the first maximum in row-major scan order.
template <typename T>
TensorT<T> maxpool2d_backward(const TensorT<T>& output_grad, const TensorT<T>& saved_input,
                              int window, int stride) {
  if (window < 1 || stride < 1 || window > saved_input.shape.h || window > saved_input.shape.w) {
    throw ParameterError("maxpool window " + std::to_string(window) + " invalid for input " +
                         saved_input.shape.str());
  }
  const int oh = (saved_input.shape.h - window) / stride + 1;
  const int ow = (saved_input.shape.w - window) / stride + 1;
  const Shape4 out_shape{saved_input.shape.n, saved_input.shape.c, oh, ow};
  if (output_grad.shape != out_shape) {
    throw DimensionError("maxpool grad shape " + output_grad.shape.str() + " vs expected " +
                         out_shape.str());
  }
  TensorT<T> grad(saved_input.shape);
  for (int n = 0; n < saved_input.shape.n; ++n) {
    for (int c = 0; c < saved_input.shape.c; ++c) {
      const T* plane = saved_input.plane(n, c);
      T* gplane = grad.plane(n, c);
      const T* gout = output_grad.plane(n, c);
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          int best_y = oy * stride, best_x = ox * stride;
          T best = plane[static_cast<std::size_t>(best_y) * saved_input.shape.w + best_x];
          for (int ky = 0; ky < window; ++ky) {
            for (int kx = 0; kx < window; ++kx) {
              const int iy = oy * stride + ky, ix = ox * stride + kx;
              const T v = plane[static_cast<std::size_t>(iy) * saved_input.shape.w + ix];
              if (v > best) {
                best = v;
                best_y = iy;
                best_x = ix;
              }
            }
          }
          gplane[static_cast<std::size_t>(best_y) * saved_input.shape.w + best_x] +=
              gout[static_cast<std::size_t>(oy) * ow + ox];
        }
      }
    }
  }
  return grad;
}

template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& x) {
  if (x.shape.h < 1 || x.shape.w < 1) {
    throw ParameterError("global_avg_pool needs non-empty spatial dims, got " + x.shape.str());
  }
  TensorT<T> out(Shape4{x.shape.n, x.shape.c, 1, 1});
  const std::size_t area = static_cast<std::size_t>(x.shape.h) * x.shape.w;
  for (int n = 0; n < x.shape.n; ++n) {
    for (int c = 0; c < x.shape.c; ++c) {
      const T* plane = x.plane(n, c);
      T acc(0);
      for (std::size_t i = 0; i < area; ++i) acc += plane[i];
      out.at(n, c, 0, 0) = acc / static_cast<T>(area);
    }
  }
  return out;
}

template <typename T>
TensorT<T> global_avg_pool_backward(const TensorT<T>& output_grad, const Shape4& input_shape) {
  const Shape4 expect{input_shape.n, input_shape.c, 1, 1};
  if (output_grad.shape != expect) {
    throw DimensionError("global_avg_pool grad shape " + output_grad.shape.str() + " vs expected " +
                         expect.str());
  }
  TensorT<T> grad(input_shape);
  const std::size_t area = static_cast<std::size_t>(input_shape.h) * input_shape.w;
  for (int n = 0; n < input_shape.n; ++n) {
    for (int c = 0; c < input_shape.c; ++c) {
      const T g = output_grad.at(n, c, 0, 0) / static_cast<T>(area);
      T* plane = grad.plane(n, c);
      for (std::size_t i = 0; i < area; ++i) plane[i] = g;
    }
  }
  return grad;
}

namespace detail {

// Corner-aligned source coordinate for output index o of out_dim samples
// over in_dim inputs. Exact at both ends.
inline double corner_aligned_coord(int o, int in_dim, int out_dim) {
  if (out_dim <= 1 || in_dim <= 1) return 0.0;
  return static_cast<double>(o) * (in_dim - 1) / (out_dim - 1);
}

}  // namespace detail

// Corner-aligned bilinear interpolation: input corner values appear
// exactly at output corners, and constant inputs stay constant.
template <typename T>
TensorT<T> bilinear_upsample(const TensorT<T>& x, int factor) {
  if (factor < 1) throw ParameterError("upsample factor must be >= 1");
  if (factor == 1) return x;
  const int oh = x.shape.h * factor;
  const int ow = x.shape.w * factor;
  TensorT<T> out(Shape4{x.shape.n, x.shape.c, oh, ow});
  for (int oy = 0; oy < oh; ++oy) {
    const double sy = detail::corner_aligned_coord(oy, x.shape.h, oh);
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, x.shape.h - 1);
    const T ty = static_cast<T>(sy - y0);
    for (int ox = 0; ox < ow; ++ox) {
      const double sx = detail::corner_aligned_coord(ox, x.shape.w, ow);
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, x.shape.w - 1);
      const T tx = static_cast<T>(sx - x0);
      for (int n = 0; n < x.shape.n; ++n) {
        for (int c = 0; c < x.shape.c; ++c) {
          const T v00 = x.at(n, c, y0, x0), v01 = x.at(n, c, y0, x1);
          const T v10 = x.at(n, c, y1, x0), v11 = x.at(n, c, y1, x1);
          const T top = v00 + tx * (v01 - v00);
          const T bot = v10 + tx * (v11 - v10);
          out.at(n, c, oy, ox) = top + ty * (bot - top);
        }
      }
    }
  }
  return out;
}

template <typename T>
TensorT<T> bilinear_upsample_backward(const TensorT<T>& output_grad, const Shape4& input_shape,
                                      int factor) {
  if (factor < 1) throw ParameterError("upsample factor must be >= 1");
  const Shape4 expect{input_shape.n, input_shape.c, input_shape.h * factor,
                      input_shape.w * factor};
  if (output_grad.shape != expect) {
    throw DimensionError("upsample grad shape " + output_grad.shape.str() + " vs expected " +
                         expect.str());
  }
  if (factor == 1) return output_grad;
  TensorT<T> grad(input_shape);
  for (int oy = 0; oy < expect.h; ++oy) {
    const double sy = detail::corner_aligned_coord(oy, input_shape.h, expect.h);
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, input_shape.h - 1);
    const T ty = static_cast<T>(sy - y0);
    for (int ox = 0; ox < expect.w; ++ox) {
      const double sx = detail::corner_aligned_coord(ox, input_shape.w, expect.w);
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, input_shape.w - 1);
      const T tx = static_cast<T>(sx - x0);
      for (int n = 0; n < input_shape.n; ++n) {
        for (int c = 0; c < input_shape.c; ++c) {
          const T g = output_grad.at(n, c, oy, ox);
          grad.at(n, c, y0, x0) += g * (T(1) - ty) * (T(1) - tx);
          grad.at(n, c, y0, x1) += g * (T(1) - ty) * tx;
          grad.at(n, c, y1, x0) += g * ty * (T(1) - tx);
          grad.at(n, c, y1, x1) += g * ty * tx;
        }
      }
    }
  }
  return grad;
}

// (N,C,1,1) -> (N,C,h,w) by value replication; the image-pooling branch
// uses this to restore spatial dims after global average pooling.
template <typename T>
TensorT<T> broadcast_spatial(const TensorT<T>& x, int h, int w) {
  if (x.shape.h != 1 || x.shape.w != 1) {
    throw DimensionError("broadcast_spatial expects (N,C,1,1) input, got " + x.shape.str());
  }
  TensorT<T> out(Shape4{x.shape.n, x.shape.c, h, w});
  const std::size_t area = static_cast<std::size_t>(h) * w;
  for (int n = 0; n < x.shape.n; ++n) {
    for (int c = 0; c < x.shape.c; ++c) {
      const T v = x.at(n, c, 0, 0);
      T* plane = out.plane(n, c);
      for (std::size_t i = 0; i < area; ++i) plane[i] = v;
    }
  }
  return out;
}

template <typename T>
TensorT<T> broadcast_spatial_backward(const TensorT<T>& output_grad) {
  TensorT<T> grad(Shape4{output_grad.shape.n, output_grad.shape.c, 1, 1});
  const std::size_t area = static_cast<std::size_t>(output_grad.shape.h) * output_grad.shape.w;
  for (int n = 0; n < output_grad.shape.n; ++n) {
    for (int c = 0; c < output_grad.shape.c; ++c) {
      const T* plane = output_grad.plane(n, c);
      T acc(0);
      for (std::size_t i = 0; i < area; ++i) acc += plane[i];
      grad.at(n, c, 0, 0) = acc;
    }
  }
  return grad;
}

// Channel concatenation; a's channels precede b's.
template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.shape.n != b.shape.n || a.shape.h != b.shape.h || a.shape.w != b.shape.w) {
    throw DimensionError("concat_channels operands disagree: " + a.shape.str() + " vs " +
                         b.shape.str());
  }
  TensorT<T> out(Shape4{a.shape.n, a.shape.c + b.shape.c, a.shape.h, a.shape.w});
  const std::size_t area = static_cast<std::size_t>(a.shape.h) * a.shape.w;
  for (int n = 0; n < a.shape.n; ++n) {
    if (a.shape.c > 0)
      std::copy(a.plane(n, 0), a.plane(n, 0) + static_cast<std::size_t>(a.shape.c) * area,
                out.plane(n, 0));
    if (b.shape.c > 0)
      std::copy(b.plane(n, 0), b.plane(n, 0) + static_cast<std::size_t>(b.shape.c) * area,
                out.plane(n, a.shape.c));
  }
  return out;
}

// Channel slice [c_begin, c_begin + c_count); the adjoint of concat.
template <typename T>
TensorT<T> slice_channels(const TensorT<T>& x, int c_begin, int c_count) {
  if (c_begin < 0 || c_count < 0 || c_begin + c_count > x.shape.c) {
    throw DimensionError("slice [" + std::to_string(c_begin) + ", " +
                         std::to_string(c_begin + c_count) + ") out of " +
                         std::to_string(x.shape.c) + " channels");
  }
  TensorT<T> out(Shape4{x.shape.n, c_count, x.shape.h, x.shape.w});
  const std::size_t area = static_cast<std::size_t>(x.shape.h) * x.shape.w;
  for (int n = 0; n < x.shape.n; ++n) {
    if (c_count > 0)
      std::copy(x.plane(n, c_begin), x.plane(n, c_begin) + static_cast<std::size_t>(c_count) * area,
                out.plane(n, 0));
  }
  return out;
}

template <typename T>
std::pair<TensorT<T>, TensorT<T>> split_channels(const TensorT<T>& x, int c_a) {
  return {slice_channels(x, 0, c_a), slice_channels(x, c_a, x.shape.c - c_a)};
}

template <typename T>
struct LossResult {
  double loss = 0.0;
  TensorT<T> logit_grad;
  std::size_t pixels = 0;  // non-ignored pixels the mean ran over
};

// Mean softmax cross-entropy over non-ignored pixels, with the logit
// gradient of that mean: (softmax - onehot) / count per scored pixel.
template <typename T>
LossResult<T> softmax_cross_entropy(const TensorT<T>& logits,
                                    const std::vector<LabelMask>& targets,
                                    std::optional<int> ignore_class = std::nullopt) {
  if (static_cast<int>(targets.size()) != logits.shape.n) {
    throw DimensionError("loss got " + std::to_string(targets.size()) + " target masks for batch " +
                         std::to_string(logits.shape.n));
  }
  const int classes = logits.shape.c;
  const int h = logits.shape.h, w = logits.shape.w;
  for (const LabelMask& m : targets) {
    if (m.width != w || m.height != h) {
      throw DimensionError("target mask " + std::to_string(m.width) + "x" +
                           std::to_string(m.height) + " vs logits " + logits.shape.str());
    }
  }

  LossResult<T> result;
  result.logit_grad = TensorT<T>(logits.shape);
  double loss_sum = 0.0;
  std::size_t count = 0;
  const std::size_t area = static_cast<std::size_t>(h) * w;

  std::vector<T> probs(classes);
  for (int n = 0; n < logits.shape.n; ++n) {
    const T* base = logits.plane(n, 0);
    T* gbase = result.logit_grad.plane(n, 0);
    for (std::size_t px = 0; px < area; ++px) {
      const int target = targets[static_cast<std::size_t>(n)].classes[px];
      if (target >= classes) {
        throw DataError("target class " + std::to_string(target) + " outside 0.." +
                        std::to_string(classes - 1));
      }
      if (ignore_class && target == *ignore_class) continue;
      T max_logit = base[px];
      for (int c = 1; c < classes; ++c) max_logit = std::max(max_logit, base[c * area + px]);
      T denom(0);
      for (int c = 0; c < classes; ++c) {
        probs[c] = std::exp(base[c * area + px] - max_logit);
        denom += probs[c];
      }
      loss_sum -= static_cast<double>(base[target * area + px] - max_logit) -
                  std::log(static_cast<double>(denom));
      for (int c = 0; c < classes; ++c)
        gbase[c * area + px] = probs[c] / denom - (c == target ? T(1) : T(0));
      ++count;
    }
  }

  if (count == 0) {
    return result;  // loss 0, zero gradient
  }
  result.loss = loss_sum / static_cast<double>(count);
  result.pixels = count;
  const T scale = T(1) / static_cast<T>(count);
  for (T& g : result.logit_grad.data) g *= scale;
  return result;
}

}  // namespace landseg
