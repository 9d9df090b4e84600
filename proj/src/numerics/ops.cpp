#include "fcanet/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>

#include <Eigen/Core>

#include "fcanet/common/errors.hpp"

namespace fcanet::numerics {

using detail::make_op;
using detail::Node;

namespace {

// Gradient buffer of `t`, or null when `t` does not take part in gradients.
template <std::floating_point T>
std::vector<T>* grad_of(const Tensor<T>& t) {
  if (!t.defined() || !t.requires_grad()) return nullptr;
  return &t.node().ensure_grad();
}

template <std::floating_point T>
const std::vector<T>& data_of(const Tensor<T>& t) {
  return t.node().data;
}

template <class T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Row-major matrix view over a flat buffer.
template <class T>
Eigen::Map<RowMajor<T>> rows_of(T* p, std::size_t r, std::size_t c) {
  return {p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)};
}
template <class T>
Eigen::Map<const RowMajor<T>> rows_of(const T* p, std::size_t r, std::size_t c) {
  return {p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)};
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

template <std::floating_point T>
T stable_sigmoid(T v) {
  if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}

template <std::floating_point T>
T activate(T v, Activation kind) {
  switch (kind) {
    case Activation::swish:
      return v * stable_sigmoid(v);
    case Activation::gelu:
      return T(0.5) * v * (T(1) + std::erf(v / std::numbers::sqrt2_v<T>));
    case Activation::relu:
      return v > T(0) ? v : T(0);
    case Activation::sigmoid:
      return stable_sigmoid(v);
  }
  return v;
}

template <std::floating_point T>
T activate_derivative(T v, Activation kind) {
  switch (kind) {
    case Activation::swish: {
      const T s = stable_sigmoid(v);
      return s * (T(1) + v * (T(1) - s));
    }
    case Activation::gelu: {
      const T cdf = T(0.5) * (T(1) + std::erf(v / std::numbers::sqrt2_v<T>));
      const T pdf = std::exp(T(-0.5) * v * v) * std::numbers::inv_sqrtpi_v<T> / std::numbers::sqrt2_v<T>;
      return cdf + v * pdf;
    }
    case Activation::relu:
      return v > T(0) ? T(1) : T(0);
    case Activation::sigmoid: {
      const T s = stable_sigmoid(v);
      return s * (T(1) - s);
    }
  }
  return T(1);
}

const char* activation_name(Activation kind) {
  switch (kind) {
    case Activation::swish: return "swish";
    case Activation::gelu: return "gelu";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "activation";
}

struct ConvGeometry {
  std::size_t batch = 1, channels = 0, h = 0, w = 0, kh = 0, kw = 0;
  std::size_t sh = 1, sw = 1;
  AxisGeometry gh, gw;
};

// Depthwise cross-correlation shared by the 1-D and 2-D entry points.
// Output columns j whose input column j*stride + tap - pad lies inside [0, len).
struct ColumnRange {
  std::size_t lo = 0, hi = 0;
};
ColumnRange valid_columns(std::size_t out, std::size_t len, std::size_t stride, std::size_t tap, std::size_t pad) {
  ColumnRange r;
  if (tap < pad) r.lo = (pad - tap + stride - 1) / stride;
  if (len + pad <= tap) return {0, 0};
  r.hi = std::min(out, (len - 1 + pad - tap) / stride + 1);
  if (r.hi < r.lo) r.hi = r.lo;
  return r;
}

// Eight interleaved partial sums so the unit-stride case vectorizes.
template <class T>
T strided_dot(const T* a, const T* b, std::size_t len, std::size_t stride) {
  T part[8] = {};
  std::size_t j = 0;
  if (stride == 1) {
    for (; j + 8 <= len; j += 8) {
      for (std::size_t l = 0; l < 8; ++l) part[l] += a[j + l] * b[j + l];
    }
  }
  for (; j < len; ++j) part[j % 8] += a[j] * b[j * stride];
  T acc = T(0);
  for (T p : part) acc += p;
  return acc;
}

// Taps are the outer loops so the column loop is contiguous; every output
// still sums its taps in (row, column) kernel order.
template <std::floating_point T>
Tensor<T> depthwise_impl(const char* kind, const Tensor<T>& x, const Tensor<T>& kernel,
                         const ConvGeometry& g, Shape out_dims) {
  auto forward = [x, kernel, g](Node<T>& out) {
    const auto& xd = data_of(x);
    const auto& kd = data_of(kernel);
    const std::size_t oh = g.gh.out, ow = g.gw.out;
    std::fill(out.data.begin(), out.data.end(), T(0));
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t c = 0; c < g.channels; ++c) {
        const T* xp = xd.data() + (n * g.channels + c) * g.h * g.w;
        const T* kp = kd.data() + c * g.kh * g.kw;
        T* op = out.data.data() + (n * g.channels + c) * oh * ow;
        for (std::size_t i = 0; i < oh; ++i) {
          for (std::size_t a = 0; a < g.kh; ++a) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(i * g.sh + a) - static_cast<std::ptrdiff_t>(g.gh.pad_lo);
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) continue;
            const T* row = xp + ih * g.w;
            for (std::size_t b = 0; b < g.kw; ++b) {
              const T k = kp[a * g.kw + b];
              const auto [lo, hi] = valid_columns(ow, g.w, g.sw, b, g.gw.pad_lo);
              if (lo == hi) continue;
              T* o = op + i * ow + lo;
              const T* src = row + (lo * g.sw + b - g.gw.pad_lo);
              for (std::size_t j = 0; j < hi - lo; ++j) o[j] += k * src[j * g.sw];
            }
          }
        }
      }
    }
  };
  auto backward = [x, kernel, g](const Node<T>& out) {
    auto* dx = grad_of(x);
    auto* dk = grad_of(kernel);
    const auto& xd = data_of(x);
    const auto& kd = data_of(kernel);
    const std::size_t oh = g.gh.out, ow = g.gw.out;
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t c = 0; c < g.channels; ++c) {
        const std::size_t xoff = (n * g.channels + c) * g.h * g.w;
        const std::size_t koff = c * g.kh * g.kw;
        const T* gp = out.grad.data() + (n * g.channels + c) * oh * ow;
        for (std::size_t i = 0; i < oh; ++i) {
          const T* grow = gp + i * ow;
          for (std::size_t a = 0; a < g.kh; ++a) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(i * g.sh + a) - static_cast<std::ptrdiff_t>(g.gh.pad_lo);
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) continue;
            for (std::size_t b = 0; b < g.kw; ++b) {
              const std::size_t ki = koff + a * g.kw + b;
              const auto [lo, hi] = valid_columns(ow, g.w, g.sw, b, g.gw.pad_lo);
              if (lo == hi) continue;
              const std::size_t base = xoff + ih * g.w + (lo * g.sw + b - g.gw.pad_lo);
              const T* gr = grow + lo;
              if (dx) {
                const T k = kd[ki];
                T* d = dx->data() + base;
                for (std::size_t j = 0; j < hi - lo; ++j) d[j * g.sw] += gr[j] * k;
              }
              if (dk) {
                (*dk)[ki] += strided_dot(gr, xd.data() + base, hi - lo, g.sw);
              }
            }
          }
        }
      }
    }
  };
  return make_op<T>(kind, std::move(out_dims), {x, kernel}, forward, backward);
}

void check_strides(std::size_t sh, std::size_t sw) {
  if (sh == 0 || sw == 0) throw ArgumentError("convolution stride must be positive");
}

template <std::floating_point T>
T row_tolerance() {
  return std::is_same_v<T, float> ? T(1e-4) : T(1e-9);
}

}  // namespace

double sigmoid(double v) { return stable_sigmoid(v); }

AxisGeometry conv_axis(std::size_t length, std::size_t kernel, std::size_t stride, Padding padding) {
  if (stride == 0) throw ArgumentError("convolution stride must be positive");
  if (kernel == 0) throw ShapeError("convolution kernel extent must be positive");
  AxisGeometry g;
  if (padding == Padding::valid) {
    if (kernel > length) {
      throw ShapeError("kernel extent " + std::to_string(kernel) + " exceeds input extent " +
                       std::to_string(length) + " under valid padding");
    }
    g.out = (length - kernel) / stride + 1;
    g.pad_lo = 0;
    return g;
  }
  g.out = (length + stride - 1) / stride;
  const std::size_t needed = (g.out - 1) * stride + kernel;
  const std::size_t total = needed > length ? needed - length : 0;
  g.pad_lo = total / 2;
  return g;
}

template <std::floating_point T>
BatchNormState<T>::BatchNormState(std::size_t channels)
    : gamma(Tensor<T>::full({channels}, T(1), true)),
      beta(Tensor<T>::zeros({channels}, true)),
      running_mean(channels, T(0)),
      running_var(channels, T(1)) {}

template <std::floating_point T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.dims() == b.dims(), "add: shapes " + shape_str(a.dims()) + " and " + shape_str(b.dims()));
  return make_op<T>(
      "add", a.dims(), {a, b},
      [a, b](Node<T>& out) {
        const auto& ad = data_of(a);
        const auto& bd = data_of(b);
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = ad[i] + bd[i];
      },
      [a, b](const Node<T>& out) {
        for (auto* g : {grad_of(a), grad_of(b)}) {
          if (!g) continue;
          for (std::size_t i = 0; i < out.grad.size(); ++i) (*g)[i] += out.grad[i];
        }
      });
}

template <std::floating_point T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.dims() == b.dims(), "mul: shapes " + shape_str(a.dims()) + " and " + shape_str(b.dims()));
  return make_op<T>(
      "mul", a.dims(), {a, b},
      [a, b](Node<T>& out) {
        const auto& ad = data_of(a);
        const auto& bd = data_of(b);
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = ad[i] * bd[i];
      },
      [a, b](const Node<T>& out) {
        const auto& ad = data_of(a);
        const auto& bd = data_of(b);
        if (auto* ga = grad_of(a)) {
          for (std::size_t i = 0; i < out.grad.size(); ++i) (*ga)[i] += out.grad[i] * bd[i];
        }
        if (auto* gb = grad_of(b)) {
          for (std::size_t i = 0; i < out.grad.size(); ++i) (*gb)[i] += out.grad[i] * ad[i];
        }
      });
}

template <std::floating_point T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return make_op<T>(
      "scale", a.dims(), {a},
      [a, factor](Node<T>& out) {
        const auto& ad = data_of(a);
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = ad[i] * factor;
      },
      [a, factor](const Node<T>& out) {
        if (auto* g = grad_of(a)) {
          for (std::size_t i = 0; i < out.grad.size(); ++i) (*g)[i] += out.grad[i] * factor;
        }
      });
}

template <std::floating_point T>
Tensor<T> activation(const Tensor<T>& x, Activation kind) {
  return make_op<T>(
      activation_name(kind), x.dims(), {x},
      [x, kind](Node<T>& out) {
        const auto& xd = data_of(x);
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = activate(xd[i], kind);
      },
      [x, kind](const Node<T>& out) {
        auto* g = grad_of(x);
        if (!g) return;
        const auto& xd = data_of(x);
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
          (*g)[i] += out.grad[i] * activate_derivative(xd[i], kind);
        }
      });
}

template <std::floating_point T>
Tensor<T> sum(const Tensor<T>& a) {
  return make_op<T>(
      "sum", {1}, {a},
      [a](Node<T>& out) {
        T acc = T(0);
        for (T v : data_of(a)) acc += v;
        out.data[0] = acc;
      },
      [a](const Node<T>& out) {
        if (auto* g = grad_of(a)) {
          for (T& v : *g) v += out.grad[0];
        }
      });
}

template <std::floating_point T>
Tensor<T> mean(const Tensor<T>& a) {
  const T inv = T(1) / static_cast<T>(a.numel());
  return make_op<T>(
      "mean", {1}, {a},
      [a, inv](Node<T>& out) {
        T acc = T(0);
        for (T v : data_of(a)) acc += v;
        out.data[0] = acc * inv;
      },
      [a, inv](const Node<T>& out) {
        if (auto* g = grad_of(a)) {
          for (T& v : *g) v += out.grad[0] * inv;
        }
      });
}

template <std::floating_point T>
Tensor<T> reshape(const Tensor<T>& a, const Shape& dims) {
  require(shape_numel(dims) == a.numel(),
          "reshape: cannot view " + shape_str(a.dims()) + " as " + shape_str(dims));
  return make_op<T>(
      "reshape", dims, {a},
      [a](Node<T>& out) { out.data = data_of(a); },
      [a](const Node<T>& out) {
        if (auto* g = grad_of(a)) {
          for (std::size_t i = 0; i < out.grad.size(); ++i) (*g)[i] += out.grad[i];
        }
      });
}

template <std::floating_point T>
Tensor<T> swap_last_axes(const Tensor<T>& a) {
  require(a.rank() >= 2, "swap_last_axes needs rank >= 2");
  Shape dims = a.dims();
  const std::size_t rows = dims[dims.size() - 2], cols = dims.back();
  std::swap(dims[dims.size() - 2], dims.back());
  const std::size_t outer = a.numel() / (rows * cols);
  return make_op<T>(
      "swap_last_axes", dims, {a},
      [a, outer, rows, cols](Node<T>& out) {
        const auto& ad = data_of(a);
        for (std::size_t o = 0; o < outer; ++o) {
          const T* src = ad.data() + o * rows * cols;
          T* dst = out.data.data() + o * rows * cols;
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
        }
      },
      [a, outer, rows, cols](const Node<T>& out) {
        auto* g = grad_of(a);
        if (!g) return;
        for (std::size_t o = 0; o < outer; ++o) {
          const T* src = out.grad.data() + o * rows * cols;
          T* dst = g->data() + o * rows * cols;
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) dst[r * cols + c] += src[c * rows + r];
        }
      });
}

template <std::floating_point T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& kernel, ConvOptions opts) {
  check_strides(opts.stride_h, opts.stride_w);
  require(x.rank() == 3 || x.rank() == 4, "depthwise_conv2d: input must be [N,C,H,W] or [C,H,W]");
  require(kernel.rank() == 3, "depthwise_conv2d: kernel must be [C,kH,kW]");
  const bool batched = x.rank() == 4;
  const std::size_t off = batched ? 1 : 0;
  ConvGeometry g;
  g.batch = batched ? x.dim(0) : 1;
  g.channels = x.dim(off);
  g.h = x.dim(off + 1);
  g.w = x.dim(off + 2);
  require(kernel.dim(0) == g.channels, "depthwise_conv2d: kernel has " + std::to_string(kernel.dim(0)) +
                                           " channels, input has " + std::to_string(g.channels));
  g.kh = kernel.dim(1);
  g.kw = kernel.dim(2);
  g.sh = opts.stride_h;
  g.sw = opts.stride_w;
  g.gh = conv_axis(g.h, g.kh, g.sh, opts.padding);
  g.gw = conv_axis(g.w, g.kw, g.sw, opts.padding);
  Shape out_dims = batched ? Shape{g.batch, g.channels, g.gh.out, g.gw.out}
                           : Shape{g.channels, g.gh.out, g.gw.out};
  return depthwise_impl("depthwise_conv2d", x, kernel, g, std::move(out_dims));
}

template <std::floating_point T>
Tensor<T> depthwise_conv1d(const Tensor<T>& x, const Tensor<T>& kernel, std::size_t stride,
                           Padding padding) {
  check_strides(stride, 1);
  require(x.rank() == 2 || x.rank() == 3, "depthwise_conv1d: input must be [N,C,L] or [C,L]");
  require(kernel.rank() == 2, "depthwise_conv1d: kernel must be [C,k]");
  const bool batched = x.rank() == 3;
  const std::size_t off = batched ? 1 : 0;
  ConvGeometry g;
  g.batch = batched ? x.dim(0) : 1;
  g.channels = x.dim(off);
  g.h = 1;
  g.w = x.dim(off + 1);
  require(kernel.dim(0) == g.channels, "depthwise_conv1d: kernel has " + std::to_string(kernel.dim(0)) +
                                           " channels, input has " + std::to_string(g.channels));
  g.kh = 1;
  g.kw = kernel.dim(1);
  g.sw = stride;
  g.gh = AxisGeometry{1, 0};
  g.gw = conv_axis(g.w, g.kw, stride, padding);
  Shape out_dims = batched ? Shape{g.batch, g.channels, g.gw.out} : Shape{g.channels, g.gw.out};
  return depthwise_impl("depthwise_conv1d", x, kernel, g, std::move(out_dims));
}

template <std::floating_point T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, ConvOptions opts) {
  check_strides(opts.stride_h, opts.stride_w);
  require(x.rank() == 4, "conv2d: input must be [N,Ci,H,W]");
  require(weight.rank() == 4, "conv2d: weight must be [Co,Ci,kH,kW]");
  const std::size_t n_batch = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t co = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  require(weight.dim(1) == ci, "conv2d: weight expects " + std::to_string(weight.dim(1)) +
                                   " input channels, got " + std::to_string(ci));
  if (bias.defined()) require(bias.rank() == 1 && bias.dim(0) == co, "conv2d: bias must be [Co]");
  const std::size_t sh = opts.stride_h, sw = opts.stride_w;
  const AxisGeometry gh = conv_axis(h, kh, sh, opts.padding);
  const AxisGeometry gw = conv_axis(w, kw, sw, opts.padding);
  const std::size_t oh = gh.out, ow = gw.out;

  // Visit every (output, input, tap) triple with in-bounds input.
  auto for_each_tap = [=](auto&& fn) {
    for (std::size_t n = 0; n < n_batch; ++n)
      for (std::size_t o = 0; o < co; ++o)
        for (std::size_t i = 0; i < oh; ++i)
          for (std::size_t j = 0; j < ow; ++j) {
            const std::size_t oi = ((n * co + o) * oh + i) * ow + j;
            for (std::size_t c = 0; c < ci; ++c)
              for (std::size_t a = 0; a < kh; ++a) {
                const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(i * sh + a) -
                                          static_cast<std::ptrdiff_t>(gh.pad_lo);
                if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t b = 0; b < kw; ++b) {
                  const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(j * sw + b) -
                                            static_cast<std::ptrdiff_t>(gw.pad_lo);
                  if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) continue;
                  const std::size_t xi = ((n * ci + c) * h + ih) * w + iw;
                  const std::size_t wi = ((o * ci + c) * kh + a) * kw + b;
                  fn(oi, xi, wi);
                }
              }
          }
  };

  return make_op<T>(
      "conv2d", {n_batch, co, oh, ow}, {x, weight, bias},
      [=](Node<T>& out) {
        const auto& xd = data_of(x);
        const auto& wd = data_of(weight);
        if (bias.defined()) {
          const auto& bd = data_of(bias);
          for (std::size_t n = 0; n < n_batch; ++n)
            for (std::size_t o = 0; o < co; ++o)
              std::fill_n(out.data.begin() + (n * co + o) * oh * ow, oh * ow, bd[o]);
        } else {
          std::fill(out.data.begin(), out.data.end(), T(0));
        }
        for_each_tap([&](std::size_t oi, std::size_t xi, std::size_t wi) { out.data[oi] += xd[xi] * wd[wi]; });
      },
      [=](const Node<T>& out) {
        const auto& xd = data_of(x);
        const auto& wd = data_of(weight);
        auto* dx = grad_of(x);
        auto* dw = grad_of(weight);
        if (dx || dw) {
          for_each_tap([&](std::size_t oi, std::size_t xi, std::size_t wi) {
            const T go = out.grad[oi];
            if (dx) (*dx)[xi] += go * wd[wi];
            if (dw) (*dw)[wi] += go * xd[xi];
          });
        }
        if (auto* db = grad_of(bias)) {
          for (std::size_t n = 0; n < n_batch; ++n)
            for (std::size_t o = 0; o < co; ++o)
              for (std::size_t s = 0; s < oh * ow; ++s) (*db)[o] += out.grad[(n * co + o) * oh * ow + s];
        }
      });
}

template <std::floating_point T>
Tensor<T> pointwise_conv(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias) {
  require(x.rank() >= 2, "pointwise_conv: input must be [N,C,...]");
  require(weights.rank() == 2, "pointwise_conv: weights must be [Co,Ci]");
  const std::size_t n_batch = x.dim(0), ci = x.dim(1), co = weights.dim(0);
  require(weights.dim(1) == ci, "pointwise_conv: weights expect " + std::to_string(weights.dim(1)) +
                                    " channels, input has " + std::to_string(ci));
  if (bias.defined()) require(bias.rank() == 1 && bias.dim(0) == co, "pointwise_conv: bias must be [Co]");
  const std::size_t spatial = x.numel() / (n_batch * ci);
  Shape out_dims = x.dims();
  out_dims[1] = co;
  return make_op<T>(
      "pointwise_conv", out_dims, {x, weights, bias},
      [=](Node<T>& out) {
        const auto& xd = data_of(x);
        const auto& wd = data_of(weights);
        for (std::size_t n = 0; n < n_batch; ++n)
          for (std::size_t o = 0; o < co; ++o) {
            T* op = out.data.data() + (n * co + o) * spatial;
            std::fill_n(op, spatial, bias.defined() ? data_of(bias)[o] : T(0));
            for (std::size_t c = 0; c < ci; ++c) {
              const T wv = wd[o * ci + c];
              const T* xp = xd.data() + (n * ci + c) * spatial;
              for (std::size_t s = 0; s < spatial; ++s) op[s] += wv * xp[s];
            }
          }
      },
      [=](const Node<T>& out) {
        const auto& xd = data_of(x);
        const auto& wd = data_of(weights);
        auto* dx = grad_of(x);
        auto* dw = grad_of(weights);
        auto* db = grad_of(bias);
        for (std::size_t n = 0; n < n_batch; ++n)
          for (std::size_t o = 0; o < co; ++o) {
            const T* gp = out.grad.data() + (n * co + o) * spatial;
            if (db) {
              T acc = T(0);
              for (std::size_t s = 0; s < spatial; ++s) acc += gp[s];
              (*db)[o] += acc;
            }
            for (std::size_t c = 0; c < ci; ++c) {
              const std::size_t xoff = (n * ci + c) * spatial;
              if (dw) {
                T acc = T(0);
                for (std::size_t s = 0; s < spatial; ++s) acc += gp[s] * xd[xoff + s];
                (*dw)[o * ci + c] += acc;
              }
              if (dx) {
                const T wv = wd[o * ci + c];
                T* dp = dx->data() + xoff;
                for (std::size_t s = 0; s < spatial; ++s) dp[s] += wv * gp[s];
              }
            }
          }
      });
}

template <std::floating_point T>
Tensor<T> batch_norm(const Tensor<T>& x, BatchNormState<T>& state, BatchNormMode mode) {
  require(x.rank() >= 2, "batch_norm: input must be [N,C,...]");
  const std::size_t n_batch = x.dim(0), channels = x.dim(1);
  if (n_batch == 0) throw ArgumentError("batch_norm: empty batch");
  require(channels == state.channels(), "batch_norm: input has " + std::to_string(channels) +
                                            " channels, state has " + std::to_string(state.channels()));
  if (!(state.epsilon > T(0))) throw ArgumentError("batch_norm: epsilon must be positive");
  const std::size_t spatial = x.numel() / (n_batch * channels);
  const std::size_t count = n_batch * spatial;

  struct Saved {
    std::vector<T> mean, var, inv_std;
  };
  auto saved = std::make_shared<Saved>();
  saved->mean.resize(channels);
  saved->var.resize(channels);
  saved->inv_std.resize(channels);
  const bool train = mode == BatchNormMode::train;
  // Eval statistics are captured by value so replay reproduces the original pass.
  const std::vector<T> run_mean = state.running_mean, run_var = state.running_var;
  const T eps = state.epsilon;
  Tensor<T> gamma = state.gamma, beta = state.beta;

  auto forward = [=](Node<T>& out) {
    const auto& xd = data_of(x);
    const auto& gd = data_of(gamma);
    const auto& bd = data_of(beta);
    for (std::size_t c = 0; c < channels; ++c) {
      T mu, var;
      if (train) {
        T acc = T(0);
        for (std::size_t n = 0; n < n_batch; ++n) {
          const T* xp = xd.data() + (n * channels + c) * spatial;
          for (std::size_t s = 0; s < spatial; ++s) acc += xp[s];
        }
        mu = acc / static_cast<T>(count);
        T sq = T(0);
        for (std::size_t n = 0; n < n_batch; ++n) {
          const T* xp = xd.data() + (n * channels + c) * spatial;
          for (std::size_t s = 0; s < spatial; ++s) sq += (xp[s] - mu) * (xp[s] - mu);
        }
        var = sq / static_cast<T>(count);
      } else {
        mu = run_mean[c];
        var = run_var[c];
      }
      const T inv = T(1) / std::sqrt(var + eps);
      saved->mean[c] = mu;
      saved->var[c] = var;
      saved->inv_std[c] = inv;
      for (std::size_t n = 0; n < n_batch; ++n) {
        const std::size_t off = (n * channels + c) * spatial;
        for (std::size_t s = 0; s < spatial; ++s) out.data[off + s] = gd[c] * (xd[off + s] - mu) * inv + bd[c];
      }
    }
  };
  auto backward = [=](const Node<T>& out) {
    const auto& xd = data_of(x);
    const auto& gd = data_of(gamma);
    auto* dx = grad_of(x);
    auto* dg = grad_of(gamma);
    auto* db = grad_of(beta);
    for (std::size_t c = 0; c < channels; ++c) {
      const T mu = saved->mean[c], inv = saved->inv_std[c];
      T sum_g = T(0), sum_gx = T(0);
      for (std::size_t n = 0; n < n_batch; ++n) {
        const std::size_t off = (n * channels + c) * spatial;
        for (std::size_t s = 0; s < spatial; ++s) {
          const T go = out.grad[off + s];
          sum_g += go;
          sum_gx += go * (xd[off + s] - mu) * inv;
        }
      }
      if (dg) (*dg)[c] += sum_gx;
      if (db) (*db)[c] += sum_g;
      if (!dx) continue;
      const T gc = gd[c];
      const T m = static_cast<T>(count);
      for (std::size_t n = 0; n < n_batch; ++n) {
        const std::size_t off = (n * channels + c) * spatial;
        for (std::size_t s = 0; s < spatial; ++s) {
          const T go = out.grad[off + s];
          if (train) {
            const T xhat = (xd[off + s] - mu) * inv;
            (*dx)[off + s] += gc * inv * (go - sum_g / m - xhat * sum_gx / m);
          } else {
            (*dx)[off + s] += gc * inv * go;
          }
        }
      }
    }
  };
  Tensor<T> out = make_op<T>("batch_norm", x.dims(), {x, gamma, beta}, forward, backward);

  if (train) {
    const T unbiased = count > 1 ? static_cast<T>(count) / static_cast<T>(count - 1) : T(1);
    for (std::size_t c = 0; c < channels; ++c) {
      const T var = saved->var[c];
      state.running_mean[c] = (T(1) - state.momentum) * state.running_mean[c] + state.momentum * saved->mean[c];
      state.running_var[c] = std::max(
          T(0), (T(1) - state.momentum) * state.running_var[c] + state.momentum * var * unbiased);
    }
  }
  return out;
}

template <std::floating_point T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require(w.rank() == 2, "linear: weight must be [Dout,Din]");
  const std::size_t d_in = w.dim(1), d_out = w.dim(0);
  require(x.dims().back() == d_in, "linear: input last axis " + std::to_string(x.dims().back()) +
                                       " does not match weight input " + std::to_string(d_in));
  if (b.defined()) require(b.rank() == 1 && b.dim(0) == d_out, "linear: bias must be [Dout]");
  const std::size_t rows = x.numel() / d_in;
  Shape out_dims = x.dims();
  out_dims.back() = d_out;
  return make_op<T>(
      "linear", out_dims, {x, w, b},
      [=](Node<T>& out) {
        auto o = rows_of<T>(out.data.data(), rows, d_out);
        o.noalias() = rows_of<T>(data_of(x).data(), rows, d_in) * rows_of<T>(data_of(w).data(), d_out, d_in).transpose();
        if (b.defined()) o.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(data_of(b).data(), d_out);
      },
      [=](const Node<T>& out) {
        const auto g = rows_of<T>(out.grad.data(), rows, d_out);
        if (auto* db = grad_of(b)) {
          Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(db->data(), d_out) += g.colwise().sum();
        }
        if (auto* dw = grad_of(w)) {
          rows_of<T>(dw->data(), d_out, d_in).noalias() += g.transpose() * rows_of<T>(data_of(x).data(), rows, d_in);
        }
        if (auto* dx = grad_of(x)) {
          rows_of<T>(dx->data(), rows, d_in).noalias() += g * rows_of<T>(data_of(w).data(), d_out, d_in);
        }
      });
}

template <std::floating_point T>
Tensor<T> mean_trailing(const Tensor<T>& x, std::size_t axes) {
  if (axes == 0 || axes > x.rank()) throw ArgumentError("mean_trailing: bad axis count");
  Shape out_dims(x.dims().begin(), x.dims().end() - static_cast<std::ptrdiff_t>(axes));
  if (out_dims.empty()) out_dims = {1};
  const std::size_t outer = shape_numel(out_dims);
  const std::size_t inner = x.numel() / outer;
  const T inv = T(1) / static_cast<T>(inner);
  return make_op<T>(
      axes == 1 ? "gap_time" : "mean_trailing", out_dims, {x},
      [=](Node<T>& out) {
        const auto& xd = data_of(x);
        // Shifted summation: exact for constant rows.
        for (std::size_t o = 0; o < outer; ++o) {
          const T first = xd[o * inner];
          T acc = T(0);
          for (std::size_t i = 1; i < inner; ++i) acc += xd[o * inner + i] - first;
          out.data[o] = first + acc * inv;
        }
      },
      [=](const Node<T>& out) {
        auto* g = grad_of(x);
        if (!g) return;
        for (std::size_t o = 0; o < outer; ++o) {
          const T go = out.grad[o] * inv;
          for (std::size_t i = 0; i < inner; ++i) (*g)[o * inner + i] += go;
        }
      });
}

template <std::floating_point T>
Tensor<T> global_average_pool_time(const Tensor<T>& x) {
  require(x.rank() >= 2, "global_average_pool_time: input must be [...,F,T]");
  return mean_trailing(x, 1);
}

template <std::floating_point T>
Tensor<T> scale_by_prefix(const Tensor<T>& x, const Tensor<T>& w) {
  require(w.rank() <= x.rank() && std::equal(w.dims().begin(), w.dims().end(), x.dims().begin()),
          "scale_by_prefix: " + shape_str(w.dims()) + " is not a prefix of " + shape_str(x.dims()));
  const std::size_t outer = w.numel(), inner = x.numel() / w.numel();
  return make_op<T>(
      "scale_by_prefix", x.dims(), {x, w},
      [=](Node<T>& out) {
        const auto& xd = data_of(x);
        const auto& wd = data_of(w);
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < inner; ++i) out.data[o * inner + i] = xd[o * inner + i] * wd[o];
      },
      [=](const Node<T>& out) {
        const auto& xd = data_of(x);
        const auto& wd = data_of(w);
        auto* dx = grad_of(x);
        auto* dw = grad_of(w);
        for (std::size_t o = 0; o < outer; ++o) {
          T acc = T(0);
          for (std::size_t i = 0; i < inner; ++i) {
            const T go = out.grad[o * inner + i];
            if (dx) (*dx)[o * inner + i] += go * wd[o];
            acc += go * xd[o * inner + i];
          }
          if (dw) (*dw)[o] += acc;
        }
      });
}

template <std::floating_point T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const Tensor<T>& weights) {
  require(logits.rank() == 2, "softmax_cross_entropy: logits must be [N,K]");
  require(weights.dims() == logits.dims(), "softmax_cross_entropy: weights " + shape_str(weights.dims()) +
                                               " do not match logits " + shape_str(logits.dims()));
  const std::size_t rows = logits.dim(0), k = logits.dim(1);
  const auto& wd = data_of(weights);
  for (std::size_t r = 0; r < rows; ++r) {
    T s = T(0);
    for (std::size_t j = 0; j < k; ++j) {
      if (wd[r * k + j] < -row_tolerance<T>()) throw ArgumentError("softmax_cross_entropy: negative label weight");
      s += wd[r * k + j];
    }
    if (std::abs(s - T(1)) > row_tolerance<T>()) {
      throw ArgumentError("softmax_cross_entropy: label weights of row " + std::to_string(r) + " sum to " +
                          std::to_string(static_cast<double>(s)));
    }
  }
  auto probs = std::make_shared<std::vector<T>>(logits.numel());
  return make_op<T>(
      "softmax_cross_entropy", {1}, {logits, weights},
      [=](Node<T>& out) {
        const auto& zd = data_of(logits);
        const auto& wv = data_of(weights);
        T total = T(0);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* z = zd.data() + r * k;
          const T zmax = *std::max_element(z, z + k);
          T denom = T(0);
          for (std::size_t j = 0; j < k; ++j) denom += std::exp(z[j] - zmax);
          const T log_denom = std::log(denom);
          for (std::size_t j = 0; j < k; ++j) {
            const T log_p = z[j] - zmax - log_denom;
            (*probs)[r * k + j] = std::exp(log_p);
            if (wv[r * k + j] != T(0)) total -= wv[r * k + j] * log_p;
          }
        }
        out.data[0] = total / static_cast<T>(rows);
      },
      [=](const Node<T>& out) {
        auto* g = grad_of(logits);
        if (!g) return;
        const auto& wv = data_of(weights);
        const T scale_factor = out.grad[0] / static_cast<T>(rows);
        for (std::size_t r = 0; r < rows; ++r) {
          T mass = T(0);
          for (std::size_t j = 0; j < k; ++j) mass += wv[r * k + j];
          for (std::size_t j = 0; j < k; ++j) {
            (*g)[r * k + j] += scale_factor * ((*probs)[r * k + j] * mass - wv[r * k + j]);
          }
        }
      });
}

template <std::floating_point T>
Tensor<T> one_hot(const std::vector<std::size_t>& targets, std::size_t classes) {
  if (targets.empty()) throw ArgumentError("one_hot: no targets");
  std::vector<T> v(targets.size() * classes, T(0));
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] >= classes) {
      throw ArgumentError("one_hot: target " + std::to_string(targets[r]) + " outside " + std::to_string(classes) +
                          " classes");
    }
    v[r * classes + targets[r]] = T(1);
  }
  return Tensor<T>({targets.size(), classes}, std::move(v));
}

template <std::floating_point T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<std::size_t>& targets) {
  require(logits.rank() == 2 && logits.dim(0) == targets.size(),
          "softmax_cross_entropy: need one target per logits row");
  return softmax_cross_entropy(logits, one_hot<T>(targets, logits.dim(1)));
}

#define FCANET_INSTANTIATE_OPS(T)                                                                    \
  template struct BatchNormState<T>;                                                                 \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> scale(const Tensor<T>&, T);                                                     \
  template Tensor<T> activation(const Tensor<T>&, Activation);                                       \
  template Tensor<T> sum(const Tensor<T>&);                                                          \
  template Tensor<T> mean(const Tensor<T>&);                                                         \
  template Tensor<T> reshape(const Tensor<T>&, const Shape&);                                        \
  template Tensor<T> swap_last_axes(const Tensor<T>&);                                               \
  template Tensor<T> depthwise_conv2d(const Tensor<T>&, const Tensor<T>&, ConvOptions);              \
  template Tensor<T> depthwise_conv1d(const Tensor<T>&, const Tensor<T>&, std::size_t, Padding);     \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, ConvOptions);      \
  template Tensor<T> pointwise_conv(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> batch_norm(const Tensor<T>&, BatchNormState<T>&, BatchNormMode);                \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> mean_trailing(const Tensor<T>&, std::size_t);                                   \
  template Tensor<T> global_average_pool_time(const Tensor<T>&);                                     \
  template Tensor<T> scale_by_prefix(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> softmax_cross_entropy(const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> softmax_cross_entropy(const Tensor<T>&, const std::vector<std::size_t>&);       \
  template Tensor<T> one_hot(const std::vector<std::size_t>&, std::size_t);

FCANET_INSTANTIATE_OPS(float)
FCANET_INSTANTIATE_OPS(double)

#undef FCANET_INSTANTIATE_OPS

}  // namespace fcanet::numerics
