#include "dsnet/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dsnet::nn {

SpatialPlan plan_spatial(std::size_t in_h, std::size_t in_w, std::size_t kernel_h,
                         std::size_t kernel_w, std::size_t stride, Padding padding) {
  if (stride == 0) throw ParameterError("stride must be >= 1");
  if (kernel_h == 0 || kernel_w == 0) throw ShapeError("kernel extents must be >= 1");
  SpatialPlan p;
  p.in_h = in_h;
  p.in_w = in_w;
  p.kernel_h = kernel_h;
  p.kernel_w = kernel_w;
  p.stride = stride;
  if (padding == Padding::valid) {
    if (kernel_h > in_h || kernel_w > in_w) {
      throw ShapeError("kernel " + std::to_string(kernel_h) + "x" + std::to_string(kernel_w) +
                       " larger than input " + std::to_string(in_h) + "x" + std::to_string(in_w));
    }
    p.out_h = (in_h - kernel_h) / stride + 1;
    p.out_w = (in_w - kernel_w) / stride + 1;
    return p;
  }
  if (in_h == 0 || in_w == 0) throw ShapeError("empty spatial input");
  p.out_h = (in_h + stride - 1) / stride;
  p.out_w = (in_w + stride - 1) / stride;
  const std::size_t need_h = (p.out_h - 1) * stride + kernel_h;
  const std::size_t need_w = (p.out_w - 1) * stride + kernel_w;
  p.pad_top = need_h > in_h ? (need_h - in_h) / 2 : 0;
  p.pad_left = need_w > in_w ? (need_w - in_w) / 2 : 0;
  return p;
}

namespace {

using Index = std::ptrdiff_t;

// Range of output columns whose input column ox*stride + kx - pad_left is in bounds.
struct ColumnRange {
  Index first = 0;
  Index last = -1;  // inclusive
};

ColumnRange column_range(const SpatialPlan& p, std::size_t kx) {
  const Index s = static_cast<Index>(p.stride);
  const Index offset = static_cast<Index>(kx) - static_cast<Index>(p.pad_left);
  // need 0 <= ox*s + offset <= in_w - 1
  Index first = offset >= 0 ? 0 : (-offset + s - 1) / s;
  Index last = (static_cast<Index>(p.in_w) - 1 - offset);
  last = last < 0 ? -1 : last / s;
  last = std::min(last, static_cast<Index>(p.out_w) - 1);
  return {first, last};
}

// out += correlate(in, kernel) for one input/output plane pair.
template <typename T>
void correlate_plane(T* out, const T* in, const T* kernel, const SpatialPlan& p) {
  const Index s = static_cast<Index>(p.stride);
  for (std::size_t ky = 0; ky < p.kernel_h; ++ky) {
    for (std::size_t kx = 0; kx < p.kernel_w; ++kx) {
      const T w = kernel[ky * p.kernel_w + kx];
      const ColumnRange cols = column_range(p, kx);
      if (cols.last < cols.first) continue;
      const Index col_offset = static_cast<Index>(kx) - static_cast<Index>(p.pad_left);
      for (std::size_t oy = 0; oy < p.out_h; ++oy) {
        const Index iy = static_cast<Index>(oy) * s + static_cast<Index>(ky) -
                         static_cast<Index>(p.pad_top);
        if (iy < 0 || iy >= static_cast<Index>(p.in_h)) continue;
        T* orow = out + oy * p.out_w;
        const T* irow = in + iy * static_cast<Index>(p.in_w) + col_offset;
        if (s == 1) {
          for (Index ox = cols.first; ox <= cols.last; ++ox) orow[ox] += w * irow[ox];
        } else {
          for (Index ox = cols.first; ox <= cols.last; ++ox) orow[ox] += w * irow[ox * s];
        }
      }
    }
  }
}

// grad_in += correlate^T(grad_out, kernel).
template <typename T>
void correlate_plane_grad_input(T* grad_in, const T* grad_out, const T* kernel,
                                const SpatialPlan& p) {
  const Index s = static_cast<Index>(p.stride);
  for (std::size_t ky = 0; ky < p.kernel_h; ++ky) {
    for (std::size_t kx = 0; kx < p.kernel_w; ++kx) {
      const T w = kernel[ky * p.kernel_w + kx];
      const ColumnRange cols = column_range(p, kx);
      if (cols.last < cols.first) continue;
      const Index col_offset = static_cast<Index>(kx) - static_cast<Index>(p.pad_left);
      for (std::size_t oy = 0; oy < p.out_h; ++oy) {
        const Index iy = static_cast<Index>(oy) * s + static_cast<Index>(ky) -
                         static_cast<Index>(p.pad_top);
        if (iy < 0 || iy >= static_cast<Index>(p.in_h)) continue;
        const T* grow = grad_out + oy * p.out_w;
        T* irow = grad_in + iy * static_cast<Index>(p.in_w) + col_offset;
        for (Index ox = cols.first; ox <= cols.last; ++ox) irow[ox * s] += w * grow[ox];
      }
    }
  }
}

// grad_kernel += sum over output positions of grad_out * matching input.
template <typename T>
void correlate_plane_grad_kernel(T* grad_kernel, const T* in, const T* grad_out,
                                 const SpatialPlan& p) {
  const Index s = static_cast<Index>(p.stride);
  for (std::size_t ky = 0; ky < p.kernel_h; ++ky) {
    for (std::size_t kx = 0; kx < p.kernel_w; ++kx) {
      const ColumnRange cols = column_range(p, kx);
      if (cols.last < cols.first) continue;
      const Index col_offset = static_cast<Index>(kx) - static_cast<Index>(p.pad_left);
      T acc{0};
      for (std::size_t oy = 0; oy < p.out_h; ++oy) {
        const Index iy = static_cast<Index>(oy) * s + static_cast<Index>(ky) -
                         static_cast<Index>(p.pad_top);
        if (iy < 0 || iy >= static_cast<Index>(p.in_h)) continue;
        const T* grow = grad_out + oy * p.out_w;
        const T* irow = in + iy * static_cast<Index>(p.in_w) + col_offset;
        for (Index ox = cols.first; ox <= cols.last; ++ox) acc += grow[ox] * irow[ox * s];
      }
      grad_kernel[ky * p.kernel_w + kx] += acc;
    }
  }
}

void require_rank4(const Shape& s, const char* op) {
  if (s.size() != 4) throw ShapeError(std::string(op) + ": expected NCHW input, got " + to_string(s));
}

void require_grad_shape(const Shape& got, const Shape& expected, const char* op) {
  if (got != expected) {
    throw ContractError(std::string(op) + ": gradient shape " + to_string(got) +
                        " does not match forward output " + to_string(expected));
  }
}

}  // namespace

// ---------------------------------------------------------------- conv2d --

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const Conv2dParams<T>& params,
                      std::size_t stride, Padding padding, Conv2dCache<T>* cache) {
  require_rank4(input.shape(), "conv2d");
  const auto& w = params.weight;
  if (w.rank() != 4 || w.dim(1) != input.dim(1)) {
    throw ShapeError("conv2d: weight " + to_string(w.shape()) + " incompatible with input " +
                     to_string(input.shape()));
  }
  if (params.bias.shape() != Shape{w.dim(0)}) {
    throw ShapeError("conv2d: bias shape " + to_string(params.bias.shape()));
  }
  const std::size_t n = input.dim(0), cin = input.dim(1), cout = w.dim(0);
  const SpatialPlan p = plan_spatial(input.dim(2), input.dim(3), w.dim(2), w.dim(3), stride, padding);
  BasicTensor<T> out({n, cout, p.out_h, p.out_w});
  const std::size_t in_plane = p.in_h * p.in_w;
  const std::size_t out_plane = p.out_h * p.out_w;
  const std::size_t k_plane = p.kernel_h * p.kernel_w;

  parallel_for(static_cast<std::int64_t>(n * cout), [&](std::int64_t job) {
    const std::size_t b = static_cast<std::size_t>(job) / cout;
    const std::size_t co = static_cast<std::size_t>(job) % cout;
    T* o = out.raw() + (b * cout + co) * out_plane;
    std::fill(o, o + out_plane, params.bias[co]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      correlate_plane(o, input.raw() + (b * cin + ci) * in_plane,
                      w.raw() + (co * cin + ci) * k_plane, p);
    }
  });
  if (cache) {
    cache->input = input;
    cache->stride = stride;
    cache->padding = padding;
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& grad_out, const Conv2dParams<T>& params,
                               const Conv2dCache<T>& cache) {
  const auto& x = cache.input;
  const auto& w = params.weight;
  require_rank4(x.shape(), "conv2d_backward");
  const std::size_t n = x.dim(0), cin = x.dim(1), cout = w.dim(0);
  const SpatialPlan p = plan_spatial(x.dim(2), x.dim(3), w.dim(2), w.dim(3), cache.stride,
                                     cache.padding);
  require_grad_shape(grad_out.shape(), {n, cout, p.out_h, p.out_w}, "conv2d_backward");
  const std::size_t in_plane = p.in_h * p.in_w;
  const std::size_t out_plane = p.out_h * p.out_w;
  const std::size_t k_plane = p.kernel_h * p.kernel_w;

  Conv2dGrads<T> g{BasicTensor<T>(x.shape()), BasicTensor<T>(w.shape()), BasicTensor<T>({cout})};

  parallel_for(static_cast<std::int64_t>(n * cin), [&](std::int64_t job) {
    const std::size_t b = static_cast<std::size_t>(job) / cin;
    const std::size_t ci = static_cast<std::size_t>(job) % cin;
    T* gi = g.input.raw() + (b * cin + ci) * in_plane;
    for (std::size_t co = 0; co < cout; ++co) {
      correlate_plane_grad_input(gi, grad_out.raw() + (b * cout + co) * out_plane,
                                 w.raw() + (co * cin + ci) * k_plane, p);
    }
  });

  parallel_for(static_cast<std::int64_t>(cout * cin), [&](std::int64_t job) {
    const std::size_t co = static_cast<std::size_t>(job) / cin;
    const std::size_t ci = static_cast<std::size_t>(job) % cin;
    T* gk = g.weight.raw() + (co * cin + ci) * k_plane;
    for (std::size_t b = 0; b < n; ++b) {
      correlate_plane_grad_kernel(gk, x.raw() + (b * cin + ci) * in_plane,
                                  grad_out.raw() + (b * cout + co) * out_plane, p);
    }
  });

  for (std::size_t co = 0; co < cout; ++co) {
    T acc{0};
    for (std::size_t b = 0; b < n; ++b) {
      const T* go = grad_out.raw() + (b * cout + co) * out_plane;
      for (std::size_t i = 0; i < out_plane; ++i) acc += go[i];
    }
    g.bias[co] = acc;
  }
  return g;
}

// ------------------------------------------------------- depthwise conv2d --

template <typename T>
BasicTensor<T> depthwise_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                                std::size_t stride, Padding padding, Conv2dCache<T>* cache) {
  require_rank4(input.shape(), "depthwise_conv2d");
  if (weight.rank() != 3 || weight.dim(0) != input.dim(1)) {
    throw ShapeError("depthwise_conv2d: weight " + to_string(weight.shape()) +
                     " incompatible with input " + to_string(input.shape()));
  }
  const std::size_t n = input.dim(0), c = input.dim(1);
  const SpatialPlan p =
      plan_spatial(input.dim(2), input.dim(3), weight.dim(1), weight.dim(2), stride, padding);
  BasicTensor<T> out({n, c, p.out_h, p.out_w});
  const std::size_t in_plane = p.in_h * p.in_w;
  const std::size_t out_plane = p.out_h * p.out_w;
  const std::size_t k_plane = p.kernel_h * p.kernel_w;
  parallel_for(static_cast<std::int64_t>(n * c), [&](std::int64_t job) {
    const std::size_t ch = static_cast<std::size_t>(job) % c;
    correlate_plane(out.raw() + job * out_plane, input.raw() + job * in_plane,
                    weight.raw() + ch * k_plane, p);
  });
  if (cache) {
    cache->input = input;
    cache->stride = stride;
    cache->padding = padding;
  }
  return out;
}

template <typename T>
DepthwiseGrads<T> depthwise_conv2d_backward(const BasicTensor<T>& grad_out,
                                            const BasicTensor<T>& weight,
                                            const Conv2dCache<T>& cache) {
  const auto& x = cache.input;
  require_rank4(x.shape(), "depthwise_conv2d_backward");
  const std::size_t n = x.dim(0), c = x.dim(1);
  const SpatialPlan p =
      plan_spatial(x.dim(2), x.dim(3), weight.dim(1), weight.dim(2), cache.stride, cache.padding);
  require_grad_shape(grad_out.shape(), {n, c, p.out_h, p.out_w}, "depthwise_conv2d_backward");
  const std::size_t in_plane = p.in_h * p.in_w;
  const std::size_t out_plane = p.out_h * p.out_w;
  const std::size_t k_plane = p.kernel_h * p.kernel_w;

  DepthwiseGrads<T> g{BasicTensor<T>(x.shape()), BasicTensor<T>(weight.shape())};
  parallel_for(static_cast<std::int64_t>(n * c), [&](std::int64_t job) {
    const std::size_t ch = static_cast<std::size_t>(job) % c;
    correlate_plane_grad_input(g.input.raw() + job * in_plane, grad_out.raw() + job * out_plane,
                               weight.raw() + ch * k_plane, p);
  });
  parallel_for(static_cast<std::int64_t>(c), [&](std::int64_t ch) {
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t plane = b * c + static_cast<std::size_t>(ch);
      correlate_plane_grad_kernel(g.weight.raw() + ch * k_plane, x.raw() + plane * in_plane,
                                  grad_out.raw() + plane * out_plane, p);
    }
  });
  return g;
}

// ------------------------------------------------------ separable conv2d --

namespace {
template <typename T>
Conv2dParams<T> pointwise_as_conv(const SeparableConv2dParams<T>& params) {
  const auto& pw = params.pointwise;
  if (pw.rank() != 2) throw ShapeError("separable_conv2d: pointwise weight must be [Cout, Cin]");
  return {pw.reshape({pw.dim(0), pw.dim(1), 1, 1}), params.bias};
}
}  // namespace

template <typename T>
BasicTensor<T> separable_conv2d(const BasicTensor<T>& input, const SeparableConv2dParams<T>& params,
                                std::size_t stride, Padding padding,
                                SeparableConv2dCache<T>* cache) {
  const auto depth = depthwise_conv2d(input, params.depthwise, stride, padding,
                                      cache ? &cache->depthwise : nullptr);
  return conv2d(depth, pointwise_as_conv(params), 1, Padding::valid,
                cache ? &cache->pointwise : nullptr);
}

template <typename T>
SeparableConv2dGrads<T> separable_conv2d_backward(const BasicTensor<T>& grad_out,
                                                  const SeparableConv2dParams<T>& params,
                                                  const SeparableConv2dCache<T>& cache) {
  auto pg = conv2d_backward(grad_out, pointwise_as_conv(params), cache.pointwise);
  auto dg = depthwise_conv2d_backward(pg.input, params.depthwise, cache.depthwise);
  return {std::move(dg.input), std::move(dg.weight),
          std::move(pg.weight).reshape(params.pointwise.shape()), std::move(pg.bias)};
}

// ------------------------------------------------------------- batchnorm --

namespace {
struct ChannelLayout {
  std::size_t n, c, inner;
};

ChannelLayout channel_layout(const Shape& s, const char* op) {
  if (s.size() == 2) return {s[0], s[1], 1};
  if (s.size() == 4) return {s[0], s[1], s[2] * s[3]};
  throw ShapeError(std::string(op) + ": expected [N,C,H,W] or [N,C], got " + to_string(s));
}
}  // namespace

template <typename T>
BasicTensor<T> batchnorm(const BasicTensor<T>& input, BatchNormParams<T>& params, NormMode mode,
                         const BatchNormOptions& options, BatchNormCache<T>* cache) {
  const auto [n, c, inner] = channel_layout(input.shape(), "batchnorm");
  for (const auto* t : {&params.gamma, &params.beta, &params.running_mean, &params.running_var}) {
    if (t->shape() != Shape{c}) {
      throw ShapeError("batchnorm: parameter shape " + to_string(t->shape()) + " for " +
                       std::to_string(c) + " channels");
    }
  }
  const std::size_t count = n * inner;
  if (mode == NormMode::train && count < 2) {
    throw ShapeError("batchnorm: train mode needs at least 2 values per channel, got " +
                     std::to_string(count));
  }
  BasicTensor<T> out(input.shape());
  BasicTensor<T> normalized(input.shape());
  std::vector<T> inv_std(c);
  const double momentum = options.momentum;

  parallel_for(static_cast<std::int64_t>(c), [&](std::int64_t ch_signed) {
    const std::size_t ch = static_cast<std::size_t>(ch_signed);
    double mean;
    double var;
    if (mode == NormMode::train) {
      double sum = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* x = input.raw() + (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) sum += x[i];
      }
      mean = sum / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* x = input.raw() + (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          const double d = x[i] - mean;
          sq += d * d;
        }
      }
      var = sq / static_cast<double>(count);
      params.running_mean[ch] =
          static_cast<T>((1.0 - momentum) * params.running_mean[ch] + momentum * mean);
      params.running_var[ch] =
          static_cast<T>((1.0 - momentum) * params.running_var[ch] + momentum * var);
    } else {
      mean = params.running_mean[ch];
      var = params.running_var[ch];
    }
    const double denom = var + options.epsilon;
    // Unreachable with epsilon > 0 and non-negative variances.
    const double istd = denom > 0.0 ? 1.0 / std::sqrt(denom) : 0.0;
    inv_std[ch] = static_cast<T>(istd);
    const T g = params.gamma[ch];
    const T be = params.beta[ch];
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t base = (b * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const T xh = static_cast<T>((input[base + i] - mean) * istd);
        normalized[base + i] = xh;
        out[base + i] = g * xh + be;
      }
    }
  });
  for (std::size_t ch = 0; ch < c; ++ch) {
    if (!(params.running_var[ch] + options.epsilon > 0.0)) {
      throw NumericError("batchnorm: non-positive variance in channel " + std::to_string(ch));
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->input_shape = input.shape();
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BasicTensor<T>& grad_out,
                                     const BatchNormParams<T>& params,
                                     const BatchNormCache<T>& cache) {
  require_grad_shape(grad_out.shape(), cache.input_shape, "batchnorm_backward");
  const auto [n, c, inner] = channel_layout(cache.input_shape, "batchnorm_backward");
  const std::size_t count = n * inner;
  BatchNormGrads<T> g{BasicTensor<T>(cache.input_shape), BasicTensor<T>({c}), BasicTensor<T>({c})};
  parallel_for(static_cast<std::int64_t>(c), [&](std::int64_t ch_signed) {
    const std::size_t ch = static_cast<std::size_t>(ch_signed);
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t base = (b * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        sum_dy += grad_out[base + i];
        sum_dy_xhat += static_cast<double>(grad_out[base + i]) * cache.normalized[base + i];
      }
    }
    g.beta[ch] = static_cast<T>(sum_dy);
    g.gamma[ch] = static_cast<T>(sum_dy_xhat);
    const double scale_in = static_cast<double>(params.gamma[ch]) * cache.inv_std[ch];
    const double m = static_cast<double>(count);
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t base = (b * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        if (cache.mode == NormMode::train) {
          g.input[base + i] = static_cast<T>(
              scale_in / m *
              (m * grad_out[base + i] - sum_dy - cache.normalized[base + i] * sum_dy_xhat));
        } else {
          g.input[base + i] = static_cast<T>(scale_in * grad_out[base + i]);
        }
      }
    }
  });
  return g;
}

// -------------------------------------------------------------- maxpool --

template <typename T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& input, std::size_t window, std::size_t stride,
                         MaxPoolCache* cache) {
  require_rank4(input.shape(), "maxpool2d");
  if (window == 0 || stride == 0) throw ParameterError("maxpool2d: window and stride must be >= 1");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (window > h || window > w) {
    throw ShapeError("maxpool2d: window " + std::to_string(window) + " larger than input " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  const std::size_t oh = (h - window) / stride + 1;
  const std::size_t ow = (w - window) / stride + 1;
  BasicTensor<T> out({n, c, oh, ow});
  std::vector<std::size_t> arg(out.size());
  parallel_for(static_cast<std::int64_t>(n * c), [&](std::int64_t plane_signed) {
    const std::size_t plane = static_cast<std::size_t>(plane_signed);
    const std::size_t in_base = plane * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = in_base + oy * stride * w + ox * stride;
        for (std::size_t ky = 0; ky < window; ++ky) {
          for (std::size_t kx = 0; kx < window; ++kx) {
            const std::size_t idx = in_base + (oy * stride + ky) * w + ox * stride + kx;
            if (input[idx] > input[best]) best = idx;
          }
        }
        const std::size_t o = (plane * oh + oy) * ow + ox;
        out[o] = input[best];
        arg[o] = best;
      }
    }
  });
  if (cache) {
    cache->input_shape = input.shape();
    cache->argmax = std::move(arg);
  }
  return out;
}

template <typename T>
BasicTensor<T> maxpool2d_backward(const BasicTensor<T>& grad_out, const MaxPoolCache& cache) {
  if (grad_out.size() != cache.argmax.size() || grad_out.rank() != 4 ||
      cache.input_shape.size() != 4 || grad_out.dim(0) != cache.input_shape[0] ||
      grad_out.dim(1) != cache.input_shape[1]) {
    throw ContractError("maxpool2d_backward: gradient shape " + to_string(grad_out.shape()) +
                        " does not match cache");
  }
  BasicTensor<T> g(cache.input_shape);
  const std::size_t planes = grad_out.dim(0) * grad_out.dim(1);
  const std::size_t out_plane = planes == 0 ? 0 : grad_out.size() / planes;
  // argmax entries of one output plane all fall inside the same input plane.
  parallel_for(static_cast<std::int64_t>(planes), [&](std::int64_t plane) {
    for (std::size_t i = 0; i < out_plane; ++i) {
      const std::size_t o = static_cast<std::size_t>(plane) * out_plane + i;
      g[cache.argmax[o]] += grad_out[o];
    }
  });
  return g;
}

// ----------------------------------------------------------------- relu --

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input, BasicTensor<T>* cache) {
  BasicTensor<T> out = max_scalar(input, T{0});
  if (cache) *cache = input;
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& cache) {
  require_grad_shape(grad_out.shape(), cache.shape(), "relu_backward");
  BasicTensor<T> g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = cache[i] > T{0} ? grad_out[i] : T{0};
  return g;
}

// ---------------------------------------------------------------- dense --

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const DenseParams<T>& params,
                     BasicTensor<T>* cache) {
  if (input.rank() != 2 || params.weight.rank() != 2 || input.dim(1) != params.weight.dim(1)) {
    throw ShapeError("dense: input " + to_string(input.shape()) + " incompatible with weight " +
                     to_string(params.weight.shape()));
  }
  if (params.bias.shape() != Shape{params.weight.dim(0)}) {
    throw ShapeError("dense: bias shape " + to_string(params.bias.shape()));
  }
  BasicTensor<T> out = add_channel(matmul_bt(input, params.weight), params.bias);
  if (cache) *cache = input;
  return out;
}

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& grad_out, const DenseParams<T>& params,
                             const BasicTensor<T>& cache) {
  require_grad_shape(grad_out.shape(), {cache.dim(0), params.weight.dim(0)}, "dense_backward");
  DenseGrads<T> g;
  g.input = matmul(grad_out, params.weight);
  g.weight = matmul_at(grad_out, cache);
  g.bias = reduce(grad_out, ReduceOp::sum, {0});
  return g;
}

// -------------------------------------------------------------- softmax --

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  if (logits.rank() != 2 || logits.dim(1) == 0) {
    throw ShapeError("softmax: expected [N,K] with K >= 1, got " + to_string(logits.shape()));
  }
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  BasicTensor<T> out(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.raw() + i * k;
    T* o = out.raw() + i * k;
    const T m = *std::max_element(row, row + k);
    T sum{0};
    for (std::size_t j = 0; j < k; ++j) {
      o[j] = std::exp(row[j] - m);
      sum += o[j];
    }
    for (std::size_t j = 0; j < k; ++j) o[j] /= sum;
  }
  return out;
}

// ----------------------------------------------------------------- init --

template <typename T>
Conv2dParams<T> init_conv2d(std::size_t in_channels, std::size_t out_channels,
                            std::size_t kernel_h, std::size_t kernel_w, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(in_channels * kernel_h * kernel_w));
  return {BasicTensor<T>::normal({out_channels, in_channels, kernel_h, kernel_w}, rng, 0.0, stddev),
          BasicTensor<T>({out_channels})};
}

template <typename T>
SeparableConv2dParams<T> init_separable_conv2d(std::size_t in_channels, std::size_t out_channels,
                                               std::size_t kernel_h, std::size_t kernel_w,
                                               Rng& rng) {
  const double dw_std = std::sqrt(2.0 / static_cast<double>(kernel_h * kernel_w));
  const double pw_std = std::sqrt(2.0 / static_cast<double>(in_channels));
  SeparableConv2dParams<T> p;
  p.depthwise = BasicTensor<T>::normal({in_channels, kernel_h, kernel_w}, rng, 0.0, dw_std);
  p.pointwise = BasicTensor<T>::normal({out_channels, in_channels}, rng, 0.0, pw_std);
  p.bias = BasicTensor<T>({out_channels});
  return p;
}

template <typename T>
DenseParams<T> init_dense(std::size_t in_features, std::size_t out_features, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(in_features));
  return {BasicTensor<T>::normal({out_features, in_features}, rng, 0.0, stddev),
          BasicTensor<T>({out_features})};
}

#define DSNET_INSTANTIATE_NN(T)                                                                   \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const Conv2dParams<T>&, std::size_t,      \
                                 Padding, Conv2dCache<T>*);                                       \
  template Conv2dGrads<T> conv2d_backward(const BasicTensor<T>&, const Conv2dParams<T>&,          \
                                          const Conv2dCache<T>&);                                 \
  template BasicTensor<T> depthwise_conv2d(const BasicTensor<T>&, const BasicTensor<T>&,          \
                                           std::size_t, Padding, Conv2dCache<T>*);                \
  template DepthwiseGrads<T> depthwise_conv2d_backward(const BasicTensor<T>&,                     \
                                                       const BasicTensor<T>&,                     \
                                                       const Conv2dCache<T>&);                    \
  template BasicTensor<T> separable_conv2d(const BasicTensor<T>&, const SeparableConv2dParams<T>&, \
                                           std::size_t, Padding, SeparableConv2dCache<T>*);       \
  template SeparableConv2dGrads<T> separable_conv2d_backward(                                     \
      const BasicTensor<T>&, const SeparableConv2dParams<T>&, const SeparableConv2dCache<T>&);    \
  template BasicTensor<T> batchnorm(const BasicTensor<T>&, BatchNormParams<T>&, NormMode,         \
                                    const BatchNormOptions&, BatchNormCache<T>*);                 \
  template BatchNormGrads<T> batchnorm_backward(const BasicTensor<T>&, const BatchNormParams<T>&, \
                                                const BatchNormCache<T>&);                        \
  template BasicTensor<T> maxpool2d(const BasicTensor<T>&, std::size_t, std::size_t,              \
                                    MaxPoolCache*);                                               \
  template BasicTensor<T> maxpool2d_backward(const BasicTensor<T>&, const MaxPoolCache&);         \
  template BasicTensor<T> relu(const BasicTensor<T>&, BasicTensor<T>*);                           \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);            \
  template BasicTensor<T> dense(const BasicTensor<T>&, const DenseParams<T>&, BasicTensor<T>*);   \
  template DenseGrads<T> dense_backward(const BasicTensor<T>&, const DenseParams<T>&,             \
                                        const BasicTensor<T>&);                                   \
  template BasicTensor<T> softmax(const BasicTensor<T>&);                                         \
  template Conv2dParams<T> init_conv2d(std::size_t, std::size_t, std::size_t, std::size_t, Rng&); \
  template SeparableConv2dParams<T> init_separable_conv2d(std::size_t, std::size_t, std::size_t,  \
                                                          std::size_t, Rng&);                     \
  template DenseParams<T> init_dense(std::size_t, std::size_t, Rng&);

DSNET_INSTANTIATE_NN(float)
DSNET_INSTANTIATE_NN(double)

#undef DSNET_INSTANTIATE_NN

}  // namespace dsnet::nn
