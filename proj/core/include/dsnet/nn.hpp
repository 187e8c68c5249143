#pragma once

#include <cstddef>
#include <vector>

#include "dsnet/rng.hpp"
#include "dsnet/tensor.hpp"

// Layer kernels. Every layer is a pair of free functions: a forward pass that
// optionally fills a cache, and a backward pass that consumes that cache and
// returns gradients shaped like the corresponding primal tensors. Activations
// are NCHW. Convolution is cross-correlation (no kernel flip).
namespace dsnet::nn {

enum class Padding { same, valid };

// Output extents and leading padding of a 2-D sliding window. For `same`, the
// total padding is split with the odd pixel going to the bottom/right.
struct SpatialPlan {
  std::size_t in_h = 0, in_w = 0;
  std::size_t kernel_h = 0, kernel_w = 0;
  std::size_t stride = 1;
  std::size_t out_h = 0, out_w = 0;
  std::size_t pad_top = 0, pad_left = 0;
};

SpatialPlan plan_spatial(std::size_t in_h, std::size_t in_w, std::size_t kernel_h,
                         std::size_t kernel_w, std::size_t stride, Padding padding);

// ---------------------------------------------------------------- conv2d --

template <typename T>
struct Conv2dParams {
  BasicTensor<T> weight;  // [Cout, Cin, kh, kw]
  BasicTensor<T> bias;    // [Cout]
};

template <typename T>
struct Conv2dCache {
  BasicTensor<T> input;
  std::size_t stride = 1;
  Padding padding = Padding::same;
};

template <typename T>
struct Conv2dGrads {
  BasicTensor<T> input;
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const Conv2dParams<T>& params,
                      std::size_t stride, Padding padding, Conv2dCache<T>* cache = nullptr);

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& grad_out, const Conv2dParams<T>& params,
                               const Conv2dCache<T>& cache);

// ------------------------------------------------------- depthwise conv2d --

// One kh x kw filter per input channel (depth multiplier 1), no bias.
template <typename T>
BasicTensor<T> depthwise_conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                                std::size_t stride, Padding padding,
                                Conv2dCache<T>* cache = nullptr);

template <typename T>
struct DepthwiseGrads {
  BasicTensor<T> input;
  BasicTensor<T> weight;
};

template <typename T>
DepthwiseGrads<T> depthwise_conv2d_backward(const BasicTensor<T>& grad_out,
                                            const BasicTensor<T>& weight,
                                            const Conv2dCache<T>& cache);

// ------------------------------------------------------ separable conv2d --

template <typename T>
struct SeparableConv2dParams {
  BasicTensor<T> depthwise;  // [Cin, kh, kw]
  BasicTensor<T> pointwise;  // [Cout, Cin]
  BasicTensor<T> bias;       // [Cout], applied after the pointwise stage only
};

template <typename T>
struct SeparableConv2dCache {
  Conv2dCache<T> depthwise;
  Conv2dCache<T> pointwise;
};

template <typename T>
struct SeparableConv2dGrads {
  BasicTensor<T> input;
  BasicTensor<T> depthwise;
  BasicTensor<T> pointwise;
  BasicTensor<T> bias;
};

// Depthwise stage (carries the stride and padding) followed by a 1x1 conv2d.
template <typename T>
BasicTensor<T> separable_conv2d(const BasicTensor<T>& input, const SeparableConv2dParams<T>& params,
                                std::size_t stride, Padding padding,
                                SeparableConv2dCache<T>* cache = nullptr);

template <typename T>
SeparableConv2dGrads<T> separable_conv2d_backward(const BasicTensor<T>& grad_out,
                                                  const SeparableConv2dParams<T>& params,
                                                  const SeparableConv2dCache<T>& cache);

// ------------------------------------------------------------- batchnorm --

enum class NormMode { train, infer };

struct BatchNormOptions {
  double momentum = 0.01;
  double epsilon = 1e-5;
};

template <typename T>
struct BatchNormParams {
  BasicTensor<T> gamma;         // trainable, init 1
  BasicTensor<T> beta;          // trainable, init 0
  BasicTensor<T> running_mean;  // non-trainable, init 0
  BasicTensor<T> running_var;   // non-trainable, init 1

  static BatchNormParams identity(std::size_t channels) {
    return {BasicTensor<T>({channels}, T{1}), BasicTensor<T>({channels}, T{0}),
            BasicTensor<T>({channels}, T{0}), BasicTensor<T>({channels}, T{1})};
  }
};

template <typename T>
struct BatchNormCache {
  NormMode mode = NormMode::train;
  Shape input_shape;
  BasicTensor<T> normalized;  // x-hat
  std::vector<T> inv_std;     // per channel
};

template <typename T>
struct BatchNormGrads {
  BasicTensor<T> input;
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
};

// Input is [N, C, H, W] or [N, C]. Train mode normalizes with the biased batch
// variance and folds the batch statistics into the running ones:
// running <- (1 - momentum) * running + momentum * batch.
template <typename T>
BasicTensor<T> batchnorm(const BasicTensor<T>& input, BatchNormParams<T>& params, NormMode mode,
                         const BatchNormOptions& options = {},
                         BatchNormCache<T>* cache = nullptr);

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BasicTensor<T>& grad_out,
                                     const BatchNormParams<T>& params,
                                     const BatchNormCache<T>& cache);

// -------------------------------------------------------------- maxpool --

struct MaxPoolCache {
  Shape input_shape;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

template <typename T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& input, std::size_t window = 2,
                         std::size_t stride = 2, MaxPoolCache* cache = nullptr);

// Routes each output gradient to the first maximum (row-major scan) of its window.
template <typename T>
BasicTensor<T> maxpool2d_backward(const BasicTensor<T>& grad_out, const MaxPoolCache& cache);

// ----------------------------------------------------------------- relu --

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input, BasicTensor<T>* cache = nullptr);

// Gradient passes only where the cached input is strictly positive.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& grad_out, const BasicTensor<T>& cache);

// ---------------------------------------------------------------- dense --

template <typename T>
struct DenseParams {
  BasicTensor<T> weight;  // [out, in]
  BasicTensor<T> bias;    // [out]
};

template <typename T>
struct DenseGrads {
  BasicTensor<T> input;
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const DenseParams<T>& params,
                     BasicTensor<T>* cache = nullptr);

template <typename T>
DenseGrads<T> dense_backward(const BasicTensor<T>& grad_out, const DenseParams<T>& params,
                             const BasicTensor<T>& cache);

// -------------------------------------------------------------- flatten --

template <typename T>
BasicTensor<T> flatten(const BasicTensor<T>& input) {
  if (input.rank() < 1) throw ShapeError("flatten: scalar input");
  const std::size_t n = input.dim(0);
  return input.reshape({n, n == 0 ? 0 : input.size() / n});
}

template <typename T>
BasicTensor<T> unflatten(const BasicTensor<T>& grad, const Shape& input_shape) {
  return grad.reshape(input_shape);
}

// -------------------------------------------------------------- softmax --

// Row-wise softmax of [N, K] logits with max subtraction.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

// ----------------------------------------------------------------- init --

// He-normal weights (stddev sqrt(2 / fan_in)), zero biases.
template <typename T>
Conv2dParams<T> init_conv2d(std::size_t in_channels, std::size_t out_channels,
                            std::size_t kernel_h, std::size_t kernel_w, Rng& rng);

template <typename T>
SeparableConv2dParams<T> init_separable_conv2d(std::size_t in_channels, std::size_t out_channels,
                                               std::size_t kernel_h, std::size_t kernel_w,
                                               Rng& rng);

template <typename T>
DenseParams<T> init_dense(std::size_t in_features, std::size_t out_features, Rng& rng);

}  // namespace dsnet::nn
