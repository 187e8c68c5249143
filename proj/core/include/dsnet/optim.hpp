#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dsnet/tensor.hpp"

namespace dsnet::optim {

// Floor applied to probabilities before the log.
inline constexpr double kProbabilityFloor = 1e-7;

template <typename T>
struct LossAndGrad {
  T loss{};
  BasicTensor<T> grad;
};

// -(1/N) sum_n sum_k t[n,k] ln(clamp(p[n,k], 1e-7, 1)). The gradient is that of
// the clamped expression, so clamped entries receive zero gradient. Rows of
// `probs` must sum to 1 within 1e-4 and `targets` must be one-hot.
template <typename T>
LossAndGrad<T> categorical_cross_entropy(const BasicTensor<T>& probs,
                                         const BasicTensor<T>& targets);

template <typename T>
struct SoftmaxCrossEntropy {
  T loss{};
  BasicTensor<T> probs;
  BasicTensor<T> grad_logits;  // (p - t) / N
};

// Softmax followed by categorical cross-entropy with the fused gradient.
template <typename T>
SoftmaxCrossEntropy<T> softmax_cross_entropy(const BasicTensor<T>& logits,
                                             const BasicTensor<T>& targets);

// Throws ContractError unless every row has a single 1 and zeros elsewhere.
template <typename T>
void require_one_hot(const BasicTensor<T>& targets);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  AdamOptions options;
  std::vector<BasicTensor<T>> m;  // one per parameter, in slot order
  std::vector<BasicTensor<T>> v;
  std::uint64_t step = 0;
};

// A named trainable tensor and its gradient, as handed to the optimizer.
template <typename T>
struct ParamSlot {
  std::string name;
  BasicTensor<T>* value = nullptr;
  BasicTensor<T>* grad = nullptr;
};

template <typename T>
AdamState<T> make_adam_state(std::span<const ParamSlot<T>> params, const AdamOptions& options = {});

// One bias-corrected Adam update of every slot. Gradients are validated before
// anything is modified; a non-finite element raises NumericError naming the
// parameter and leaves parameters and state untouched.
template <typename T>
void adam_step(std::span<const ParamSlot<T>> params, AdamState<T>& state);

}  // namespace dsnet::optim
