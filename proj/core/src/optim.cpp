#include "dsnet/optim.hpp"

#include <cmath>

#include "dsnet/nn.hpp"

namespace dsnet::optim {

template <typename T>
void require_one_hot(const BasicTensor<T>& targets) {
  if (targets.rank() != 2) throw ContractError("targets must be [N,K], got " + to_string(targets.shape()));
  const std::size_t n = targets.dim(0), k = targets.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t ones = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const T t = targets[i * k + j];
      if (t == T{1}) {
        ++ones;
      } else if (t != T{0}) {
        throw ContractError("target row " + std::to_string(i) + " is not one-hot");
      }
    }
    if (ones != 1) throw ContractError("target row " + std::to_string(i) + " is not one-hot");
  }
}

template <typename T>
LossAndGrad<T> categorical_cross_entropy(const BasicTensor<T>& probs,
                                         const BasicTensor<T>& targets) {
  if (probs.shape() != targets.shape() || probs.rank() != 2) {
    throw ShapeError("categorical_cross_entropy: shapes " + to_string(probs.shape()) + " and " +
                     to_string(targets.shape()));
  }
  require_one_hot(targets);
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  if (n == 0) throw DomainError("categorical_cross_entropy: empty batch");
  LossAndGrad<T> out{T{0}, BasicTensor<T>(probs.shape())};
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) row_sum += probs[i * k + j];
    if (std::abs(row_sum - 1.0) > 1e-4) {
      throw ContractError("probability row " + std::to_string(i) + " sums to " +
                          std::to_string(row_sum));
    }
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t idx = i * k + j;
      if (targets[idx] == T{0}) continue;
      const double p = probs[idx];
      const double clamped = std::clamp(p, kProbabilityFloor, 1.0);
      loss -= std::log(clamped);
      const bool inside = p >= kProbabilityFloor && p <= 1.0;
      out.grad[idx] = inside ? static_cast<T>(-inv_n / clamped) : T{0};
    }
  }
  out.loss = static_cast<T>(loss * inv_n);
  return out;
}

template <typename T>
SoftmaxCrossEntropy<T> softmax_cross_entropy(const BasicTensor<T>& logits,
                                             const BasicTensor<T>& targets) {
  if (logits.shape() != targets.shape()) {
    throw ShapeError("softmax_cross_entropy: shapes " + to_string(logits.shape()) + " and " +
                     to_string(targets.shape()));
  }
  require_one_hot(targets);
  SoftmaxCrossEntropy<T> out;
  out.probs = nn::softmax(logits);
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (n == 0) throw DomainError("softmax_cross_entropy: empty batch");
  out.grad_logits = BasicTensor<T>(logits.shape());
  const T inv_n = T{1} / static_cast<T>(n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n * k; ++i) {
    if (targets[i] != T{0}) {
      loss -= std::log(std::clamp(static_cast<double>(out.probs[i]), kProbabilityFloor, 1.0));
    }
    out.grad_logits[i] = (out.probs[i] - targets[i]) * inv_n;
  }
  out.loss = static_cast<T>(loss / static_cast<double>(n));
  return out;
}

template <typename T>
AdamState<T> make_adam_state(std::span<const ParamSlot<T>> params, const AdamOptions& options) {
  AdamState<T> state;
  state.options = options;
  for (const auto& slot : params) {
    state.m.emplace_back(slot.value->shape());
    state.v.emplace_back(slot.value->shape());
  }
  return state;
}

template <typename T>
void adam_step(std::span<const ParamSlot<T>> params, AdamState<T>& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adam_step: optimizer state holds " + std::to_string(state.m.size()) +
                        " moments for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& slot = params[i];
    if (slot.grad->shape() != slot.value->shape() || state.m[i].shape() != slot.value->shape()) {
      throw ShapeError("adam_step: shape mismatch for parameter " + slot.name);
    }
    if (!slot.grad->all_finite()) {
      throw NumericError("non-finite gradient in parameter " + slot.name);
    }
  }
  const auto& o = state.options;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& value = *params[i].value;
    const auto& grad = *params[i].grad;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = grad[j];
      const double mj = o.beta1 * m[j] + (1.0 - o.beta1) * g;
      const double vj = o.beta2 * v[j] + (1.0 - o.beta2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double m_hat = mj / correction1;
      const double v_hat = vj / correction2;
      value[j] = static_cast<T>(value[j] - o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon));
    }
  }
}

#define DSNET_INSTANTIATE_OPTIM(T)                                                               \
  template void require_one_hot(const BasicTensor<T>&);                                          \
  template LossAndGrad<T> categorical_cross_entropy(const BasicTensor<T>&, const BasicTensor<T>&); \
  template SoftmaxCrossEntropy<T> softmax_cross_entropy(const BasicTensor<T>&,                   \
                                                        const BasicTensor<T>&);                  \
  template AdamState<T> make_adam_state(std::span<const ParamSlot<T>>, const AdamOptions&);      \
  template void adam_step(std::span<const ParamSlot<T>>, AdamState<T>&);

DSNET_INSTANTIATE_OPTIM(float)
DSNET_INSTANTIATE_OPTIM(double)

#undef DSNET_INSTANTIATE_OPTIM

}  // namespace dsnet::optim
