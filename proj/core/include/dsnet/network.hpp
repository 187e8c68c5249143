#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "dsnet/config.hpp"
#include "dsnet/nn.hpp"
#include "dsnet/optim.hpp"

namespace dsnet::model {

template <typename T>
struct NamedTensor {
  std::string name;
  BasicTensor<T>* tensor = nullptr;
};

/// A built ModelConfig: owns every layer's parameters, gradients and forward
/// caches. forward() in train mode records caches (and updates batchnorm
/// running statistics); backward() then fills the gradients returned by
/// parameters().
template <typename T>
class Network {
 public:
  // Validates `config` against `rules` and draws He-normal weights from the
  // weights stream of `seed`, layer by layer in order.
  Network(ModelConfig config, std::uint64_t seed, nn::BatchNormOptions batchnorm = {},
          const ArchitectureRules& rules = {});

  // [N, C, H, W] -> logits [N, num_classes].
  BasicTensor<T> forward(const BasicTensor<T>& input, nn::NormMode mode);

  // Softmax probabilities with batchnorm in inference mode.
  BasicTensor<T> predict(const BasicTensor<T>& input);

  // Back-propagates d(loss)/d(logits) of the most recent train-mode forward.
  void backward(const BasicTensor<T>& grad_logits);

  std::vector<optim::ParamSlot<T>> parameters();
  // Batchnorm running statistics.
  std::vector<NamedTensor<T>> buffers();

  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<LayerInfo>& layer_info() const noexcept { return info_; }
  const nn::BatchNormOptions& batchnorm_options() const noexcept { return batchnorm_; }

  std::size_t allocated_trainable();
  std::size_t allocated_non_trainable();

 private:
  struct Conv {
    nn::Conv2dParams<T> params, grads;
    nn::Conv2dCache<T> cache;
  };
  struct Separable {
    nn::SeparableConv2dParams<T> params, grads;
    nn::SeparableConv2dCache<T> cache;
  };
  struct Norm {
    nn::BatchNormParams<T> params;
    BasicTensor<T> grad_gamma, grad_beta;
    nn::BatchNormCache<T> cache;
  };
  struct Pool {
    nn::MaxPoolCache cache;
  };
  struct Relu {
    BasicTensor<T> cache;
  };
  struct Dense {
    nn::DenseParams<T> params, grads;
    BasicTensor<T> cache;
  };
  using Impl = std::variant<Conv, Separable, Norm, Pool, Relu, Dense>;

  struct Layer {
    LayerInfo info;
    Impl impl;
  };

  BasicTensor<T> run_layer(Layer& layer, const BasicTensor<T>& x, nn::NormMode mode, bool record);
  BasicTensor<T> backprop_layer(Layer& layer, const BasicTensor<T>& grad);

  ModelConfig config_;
  nn::BatchNormOptions batchnorm_;
  std::vector<LayerInfo> info_;
  std::vector<Layer> layers_;
  std::size_t flatten_at_ = 0;  // index of the first head layer
  Shape flatten_input_shape_;
  bool has_cache_ = false;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace dsnet::model
