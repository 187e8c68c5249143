#include "dsnet/network.hpp"

#include <type_traits>

#include "dsnet/rng.hpp"

namespace dsnet::model {

namespace {
template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;
}  // namespace

template <typename T>
Network<T>::Network(ModelConfig config, std::uint64_t seed, nn::BatchNormOptions batchnorm,
                    const ArchitectureRules& rules)
    : config_(std::move(config)), batchnorm_(batchnorm) {
  validate(config_, rules);
  info_ = describe(config_);
  Rng rng = make_stream(seed, Stream::weights);
  std::size_t block_layers = 0;
  for (const auto& b : config_.blocks) block_layers += b.size();
  flatten_at_ = block_layers;

  for (const auto& info : info_) {
    const auto& s = info.spec;
    const std::size_t channels = info.input_shape[0];
    Impl impl;
    switch (s.kind) {
      case LayerKind::conv2d: {
        Conv c;
        c.params = nn::init_conv2d<T>(channels, s.units, s.kernel, s.kernel, rng);
        impl = std::move(c);
        break;
      }
      case LayerKind::separable_conv2d: {
        Separable c;
        c.params = nn::init_separable_conv2d<T>(channels, s.units, s.kernel, s.kernel, rng);
        impl = std::move(c);
        break;
      }
      case LayerKind::batchnorm: {
        Norm n;
        n.params = nn::BatchNormParams<T>::identity(channels);
        n.grad_gamma = BasicTensor<T>({channels});
        n.grad_beta = BasicTensor<T>({channels});
        impl = std::move(n);
        break;
      }
      case LayerKind::maxpool:
        impl = Pool{};
        break;
      case LayerKind::relu:
        impl = Relu{};
        break;
      case LayerKind::dense: {
        Dense d;
        d.params = nn::init_dense<T>(channels, s.units, rng);
        impl = std::move(d);
        break;
      }
    }
    std::visit(Overloaded{
                   [](Conv& c) {
                     c.grads = {BasicTensor<T>(c.params.weight.shape()),
                                BasicTensor<T>(c.params.bias.shape())};
                   },
                   [](Separable& c) {
                     c.grads = {BasicTensor<T>(c.params.depthwise.shape()),
                                BasicTensor<T>(c.params.pointwise.shape()),
                                BasicTensor<T>(c.params.bias.shape())};
                   },
                   [](Dense& d) {
                     d.grads = {BasicTensor<T>(d.params.weight.shape()),
                                BasicTensor<T>(d.params.bias.shape())};
                   },
                   [](auto&) {},
               },
               impl);
    layers_.push_back({info, std::move(impl)});
  }
}

template <typename T>
BasicTensor<T> Network<T>::run_layer(Layer& layer, const BasicTensor<T>& x, nn::NormMode mode,
                                     bool record) {
  const auto& s = layer.info.spec;
  return std::visit(
      Overloaded{
          [&](Conv& c) {
            return nn::conv2d(x, c.params, s.stride, s.padding, record ? &c.cache : nullptr);
          },
          [&](Separable& c) {
            return nn::separable_conv2d(x, c.params, s.stride, s.padding,
                                        record ? &c.cache : nullptr);
          },
          [&](Norm& n) {
            return nn::batchnorm(x, n.params, mode, batchnorm_, record ? &n.cache : nullptr);
          },
          [&](Pool& p) { return nn::maxpool2d(x, s.kernel, s.stride, record ? &p.cache : nullptr); },
          [&](Relu& r) { return nn::relu(x, record ? &r.cache : nullptr); },
          [&](Dense& d) { return nn::dense(x, d.params, record ? &d.cache : nullptr); },
      },
      layer.impl);
}

template <typename T>
BasicTensor<T> Network<T>::forward(const BasicTensor<T>& input, nn::NormMode mode) {
  const Shape expected{config_.input_channels, config_.input_height, config_.input_width};
  if (input.rank() != 4 || Shape(input.shape().begin() + 1, input.shape().end()) != expected) {
    throw ShapeError("network input must be [N," + std::to_string(expected[0]) + "," +
                     std::to_string(expected[1]) + "," + std::to_string(expected[2]) + "], got " +
                     to_string(input.shape()));
  }
  const bool record = mode == nn::NormMode::train;
  BasicTensor<T> x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (i == flatten_at_) {
      flatten_input_shape_ = x.shape();
      x = nn::flatten(x);
    }
    x = run_layer(layers_[i], x, mode, record);
  }
  has_cache_ = record;
  return x;
}

template <typename T>
BasicTensor<T> Network<T>::predict(const BasicTensor<T>& input) {
  return nn::softmax(forward(input, nn::NormMode::infer));
}

template <typename T>
BasicTensor<T> Network<T>::backprop_layer(Layer& layer, const BasicTensor<T>& grad) {
  return std::visit(Overloaded{
                        [&](Conv& c) {
                          auto g = nn::conv2d_backward(grad, c.params, c.cache);
                          c.grads.weight = std::move(g.weight);
                          c.grads.bias = std::move(g.bias);
                          return std::move(g.input);
                        },
                        [&](Separable& c) {
                          auto g = nn::separable_conv2d_backward(grad, c.params, c.cache);
                          c.grads.depthwise = std::move(g.depthwise);
                          c.grads.pointwise = std::move(g.pointwise);
                          c.grads.bias = std::move(g.bias);
                          return std::move(g.input);
                        },
                        [&](Norm& n) {
                          auto g = nn::batchnorm_backward(grad, n.params, n.cache);
                          n.grad_gamma = std::move(g.gamma);
                          n.grad_beta = std::move(g.beta);
                          return std::move(g.input);
                        },
                        [&](Pool& p) { return nn::maxpool2d_backward(grad, p.cache); },
                        [&](Relu& r) { return nn::relu_backward(grad, r.cache); },
                        [&](Dense& d) {
                          auto g = nn::dense_backward(grad, d.params, d.cache);
                          d.grads.weight = std::move(g.weight);
                          d.grads.bias = std::move(g.bias);
                          return std::move(g.input);
                        },
                    },
                    layer.impl);
}

template <typename T>
void Network<T>::backward(const BasicTensor<T>& grad_logits) {
  if (!has_cache_) throw ContractError("backward() needs a preceding train-mode forward()");
  BasicTensor<T> g = grad_logits;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = backprop_layer(layers_[i], g);
    if (i == flatten_at_) g = nn::unflatten(g, flatten_input_shape_);
  }
  has_cache_ = false;
}

template <typename T>
std::vector<optim::ParamSlot<T>> Network<T>::parameters() {
  std::vector<optim::ParamSlot<T>> out;
  for (auto& layer : layers_) {
    const std::string& n = layer.info.name;
    std::visit(Overloaded{
                   [&](Conv& c) {
                     out.push_back({n + ".weight", &c.params.weight, &c.grads.weight});
                     out.push_back({n + ".bias", &c.params.bias, &c.grads.bias});
                   },
                   [&](Separable& c) {
                     out.push_back({n + ".depthwise", &c.params.depthwise, &c.grads.depthwise});
                     out.push_back({n + ".pointwise", &c.params.pointwise, &c.grads.pointwise});
                     out.push_back({n + ".bias", &c.params.bias, &c.grads.bias});
                   },
                   [&](Norm& b) {
                     out.push_back({n + ".gamma", &b.params.gamma, &b.grad_gamma});
                     out.push_back({n + ".beta", &b.params.beta, &b.grad_beta});
                   },
                   [&](Dense& d) {
                     out.push_back({n + ".weight", &d.params.weight, &d.grads.weight});
                     out.push_back({n + ".bias", &d.params.bias, &d.grads.bias});
                   },
                   [](auto&) {},
               },
               layer.impl);
  }
  return out;
}

template <typename T>
std::vector<NamedTensor<T>> Network<T>::buffers() {
  std::vector<NamedTensor<T>> out;
  for (auto& layer : layers_) {
    if (auto* b = std::get_if<Norm>(&layer.impl)) {
      out.push_back({layer.info.name + ".running_mean", &b->params.running_mean});
      out.push_back({layer.info.name + ".running_var", &b->params.running_var});
    }
  }
  return out;
}

template <typename T>
std::size_t Network<T>::allocated_trainable() {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.value->size();
  return n;
}

template <typename T>
std::size_t Network<T>::allocated_non_trainable() {
  std::size_t n = 0;
  for (const auto& b : buffers()) n += b.tensor->size();
  return n;
}

template class Network<float>;
template class Network<double>;

}  // namespace dsnet::model
