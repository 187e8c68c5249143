#include <benchmark/benchmark.h>

#include "dsnet/config.hpp"
#include "dsnet/network.hpp"
#include "dsnet/nn.hpp"
#include "dsnet/optim.hpp"

using namespace dsnet;

namespace {

// Args: channels in, channels out, spatial side.
void BM_Conv2dForward(benchmark::State& state) {
  const auto cin = static_cast<std::size_t>(state.range(0)), cout = static_cast<std::size_t>(state.range(1));
  const auto side = static_cast<std::size_t>(state.range(2));
  Rng rng(1);
  const auto x = Tensor::normal({8, cin, side, side}, rng);
  const nn::Conv2dParams<float> p{Tensor::normal({cout, cin, 3, 3}, rng), Tensor({cout}, 0.0f)};
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d(x, p, 1, nn::Padding::same));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_Conv2dForward)->Args({1, 16, 88})->Args({16, 16, 88})->Args({64, 64, 22});

void BM_Conv2dBackward(benchmark::State& state) {
  const auto cin = static_cast<std::size_t>(state.range(0)), cout = static_cast<std::size_t>(state.range(1));
  const auto side = static_cast<std::size_t>(state.range(2));
  Rng rng(2);
  const auto x = Tensor::normal({8, cin, side, side}, rng);
  const nn::Conv2dParams<float> p{Tensor::normal({cout, cin, 3, 3}, rng), Tensor({cout}, 0.0f)};
  nn::Conv2dCache<float> cache;
  const auto y = nn::conv2d(x, p, 1, nn::Padding::same, &cache);
  const auto g = Tensor::normal(y.shape(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_backward(g, p, cache));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_Conv2dBackward)->Args({1, 16, 88})->Args({16, 16, 88})->Args({64, 64, 22});

void BM_SeparableForward(benchmark::State& state) {
  const auto cin = static_cast<std::size_t>(state.range(0)), cout = static_cast<std::size_t>(state.range(1));
  const auto side = static_cast<std::size_t>(state.range(2));
  Rng rng(3);
  const auto x = Tensor::normal({8, cin, side, side}, rng);
  const nn::SeparableConv2dParams<float> p{Tensor::normal({cin, 3, 3}, rng), Tensor::normal({cout, cin}, rng),
                                           Tensor({cout}, 0.0f)};
  for (auto _ : state) benchmark::DoNotOptimize(nn::separable_conv2d(x, p, 1, nn::Padding::same));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_SeparableForward)->Args({16, 32, 44})->Args({64, 128, 22})->Args({256, 256, 11});

void BM_SeparableBackward(benchmark::State& state) {
  const auto cin = static_cast<std::size_t>(state.range(0)), cout = static_cast<std::size_t>(state.range(1));
  const auto side = static_cast<std::size_t>(state.range(2));
  Rng rng(4);
  const auto x = Tensor::normal({8, cin, side, side}, rng);
  const nn::SeparableConv2dParams<float> p{Tensor::normal({cin, 3, 3}, rng), Tensor::normal({cout, cin}, rng),
                                           Tensor({cout}, 0.0f)};
  nn::SeparableConv2dCache<float> cache;
  const auto y = nn::separable_conv2d(x, p, 1, nn::Padding::same, &cache);
  const auto g = Tensor::normal(y.shape(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::separable_conv2d_backward(g, p, cache));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_SeparableBackward)->Args({16, 32, 44})->Args({64, 128, 22})->Args({256, 256, 11});

void BM_Dense(benchmark::State& state) {
  const auto in = static_cast<std::size_t>(state.range(0)), out = static_cast<std::size_t>(state.range(1));
  Rng rng(5);
  const auto x = Tensor::normal({32, in}, rng);
  const nn::DenseParams<float> p{Tensor::normal({out, in}, rng), Tensor({out}, 0.0f)};
  Tensor cache;
  const auto y = nn::dense(x, p, &cache);
  const auto g = Tensor::normal(y.shape(), rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(nn::dense(x, p, &cache));
    benchmark::DoNotOptimize(nn::dense_backward(g, p, cache));
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_Dense)->Args({7680, 256})->Args({256, 4});

void BM_ReferenceTrainStep(benchmark::State& state) {
  model::Network<float> net(model::ModelConfig::reference(), 42);
  Rng rng(6);
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto x = Tensor::uniform({batch, 1, 176, 208}, rng, 0.0f, 1.0f);
  Tensor t({batch, 4}, 0.0f);
  for (std::size_t i = 0; i < batch; ++i) t[i * 4 + i % 4] = 1.0f;
  auto slots = net.parameters();
  auto adam = optim::make_adam_state<float>(slots);
  for (auto _ : state) {
    const auto sce = optim::softmax_cross_entropy(net.forward(x, nn::NormMode::train), t);
    net.backward(sce.grad_logits);
    optim::adam_step<float>(slots, adam);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_ReferenceTrainStep)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
