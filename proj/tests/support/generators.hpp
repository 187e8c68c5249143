#pragma once

// Hand-rolled generators for property tests.

#include <algorithm>

#include "dsnet/config.hpp"
#include "dsnet/rng.hpp"

namespace dsnet::test {

// A random config that passes the default (strict) architecture rules: five
// blocks of conv/separable layers with optional relu and batchnorm, one pool
// each, and a four-dense head ending in four classes. Valid padding is only
// drawn when the remaining pools still leave a non-empty map.
inline model::ModelConfig random_model_config(Rng& rng) {
  model::ModelConfig c;
  c.input_channels = 1 + rng.below(2);
  c.input_height = 32 + rng.below(17);
  c.input_width = 32 + rng.below(17);
  std::size_t h = c.input_height, w = c.input_width;
  for (std::size_t b = 0; b < 5; ++b) {
    const std::size_t pools_left = 5 - b;
    model::Block block;
    const std::size_t convs = 1 + rng.below(2);
    for (std::size_t i = 0; i < convs; ++i) {
      const std::size_t k = 1 + rng.below(3);
      const std::size_t filters = 1 + rng.below(8);
      nn::Padding pad = nn::Padding::same;
      if (rng.below(3) == 0 && h >= k - 1 + (std::size_t{1} << pools_left) &&
          w >= k - 1 + (std::size_t{1} << pools_left)) {
        pad = nn::Padding::valid;
        h -= k - 1;
        w -= k - 1;
      }
      block.push_back(rng.below(2) ? model::LayerSpec::separable(filters, k, 1, pad)
                                   : model::LayerSpec::conv2d(filters, k, 1, pad));
      if (rng.below(2)) block.push_back(model::LayerSpec::relu());
    }
    if (rng.below(2)) block.push_back(model::LayerSpec::batchnorm());
    block.push_back(model::LayerSpec::maxpool());
    if (rng.below(4) == 0) block.push_back(model::LayerSpec::batchnorm());
    h /= 2;
    w /= 2;
    c.blocks.push_back(std::move(block));
  }
  c.head.clear();
  for (std::size_t i = 0; i < 3; ++i) {
    c.head.push_back(model::LayerSpec::dense(1 + rng.below(16)));
    if (rng.below(2)) c.head.push_back(model::LayerSpec::relu());
    if (rng.below(4) == 0) c.head.push_back(model::LayerSpec::batchnorm());
  }
  c.head.push_back(model::LayerSpec::dense(4));
  c.num_classes = 4;
  return c;
}

// Two blocks on an 8x8 input, two classes; exercises every layer kind.
inline model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.input_channels = 1;
  c.input_height = 8;
  c.input_width = 8;
  c.blocks = {
      {model::LayerSpec::conv2d(3), model::LayerSpec::relu(), model::LayerSpec::batchnorm(),
       model::LayerSpec::maxpool()},
      {model::LayerSpec::separable(4), model::LayerSpec::relu(), model::LayerSpec::batchnorm(),
       model::LayerSpec::maxpool()},
  };
  c.head = {model::LayerSpec::dense(6), model::LayerSpec::relu(), model::LayerSpec::dense(2)};
  c.num_classes = 2;
  return c;
}

}  // namespace dsnet::test
