#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dsnet/image.hpp"
#include "dsnet/nn.hpp"
#include "dsnet/optim.hpp"
#include "dsnet/tensor.hpp"

namespace dsnet::model {

enum class LayerKind { conv2d, separable_conv2d, batchnorm, maxpool, relu, dense };

std::string_view layer_kind_name(LayerKind kind) noexcept;

/// One entry of a declarative network description. `units` is the number of
/// filters for convolutions and of outputs for dense layers; `kernel` and
/// `stride` double as window and stride for maxpool.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t units = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  nn::Padding padding = nn::Padding::same;

  static LayerSpec conv2d(std::size_t filters, std::size_t kernel = 3, std::size_t stride = 1,
                          nn::Padding padding = nn::Padding::same);
  static LayerSpec separable(std::size_t filters, std::size_t kernel = 3, std::size_t stride = 1,
                             nn::Padding padding = nn::Padding::same);
  static LayerSpec batchnorm();
  static LayerSpec maxpool(std::size_t window = 2, std::size_t stride = 2);
  static LayerSpec relu();
  static LayerSpec dense(std::size_t units);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

using Block = std::vector<LayerSpec>;

struct ModelConfig {
  std::size_t input_channels = 1;
  std::size_t input_height = 176;
  std::size_t input_width = 208;
  std::vector<Block> blocks;
  std::vector<LayerSpec> head;  // applied after an implicit flatten
  std::size_t num_classes = kNumClasses;

  // conv2d(16)x2 + pool, then four separable blocks of 32/64/128/256 channels
  // with batchnorm before the pool, then dense 512-128-64-4.
  static ModelConfig reference();

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Structural rules a config must satisfy. The default is the published
// architecture's shape; relaxed() keeps only what the layers themselves need.
struct ArchitectureRules {
  std::optional<std::size_t> blocks = 5;
  std::optional<std::size_t> dense_layers = 4;
  std::optional<std::size_t> num_classes = kNumClasses;

  static ArchitectureRules relaxed() { return {std::nullopt, std::nullopt, std::nullopt}; }
};

// Throws ConfigError naming the first violated rule.
void validate(const ModelConfig& config, const ArchitectureRules& rules = {});

struct LayerInfo {
  std::string name;        // e.g. "block2.separable_conv2d_1"
  LayerSpec spec;
  Shape input_shape;       // without batch axis
  Shape output_shape;
  std::size_t trainable = 0;
  std::size_t non_trainable = 0;
};

// Shape inference plus per-layer parameter counts. Throws ConfigError when a
// layer does not fit its input.
std::vector<LayerInfo> describe(const ModelConfig& config);

struct ParameterCount {
  std::size_t total = 0;
  std::size_t trainable = 0;
  std::size_t non_trainable = 0;

  friend bool operator==(const ParameterCount&, const ParameterCount&) = default;
};

// conv2d (k*k*Cin + 1)*Cout, separable k*k*Cin + (Cin + 1)*Cout, batchnorm
// 2C trainable + 2C running statistics, dense (in + 1)*out.
ParameterCount count_parameters(const ModelConfig& config);

struct TrainConfig {
  std::uint64_t seed = 42;
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  optim::AdamOptions adam;
  nn::BatchNormOptions batchnorm;
};

struct DataConfig {
  std::vector<Transform> augment;
  bool split_first = false;
};

struct RunConfig {
  ModelConfig model = ModelConfig::reference();
  TrainConfig training;
  DataConfig data;
};

// JSON (de)serialization. Every key is optional and unknown keys raise
// ConfigError; see docs/config.schema.json.
RunConfig parse_run_config(std::string_view json_text);
std::string run_config_to_json(const RunConfig& config, int indent = 2);

}  // namespace dsnet::model
