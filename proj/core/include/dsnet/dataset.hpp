#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsnet/augment.hpp"
#include "dsnet/image.hpp"
#include "dsnet/tensor.hpp"

namespace dsnet::data {

inline constexpr std::size_t kTargetHeight = 176;
inline constexpr std::size_t kTargetWidth = 208;

struct LoadResult {
  std::vector<Sample> samples;
  std::vector<Skip> skipped;
};

// Reads root/{non_demented,very_mild,mild,moderate}/*.{pgm,png}. Samples come
// back in lexicographic path order with source_path "<class>/<file>";
// undecodable or unsupported files are skipped with a reason. Missing class directories raise ConfigError.
LoadResult load_directory(const std::filesystem::path& root);

// Bilinear resampling with half-pixel centers.
Image resize(const Image& img, std::size_t height = kTargetHeight,
             std::size_t width = kTargetWidth);

struct SplitRatio {
  std::size_t train = 6;
  std::size_t validation = 2;
  std::size_t test = 2;
};

struct SplitDataset {
  std::vector<Sample> train;
  std::vector<Sample> validation;
  std::vector<Sample> test;
  std::uint64_t seed = 0;
};

// Stratified split: each class is shuffled with a stream derived from `seed`,
// then floor(n * test / total) samples go to test, floor(n * validation /
// total) to validation and the rest to train. Within each split samples keep
// their input order. A class without samples raises ConfigError.
SplitDataset split(std::span<const Sample> samples, std::uint64_t seed, SplitRatio ratio = {},
                   std::size_t num_classes = kNumClasses);

struct PipelineOptions {
  std::size_t height = kTargetHeight;
  std::size_t width = kTargetWidth;
  std::vector<Transform> augment;
  augment::AugmentParams augment_params;
  bool split_first = false;  // non-default: augment only the train split
  std::uint64_t seed = 0;
};

struct PreparedData {
  SplitDataset splits;
  std::vector<Skip> skipped;
};

// Default order: augment, merge, split, then resize every sample.
PreparedData prepare(std::span<const Sample> samples, const PipelineOptions& options);

template <typename T = float>
BasicTensor<T> one_hot(std::span<const std::size_t> labels, std::size_t num_classes = kNumClasses);

struct Batch {
  Tensor images;   // [B, 1, H, W], pixels scaled to [0, 1]
  Tensor targets;  // [B, K] one-hot
  std::vector<std::size_t> labels;
};

std::uint64_t epoch_shuffle_seed(std::uint64_t master_seed, std::size_t epoch) noexcept;

/// Fixed partition of a sample list into batches. With a shuffle seed the
/// visiting order is a seeded permutation; the last batch may be partial.
class BatchStream {
 public:
  BatchStream(std::span<const Sample> samples, std::size_t batch_size,
              std::optional<std::uint64_t> shuffle_seed = std::nullopt,
              std::size_t num_classes = kNumClasses);

  std::size_t size() const noexcept { return batch_count_; }
  Batch operator[](std::size_t index) const;
  const std::vector<std::size_t>& order() const noexcept { return order_; }

 private:
  std::span<const Sample> samples_;
  std::size_t batch_size_;
  std::size_t batch_count_;
  std::size_t num_classes_;
  std::vector<std::size_t> order_;
};

// Stable identifier of a sample: its source path, suffixed with
// "#<transform>" for augmented copies.
std::string sample_id(const Sample& s);

// CSV with header "path,label,split"; one row per sample, splits in
// train/validation/test order.
std::string split_manifest_csv(const SplitDataset& splits);

// Four classes of distinct geometric patterns (horizontal stripes, vertical
// stripes, disk, diagonal cross) with random placement, contrast and noise.
std::vector<Sample> make_pattern_dataset(std::size_t per_class, std::size_t height,
                                         std::size_t width, std::uint64_t seed);

}  // namespace dsnet::data
