#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "dsnet/tensor.hpp"

namespace dsnet {

/// Single-channel image, pixels stored as floats on the 8-bit scale [0, 255].
class Image {
 public:
  Image() = default;
  Image(std::size_t height, std::size_t width, float fill = 0.0f) : pixels_({height, width}, fill) {}
  explicit Image(Tensor pixels);

  std::size_t height() const noexcept { return pixels_.rank() == 2 ? pixels_.dim(0) : 0; }
  std::size_t width() const noexcept { return pixels_.rank() == 2 ? pixels_.dim(1) : 0; }
  bool empty() const noexcept { return pixels_.empty(); }

  float& at(std::size_t row, std::size_t col) noexcept { return pixels_[row * width() + col]; }
  float at(std::size_t row, std::size_t col) const noexcept { return pixels_[row * width() + col]; }

  std::span<float> data() noexcept { return pixels_.data(); }
  std::span<const float> data() const noexcept { return pixels_.data(); }
  const Tensor& pixels() const noexcept { return pixels_; }

  // Clamp every pixel into [0, 255].
  void clamp_range() noexcept;

  // Non-empty and every pixel finite and within [0, 255].
  bool well_formed() const noexcept;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  Tensor pixels_;
};

// Bilinear sample at (y, x) in pixel-center coordinates; neighbours outside
// the image read as `fill`. Uses the a + f(b - a) form so that integral
// coordinates return the stored pixel exactly.
float sample_bilinear(const Image& img, double y, double x, float fill) noexcept;

// Augmentation transforms. Declared here because samples record which one
// produced them.
enum class Transform { rotate_ccw, rotate_cw, hflip, vflip, blur, noise };

inline constexpr std::array<Transform, 6> kAllTransforms = {
    Transform::rotate_ccw, Transform::rotate_cw, Transform::hflip,
    Transform::vflip,      Transform::blur,      Transform::noise};

std::string_view transform_name(Transform t) noexcept;
std::optional<Transform> parse_transform(std::string_view name) noexcept;

// Dementia-stage labels; the index is the class id used everywhere.
inline constexpr std::size_t kNumClasses = 4;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "non_demented", "very_mild", "mild", "moderate"};

struct Sample {
  Image image;
  std::size_t label = 0;
  std::optional<Transform> augmented_by;  // empty for original images
  std::string source_path;

  bool is_original() const noexcept { return !augmented_by.has_value(); }
};

// Unusable input, recorded instead of aborting a bulk operation.
struct Skip {
  std::string path;
  std::string reason;
};

}  // namespace dsnet
