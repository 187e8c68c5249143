#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dsnet/image.hpp"
#include "dsnet/rng.hpp"

namespace dsnet::augment {

enum class RotationDirection { clockwise, counter_clockwise };
enum class FlipAxis { horizontal, vertical };
enum class NoiseKind { gaussian, uniform };

// Rotation about the image center by angle_deg in [0, 180], bilinear
// sampling, black fill, same output size.
Image rotate(const Image& img, RotationDirection direction, double angle_deg);

// horizontal reverses columns, vertical reverses rows.
Image flip(const Image& img, FlipAxis axis);

// Separable Gaussian blur, radius ceil(3 sigma), reflect-101 borders.
Image gaussian_blur(const Image& img, double sigma);

// The normalized 1-D kernel used by gaussian_blur, length 2 * radius + 1.
std::vector<double> gaussian_kernel(double sigma);

// gaussian: pixel += N(0, amplitude * 255); uniform: pixel += U(-a*255, a*255).
Image add_noise(const Image& img, NoiseKind kind, double amplitude, Rng& rng);

struct AugmentParams {
  double blur_sigma = 1.0;
  double noise_amplitude = 0.05;
  std::optional<NoiseKind> noise_kind;  // empty: pick gaussian or uniform per image
};

struct AugmentPlan {
  std::vector<Transform> transforms;  // applied independently, in this order
  AugmentParams params;
  std::uint64_t seed = 0;
};

// Comma separated transform names, or "all". Throws ParameterError naming the
// bad token or a duplicate.
std::vector<Transform> parse_transform_list(std::string_view list);

void validate_plan(const AugmentPlan& plan);

// Seed of the random draws for one (image, transform) pair.
std::uint64_t image_seed(std::uint64_t master_seed, std::size_t image_index, Transform t) noexcept;

// Applies one transform with its per-image randomness drawn from `seed`.
Image apply_transform(const Image& img, Transform t, const AugmentParams& params,
                      std::uint64_t seed);

struct AugmentResult {
  std::vector<Sample> samples;
  std::vector<Skip> skipped;
};

// Every well-formed input yields itself followed by one copy per planned
// transform (same label, provenance recorded), so the output holds
// n * (1 + |transforms|) samples. Malformed inputs are skipped and reported.
AugmentResult augment_dataset(std::span<const Sample> samples, const AugmentPlan& plan);

}  // namespace dsnet::augment
