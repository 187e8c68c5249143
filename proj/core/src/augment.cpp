#include "dsnet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dsnet/parallel.hpp"

namespace dsnet::augment {

namespace {

// Exact values at multiples of 90 degrees so that quarter and half turns are
// pure index permutations.
void exact_sin_cos(double degrees, double& s, double& c) {
  const double quarter = degrees / 90.0;
  if (quarter == std::floor(quarter)) {
    static constexpr double kSin[] = {0.0, 1.0, 0.0, -1.0};
    static constexpr double kCos[] = {1.0, 0.0, -1.0, 0.0};
    const auto k = static_cast<int>(std::fmod(std::fmod(quarter, 4.0) + 4.0, 4.0));
    s = kSin[k];
    c = kCos[k];
    return;
  }
  const double rad = degrees * std::numbers::pi / 180.0;
  s = std::sin(rad);
  c = std::cos(rad);
}

std::size_t reflect101(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < n ? i : period - i);
}

}  // namespace

Image rotate(const Image& img, RotationDirection direction, double angle_deg) {
  if (!(angle_deg >= 0.0 && angle_deg <= 180.0)) {
    throw ParameterError("rotation angle " + std::to_string(angle_deg) + " outside [0, 180]");
  }
  // Positive angles turn counter-clockwise as displayed (row index grows downward).
  const double ccw = direction == RotationDirection::counter_clockwise ? angle_deg : -angle_deg;
  double s, c;
  exact_sin_cos(ccw, s, c);
  const double cy = (static_cast<double>(img.height()) - 1.0) / 2.0;
  const double cx = (static_cast<double>(img.width()) - 1.0) / 2.0;
  Image out(img.height(), img.width());
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      const double dx = static_cast<double>(x) - cx;
      const double dy = static_cast<double>(y) - cy;
      const double sx = cx + c * dx - s * dy;
      const double sy = cy + s * dx + c * dy;
      out.at(y, x) = sample_bilinear(img, sy, sx, 0.0f);
    }
  }
  out.clamp_range();
  return out;
}

Image flip(const Image& img, FlipAxis axis) {
  const std::size_t h = img.height(), w = img.width();
  Image out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      out.at(y, x) = axis == FlipAxis::horizontal ? img.at(y, w - 1 - x) : img.at(h - 1 - y, x);
    }
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ParameterError("blur sigma must be positive, got " + std::to_string(sigma));
  }
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

Image gaussian_blur(const Image& img, double sigma) {
  const std::vector<double> k = gaussian_kernel(sigma);
  const auto radius = static_cast<std::ptrdiff_t>(k.size() / 2);
  const auto h = static_cast<std::ptrdiff_t>(img.height());
  const auto w = static_cast<std::ptrdiff_t>(img.width());

  // Each output is center + sum_i k_i (p_i - center): equal to the normalized
  // weighted sum, and exactly the input on constant regions.
  auto pass = [&](const Image& src, bool horizontal) {
    Image dst(img.height(), img.width());
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        const double center = src.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        double acc = 0.0;
        for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
          const double p = horizontal
                               ? src.at(static_cast<std::size_t>(y), reflect101(x + i, w))
                               : src.at(reflect101(y + i, h), static_cast<std::size_t>(x));
          acc += k[static_cast<std::size_t>(i + radius)] * (p - center);
        }
        dst.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
            static_cast<float>(center + acc);
      }
    }
    return dst;
  };
  Image out = pass(pass(img, true), false);
  out.clamp_range();
  return out;
}

Image add_noise(const Image& img, NoiseKind kind, double amplitude, Rng& rng) {
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
    throw ParameterError("noise amplitude must be >= 0, got " + std::to_string(amplitude));
  }
  Image out = img;
  if (amplitude == 0.0) return out;
  const double spread = amplitude * 255.0;
  for (float& p : out.data()) {
    const double delta =
        kind == NoiseKind::gaussian ? rng.normal(0.0, spread) : rng.uniform(-spread, spread);
    p = static_cast<float>(p + delta);
  }
  out.clamp_range();
  return out;
}

std::vector<Transform> parse_transform_list(std::string_view list) {
  std::vector<Transform> out;
  if (list == "all") return {kAllTransforms.begin(), kAllTransforms.end()};
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t end = std::min(list.find(',', start), list.size());
    const std::string_view token = list.substr(start, end - start);
    if (!token.empty()) {
      const auto t = parse_transform(token);
      if (!t) throw ParameterError("unknown transform '" + std::string(token) + "'");
      if (std::find(out.begin(), out.end(), *t) != out.end()) {
        throw ParameterError("transform '" + std::string(token) + "' listed twice");
      }
      out.push_back(*t);
    }
    start = end + 1;
  }
  return out;
}

void validate_plan(const AugmentPlan& plan) {
  for (std::size_t i = 0; i < plan.transforms.size(); ++i) {
    for (std::size_t j = i + 1; j < plan.transforms.size(); ++j) {
      if (plan.transforms[i] == plan.transforms[j]) {
        throw ParameterError("transform '" + std::string(transform_name(plan.transforms[i])) +
                             "' listed twice");
      }
    }
  }
  gaussian_kernel(plan.params.blur_sigma);
  if (!(plan.params.noise_amplitude >= 0.0)) throw ParameterError("noise amplitude must be >= 0");
}

std::uint64_t image_seed(std::uint64_t master_seed, std::size_t image_index, Transform t) noexcept {
  return mix_seed(master_seed, static_cast<std::uint64_t>(Stream::augmentation), image_index,
                  static_cast<std::uint64_t>(t));
}

Image apply_transform(const Image& img, Transform t, const AugmentParams& params,
                      std::uint64_t seed) {
  Rng rng(seed);
  switch (t) {
    case Transform::rotate_ccw:
      return rotate(img, RotationDirection::counter_clockwise, rng.uniform(0.0, 180.0));
    case Transform::rotate_cw:
      return rotate(img, RotationDirection::clockwise, rng.uniform(0.0, 180.0));
    case Transform::hflip:
      return flip(img, FlipAxis::horizontal);
    case Transform::vflip:
      return flip(img, FlipAxis::vertical);
    case Transform::blur:
      return gaussian_blur(img, params.blur_sigma);
    case Transform::noise: {
      NoiseKind kind = NoiseKind::gaussian;
      if (params.noise_kind) {
        kind = *params.noise_kind;
      } else if (rng.uniform() >= 0.5) {
        kind = NoiseKind::uniform;
      }
      return add_noise(img, kind, params.noise_amplitude, rng);
    }
  }
  throw ParameterError("unknown transform");
}

AugmentResult augment_dataset(std::span<const Sample> samples, const AugmentPlan& plan) {
  validate_plan(plan);
  const std::size_t per = 1 + plan.transforms.size();
  std::vector<std::vector<Sample>> produced(samples.size());
  std::vector<std::optional<Skip>> skips(samples.size());

  parallel_for(static_cast<std::int64_t>(samples.size()), [&](std::int64_t i_signed) {
    const auto i = static_cast<std::size_t>(i_signed);
    const Sample& src = samples[i];
    if (!src.image.well_formed() || src.label >= kNumClasses) {
      skips[i] = Skip{src.source_path, src.label >= kNumClasses
                                           ? "label out of range"
                                           : "image is empty or has pixels outside [0,255]"};
      return;
    }
    auto& out = produced[i];
    out.reserve(per);
    out.push_back(src);
    for (Transform t : plan.transforms) {
      Sample s;
      s.image = apply_transform(src.image, t, plan.params, image_seed(plan.seed, i, t));
      s.label = src.label;
      s.augmented_by = t;
      s.source_path = src.source_path;
      out.push_back(std::move(s));
    }
  });

  AugmentResult result;
  result.samples.reserve(samples.size() * per);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (skips[i]) {
      result.skipped.push_back(std::move(*skips[i]));
      continue;
    }
    for (auto& s : produced[i]) result.samples.push_back(std::move(s));
  }
  return result;
}

}  // namespace dsnet::augment
