#include "dsnet/image.hpp"

#include <algorithm>
#include <cmath>

namespace dsnet {

Image::Image(Tensor pixels) : pixels_(std::move(pixels)) {
  if (pixels_.rank() != 2) {
    throw ShapeError("image pixels must be [H,W], got " + to_string(pixels_.shape()));
  }
}

void Image::clamp_range() noexcept {
  for (float& p : pixels_.data()) p = std::clamp(p, 0.0f, 255.0f);
}

bool Image::well_formed() const noexcept {
  if (empty()) return false;
  return std::all_of(data().begin(), data().end(),
                     [](float p) { return std::isfinite(p) && p >= 0.0f && p <= 255.0f; });
}

float sample_bilinear(const Image& img, double y, double x, float fill) noexcept {
  const auto h = static_cast<std::ptrdiff_t>(img.height());
  const auto w = static_cast<std::ptrdiff_t>(img.width());
  const double fy0 = std::floor(y);
  const double fx0 = std::floor(x);
  const auto y0 = static_cast<std::ptrdiff_t>(fy0);
  const auto x0 = static_cast<std::ptrdiff_t>(fx0);
  const double ty = y - fy0;
  const double tx = x - fx0;
  auto px = [&](std::ptrdiff_t r, std::ptrdiff_t c) -> double {
    if (r < 0 || c < 0 || r >= h || c >= w) return fill;
    return img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  };
  const double a = px(y0, x0);
  const double top = tx == 0.0 ? a : a + tx * (px(y0, x0 + 1) - a);
  if (ty == 0.0) return static_cast<float>(top);
  const double c = px(y0 + 1, x0);
  const double bottom = tx == 0.0 ? c : c + tx * (px(y0 + 1, x0 + 1) - c);
  return static_cast<float>(top + ty * (bottom - top));
}

std::string_view transform_name(Transform t) noexcept {
  switch (t) {
    case Transform::rotate_ccw: return "rotate_ccw";
    case Transform::rotate_cw: return "rotate_cw";
    case Transform::hflip: return "hflip";
    case Transform::vflip: return "vflip";
    case Transform::blur: return "blur";
    case Transform::noise: return "noise";
  }
  return "unknown";
}

std::optional<Transform> parse_transform(std::string_view name) noexcept {
  for (Transform t : kAllTransforms) {
    if (transform_name(t) == name) return t;
  }
  return std::nullopt;
}

}  // namespace dsnet
