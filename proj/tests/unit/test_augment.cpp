#include <doctest.h>

#include <cmath>

#include "dsnet/augment.hpp"
#include "dsnet/error.hpp"

using namespace dsnet;
using augment::FlipAxis;
using augment::RotationDirection;

namespace {

Image random_image(Rng& rng, std::size_t max_side = 24) {
  const std::size_t h = 1 + rng.below(max_side), w = 1 + rng.below(max_side);
  Image img(h, w);
  for (auto& v : img.data()) v = static_cast<float>(rng.below(256));
  return img;
}

float max_diff(const Image& a, const Image& b) {
  float d = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

std::vector<Sample> labelled(std::size_t n, Rng& rng) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.image = random_image(rng, 12);
    s.label = i % kNumClasses;
    s.source_path = "img" + std::to_string(i) + ".pgm";
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("flip examples") {
  const Image img(Tensor({2, 2}, {1, 2, 3, 4}));
  CHECK(augment::flip(img, FlipAxis::horizontal) == Image(Tensor({2, 2}, {2, 1, 4, 3})));
  CHECK(augment::flip(img, FlipAxis::vertical) == Image(Tensor({2, 2}, {3, 4, 1, 2})));
}

TEST_CASE("flip algebra") {
  Rng rng(51);
  for (int trial = 0; trial < 300; ++trial) {
    const Image img = random_image(rng);
    const Image h = augment::flip(img, FlipAxis::horizontal);
    const Image v = augment::flip(img, FlipAxis::vertical);
    REQUIRE(augment::flip(h, FlipAxis::horizontal) == img);
    REQUIRE(augment::flip(v, FlipAxis::vertical) == img);
    REQUIRE(augment::flip(h, FlipAxis::vertical) == augment::flip(v, FlipAxis::horizontal));
  }
}

TEST_CASE("rotation identities") {
  Rng rng(52);
  for (int trial = 0; trial < 300; ++trial) {
    const Image img = random_image(rng);
    REQUIRE(augment::rotate(img, RotationDirection::clockwise, 0.0) == img);
    REQUIRE(augment::rotate(img, RotationDirection::counter_clockwise, 0.0) == img);
    const Image both = augment::flip(augment::flip(img, FlipAxis::horizontal), FlipAxis::vertical);
    REQUIRE(max_diff(augment::rotate(img, RotationDirection::clockwise, 180.0), both) <= 1.0f);
    REQUIRE(max_diff(augment::rotate(img, RotationDirection::counter_clockwise, 180.0), both) <= 1.0f);
  }
}

TEST_CASE("rotation direction and range") {
  // A bright pixel right of center moves up for counter-clockwise, down for clockwise.
  Image img(5, 5, 0.0f);
  img.at(2, 4) = 200.0f;
  const Image ccw = augment::rotate(img, RotationDirection::counter_clockwise, 90.0);
  const Image cw = augment::rotate(img, RotationDirection::clockwise, 90.0);
  CHECK(ccw.at(0, 2) == 200.0f);
  CHECK(cw.at(4, 2) == 200.0f);
  CHECK_THROWS_AS(augment::rotate(img, RotationDirection::clockwise, -1.0), ParameterError);
  CHECK_THROWS_AS(augment::rotate(img, RotationDirection::clockwise, 180.5), ParameterError);
}

TEST_CASE("rotation round trip recovers an interior disk center") {
  Rng rng(53);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t side = 31 + 2 * rng.below(10);
    Image disk(side, side, 20.0f);
    const double c = (static_cast<double>(side) - 1) / 2;
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x)
        if (std::hypot(y - c, x - c) < static_cast<double>(side) / 4) disk.at(y, x) = 220.0f;
    const double angle = rng.uniform(0, 180);
    const Image back = augment::rotate(augment::rotate(disk, RotationDirection::clockwise, angle),
                                       RotationDirection::counter_clockwise, angle);
    const std::size_t m = side / 2;
    REQUIRE(std::abs(back.at(m, m) - disk.at(m, m)) <= 2.0f);
  }
}

TEST_CASE("gaussian blur") {
  Rng rng(54);
  for (int trial = 0; trial < 200; ++trial) {
    const float v = static_cast<float>(rng.below(256));
    Image flat(1 + rng.below(20), 1 + rng.below(20), v);
    REQUIRE(augment::gaussian_blur(flat, rng.uniform(0.3, 3.0)) == flat);
  }

  Image impulse(21, 21, 0.0f);
  impulse.at(10, 10) = 255.0f;
  const Image out = augment::gaussian_blur(impulse, 1.0);
  double total = 0;
  for (float p : out.data()) total += p;
  CHECK(std::abs(total - 255.0) < 1e-3 * 255.0);

  // Normalized 2-D Gaussian weight at the origin, radius ceil(3 sigma) = 3.
  double norm = 0;
  for (int x = -3; x <= 3; ++x) norm += std::exp(-x * x / 2.0);
  const double center = 1.0 / (norm * norm);
  CHECK(out.at(10, 10) == doctest::Approx(255.0 * center).epsilon(1e-5));

  const auto k = augment::gaussian_kernel(1.0);
  CHECK(k.size() == 7);
  CHECK(k[3] == doctest::Approx(1.0 / norm).epsilon(1e-12));
  CHECK_THROWS_AS(augment::gaussian_blur(impulse, 0.0), ParameterError);
}

TEST_CASE("noise") {
  Rng rng(55);
  const Image img = random_image(rng);
  Rng r0(1);
  CHECK(augment::add_noise(img, augment::NoiseKind::gaussian, 0.0, r0) == img);
  Rng a(9), b(9);
  CHECK(augment::add_noise(img, augment::NoiseKind::uniform, 0.05, a) ==
        augment::add_noise(img, augment::NoiseKind::uniform, 0.05, b));

  const Image gray(176, 208, 128.0f);
  Rng g(10);
  const Image noisy = augment::add_noise(gray, augment::NoiseKind::gaussian, 0.05, g);
  double mean = 0;
  for (std::size_t i = 0; i < gray.data().size(); ++i) mean += noisy.data()[i] - gray.data()[i];
  mean /= static_cast<double>(gray.data().size());
  CHECK(std::abs(mean) <= 1.0);
  CHECK_THROWS_AS(augment::add_noise(gray, augment::NoiseKind::gaussian, -0.1, g), ParameterError);
}

TEST_CASE("every transform preserves size and range") {
  Rng rng(56);
  augment::AugmentParams params;
  for (int trial = 0; trial < 200; ++trial) {
    const Image img = random_image(rng);
    for (Transform t : kAllTransforms) {
      const Image out = augment::apply_transform(img, t, params, rng.next_u64());
      REQUIRE(out.height() == img.height());
      REQUIRE(out.width() == img.width());
      REQUIRE(out.well_formed());
    }
  }
}

TEST_CASE("transform names") {
  CHECK(augment::parse_transform_list("all").size() == 6);
  CHECK(augment::parse_transform_list("hflip,blur") == std::vector<Transform>{Transform::hflip, Transform::blur});
  CHECK(augment::parse_transform_list("").empty());
  try {
    augment::parse_transform_list("hflip,twirl");
    FAIL("expected ParameterError");
  } catch (const ParameterError& e) {
    CHECK(std::string(e.what()).find("twirl") != std::string::npos);
  }
  CHECK_THROWS_AS(augment::parse_transform_list("blur,blur"), ParameterError);
  for (Transform t : kAllTransforms) CHECK(parse_transform(transform_name(t)) == t);
}

TEST_CASE("augment_dataset multiplier, labels and provenance") {
  Rng rng(57);
  const auto samples = labelled(10, rng);
  augment::AugmentPlan plan{augment::parse_transform_list("all"), {}, 3};
  const auto out = augment::augment_dataset(samples, plan);
  CHECK(out.samples.size() == 70);
  CHECK(out.skipped.empty());
  for (std::size_t i = 0; i < 10; ++i) {
    const auto& orig = out.samples[i * 7];
    CHECK(orig.is_original());
    CHECK(orig.image == samples[i].image);
    for (std::size_t j = 1; j < 7; ++j) {
      const auto& s = out.samples[i * 7 + j];
      CHECK(s.label == samples[i].label);
      CHECK(s.source_path == samples[i].source_path);
      CHECK(s.augmented_by == kAllTransforms[j - 1]);
    }
  }
  const auto again = augment::augment_dataset(samples, plan);
  for (std::size_t i = 0; i < 70; ++i) REQUIRE(again.samples[i].image == out.samples[i].image);

  augment::AugmentPlan empty{{}, {}, 3};
  const auto same = augment::augment_dataset(samples, empty);
  REQUIRE(same.samples.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) CHECK(same.samples[i].image == samples[i].image);
}

TEST_CASE("augment_dataset multiplier over random plans") {
  Rng rng(58);
  for (int trial = 0; trial < 100; ++trial) {
    const auto samples = labelled(rng.below(6), rng);
    augment::AugmentPlan plan;
    for (Transform t : kAllTransforms)
      if (rng.below(2)) plan.transforms.push_back(t);
    plan.seed = rng.next_u64();
    const auto out = augment::augment_dataset(samples, plan);
    REQUIRE(out.samples.size() == samples.size() * (1 + plan.transforms.size()));
  }
}

TEST_CASE("malformed inputs are skipped and reported") {
  Rng rng(59);
  auto samples = labelled(3, rng);
  samples[1].image = Image();
  samples[2].label = 9;
  augment::AugmentPlan plan{{Transform::hflip}, {}, 1};
  const auto out = augment::augment_dataset(samples, plan);
  CHECK(out.samples.size() == 2);
  CHECK(out.skipped.size() == 2);
  CHECK(out.skipped[0].path == "img1.pgm");
}
