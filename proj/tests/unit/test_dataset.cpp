#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "dsnet/dataset.hpp"
#include "dsnet/error.hpp"
#include "dsnet/image_io.hpp"
#include "tempdir.hpp"

using namespace dsnet;
namespace fs = std::filesystem;

namespace {

using test::TempDir;

std::vector<Sample> per_class(std::size_t n, std::size_t side = 4) {
  std::vector<Sample> out;
  for (std::size_t c = 0; c < kNumClasses; ++c)
    for (std::size_t i = 0; i < n; ++i) {
      Sample s;
      s.image = Image(side, side, static_cast<float>(i % 256));
      s.label = c;
      s.source_path = std::string(kClassNames[c]) + "/" + std::to_string(i) + ".pgm";
      out.push_back(std::move(s));
    }
  return out;
}

void make_class_dirs(const fs::path& root) {
  for (auto name : kClassNames) fs::create_directories(root / name);
}

}  // namespace

TEST_CASE("PGM round trip and header") {
  Image img(2, 3);
  for (std::size_t i = 0; i < 6; ++i) img.data()[i] = static_cast<float>(i * 40);
  const auto bytes = io::encode_pgm(img);
  const std::string header(bytes.begin(), bytes.begin() + 11);
  CHECK(header == "P5\n3 2\n255\n");
  CHECK(bytes.size() == 11 + 6);
  CHECK(io::decode_pgm(bytes) == img);
}

TEST_CASE("PGM decoding variants and errors") {
  const std::string ascii = "P2\n# comment\n2 2\n15\n0 15\n5 10\n";
  const Image a = io::decode_pgm(std::span(reinterpret_cast<const std::uint8_t*>(ascii.data()), ascii.size()));
  CHECK(a.at(0, 1) == 255.0f);
  CHECK(a.at(1, 0) == 85.0f);

  const std::string truncated = "P5\n4 4\n255\nabc";
  try {
    io::decode_pgm(std::span(reinterpret_cast<const std::uint8_t*>(truncated.data()), truncated.size()));
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() > 0);
  }
  const std::string bad = "P6\n1 1\n255\nx";
  CHECK_THROWS_AS(io::decode_pgm(std::span(reinterpret_cast<const std::uint8_t*>(bad.data()), bad.size())),
                  FormatError);
}

TEST_CASE("PNG decoding: gray and RGB") {
  Image img(3, 2);
  for (std::size_t i = 0; i < 6; ++i) img.data()[i] = static_cast<float>(i * 50);
  CHECK(io::decode_png(io::encode_png(img)) == img);

  const std::vector<std::uint8_t> rgb{255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 10, 10};
  const Image lum = io::decode_png(io::encode_png_rgb(2, 2, rgb));
  CHECK(lum.at(0, 0) == doctest::Approx(0.299 * 255).epsilon(0.01));
  CHECK(lum.at(0, 1) == doctest::Approx(0.587 * 255).epsilon(0.01));
  CHECK(lum.at(1, 1) == doctest::Approx(10.0).epsilon(0.01));
  const std::vector<std::uint8_t> junk{1, 2, 3};
  CHECK_THROWS_AS(io::decode_png(junk), FormatError);
}

TEST_CASE("unsupported formats carry a conversion hint") {
  TempDir tmp;
  const auto p = tmp.path / "scan.jpg";
  io::write_file(p, std::vector<std::uint8_t>{0xFF, 0xD8});
  CHECK_FALSE(io::is_supported_image(p));
  CHECK(io::is_supported_image(tmp.path / "A.PGM"));
  try {
    io::read_image(p);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("convert") != std::string::npos);
  }
  CHECK_THROWS_AS(io::read_image(tmp.path / "missing.pgm"), IoError);
}

TEST_CASE("load_directory") {
  TempDir tmp;
  make_class_dirs(tmp.path);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    io::write_pgm(tmp.path / kClassNames[c] / "a.pgm", Image(3, 3, static_cast<float>(c * 10)));
  }
  const auto first = data::load_directory(tmp.path);
  REQUIRE(first.samples.size() == 4);
  std::set<std::size_t> labels;
  for (const auto& s : first.samples) {
    labels.insert(s.label);
    CHECK(s.image.at(0, 0) == static_cast<float>(s.label * 10));
  }
  CHECK(labels == std::set<std::size_t>{0, 1, 2, 3});

  io::write_file(tmp.path / "mild" / "broken.pgm", std::vector<std::uint8_t>{'P', '5'});
  io::write_pgm(tmp.path / "mild" / "b.pgm", Image(3, 3, 1.0f));
  const auto second = data::load_directory(tmp.path);
  const auto third = data::load_directory(tmp.path);
  CHECK(second.samples.size() == 5);
  REQUIRE(second.skipped.size() == 1);
  CHECK(second.skipped[0].path.find("broken.pgm") != std::string::npos);
  for (std::size_t i = 0; i < second.samples.size(); ++i) {
    CHECK(second.samples[i].source_path == third.samples[i].source_path);
    if (i > 0) CHECK(second.samples[i - 1].source_path < second.samples[i].source_path);
  }
  CHECK(second.samples[0].source_path == "mild/a.pgm");
}

TEST_CASE("load_directory errors name the problem") {
  TempDir tmp;
  CHECK_THROWS_AS(data::load_directory(tmp.path), ConfigError);
  fs::create_directories(tmp.path / "non_demented");
  fs::create_directories(tmp.path / "mild");
  try {
    data::load_directory(tmp.path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("very_mild") != std::string::npos);
    CHECK(msg.find("moderate") != std::string::npos);
  }
  CHECK_THROWS_AS(data::load_directory(tmp.path / "nope"), ConfigError);
}

TEST_CASE("resize") {
  Rng rng(61);
  Image img(176, 208);
  for (auto& v : img.data()) v = static_cast<float>(rng.below(256));
  CHECK(data::resize(img) == img);

  const Image flat = data::resize(Image(88, 104, 77.0f));
  CHECK(flat.height() == 176);
  CHECK(flat.width() == 208);
  for (float v : flat.data()) REQUIRE(v == 77.0f);

  Image checker(352, 416);
  double in_mean = 0;
  for (std::size_t y = 0; y < 352; ++y)
    for (std::size_t x = 0; x < 416; ++x) {
      checker.at(y, x) = (x + y) % 2 ? 255.0f : 0.0f;
      in_mean += checker.at(y, x);
    }
  in_mean /= 352.0 * 416.0;
  const Image small = data::resize(checker);
  double out_mean = 0;
  for (float v : small.data()) out_mean += v;
  out_mean /= static_cast<double>(small.data().size());
  CHECK(std::abs(out_mean - in_mean) <= 1.0);
}

TEST_CASE("split sizes") {
  for (auto [n, tr, va, te] : std::vector<std::array<std::size_t, 4>>{
           {100, 60, 20, 20}, {10, 6, 2, 2}, {5, 3, 1, 1}, {7, 5, 1, 1}, {1, 1, 0, 0}}) {
    const auto samples = per_class(n);
    const auto s = data::split(samples, 3);
    CHECK(s.train.size() == tr * kNumClasses);
    CHECK(s.validation.size() == va * kNumClasses);
    CHECK(s.test.size() == te * kNumClasses);
  }
  auto missing = per_class(3);
  missing.erase(missing.begin(), missing.begin() + 3);
  CHECK_THROWS_AS(data::split(missing, 1), ConfigError);
}

TEST_CASE("split is a stratified partition") {
  Rng rng(62);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Sample> samples;
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const std::size_t n = 1 + rng.below(30);
      counts[c] = n;
      for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.label = c;
        s.image = Image(1, 1);
        s.source_path = std::to_string(c) + "_" + std::to_string(i);
        samples.push_back(std::move(s));
      }
    }
    const auto sp = data::split(samples, rng.next_u64());
    std::multiset<std::string> seen;
    for (const auto* part : {&sp.train, &sp.validation, &sp.test})
      for (const auto& s : *part) seen.insert(s.source_path);
    REQUIRE(seen.size() == samples.size());
    REQUIRE(std::set<std::string>(seen.begin(), seen.end()).size() == samples.size());
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      auto count = [&](const std::vector<Sample>& v) {
        return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [&](const Sample& s) { return s.label == c; }));
      };
      const std::size_t n = counts[c];
      REQUIRE(count(sp.test) == n * 2 / 10);
      REQUIRE(count(sp.validation) == n * 2 / 10);
      REQUIRE(count(sp.train) == n - 2 * (n * 2 / 10));
      if (n % 5 == 0) REQUIRE(count(sp.train) * 10 == n * 6);
    }
  }
}

TEST_CASE("split is deterministic and seed-dependent") {
  const auto samples = per_class(20);
  const auto a = data::split(samples, 5);
  const auto b = data::split(samples, 5);
  const auto c = data::split(samples, 6);
  CHECK(data::split_manifest_csv(a) == data::split_manifest_csv(b));
  CHECK(data::split_manifest_csv(a) != data::split_manifest_csv(c));
  const std::string csv = data::split_manifest_csv(a);
  CHECK(csv.rfind("path,label,split\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 81);
}

TEST_CASE("one_hot") {
  const std::vector<std::size_t> labels{2};
  CHECK(data::one_hot(std::span<const std::size_t>(labels)) == Tensor({1, 4}, {0, 0, 1, 0}));
  Rng rng(63);
  std::vector<std::size_t> many;
  for (int i = 0; i < 200; ++i) many.push_back(rng.below(4));
  const auto t = data::one_hot<double>(std::span<const std::size_t>(many));
  for (std::size_t i = 0; i < many.size(); ++i) {
    const auto row = std::span<const double>(t.raw() + i * 4, 4);
    REQUIRE(row[0] + row[1] + row[2] + row[3] == 1.0);
    REQUIRE(argmax(row) == many[i]);
  }
  const std::vector<std::size_t> bad{4};
  CHECK_THROWS_AS(data::one_hot(std::span<const std::size_t>(bad)), ContractError);
}

TEST_CASE("batches") {
  auto samples = per_class(3, 2);
  samples.resize(10);
  samples[0].image.at(0, 0) = 255.0f;
  const data::BatchStream plain(samples, 4);
  REQUIRE(plain.size() == 3);
  CHECK(plain[0].images.shape() == Shape{4, 1, 2, 2});
  CHECK(plain[1].images.dim(0) == 4);
  CHECK(plain[2].images.dim(0) == 2);
  CHECK(plain[2].targets.shape() == Shape{2, 4});
  CHECK(plain[0].images[0] == 1.0f);

  const data::BatchStream s1(samples, 4, 99), s2(samples, 4, 99), s3(samples, 4, 100);
  CHECK(s1.order() == s2.order());
  CHECK(s1.order() != s3.order());
  for (std::size_t b = 0; b < s1.size(); ++b) CHECK(s1[b].labels == s2[b].labels);
  CHECK_THROWS_AS(data::BatchStream(samples, 0), ConfigError);
}

TEST_CASE("normalization is monotone onto [0, 1]") {
  std::vector<Sample> ramp(1);
  ramp[0].image = Image(1, 256);
  for (std::size_t i = 0; i < 256; ++i) ramp[0].image.at(0, i) = static_cast<float>(i);
  const auto t = data::BatchStream(ramp, 1)[0].images;
  CHECK(t[0] == 0.0f);
  CHECK(t[255] == 1.0f);
  for (std::size_t i = 1; i < 256; ++i) REQUIRE(t[i] > t[i - 1]);
}

TEST_CASE("pipeline emits [B, 1, 176, 208]") {
  TempDir tmp;
  make_class_dirs(tmp.path);
  Rng rng(64);
  for (std::size_t c = 0; c < kNumClasses; ++c)
    for (int i = 0; i < 5; ++i) {
      Image img(60 + rng.below(40), 70 + rng.below(40));
      for (auto& v : img.data()) v = static_cast<float>(rng.below(256));
      io::write_pgm(tmp.path / kClassNames[c] / ("s" + std::to_string(i) + ".pgm"), img);
    }
  const auto loaded = data::load_directory(tmp.path);
  const auto prepared = data::prepare(loaded.samples, {});
  CHECK(prepared.splits.train.size() == 12);
  CHECK(prepared.splits.validation.size() == 4);
  CHECK(prepared.splits.test.size() == 4);
  const data::BatchStream stream(prepared.splits.train, 5, 1);
  for (std::size_t b = 0; b < stream.size(); ++b) {
    const auto batch = stream[b];
    CHECK(batch.images.dim(1) == 1);
    CHECK(batch.images.dim(2) == 176);
    CHECK(batch.images.dim(3) == 208);
  }
}

TEST_CASE("prepare: augment before split by default, train-only when split first") {
  const auto samples = per_class(10);
  data::PipelineOptions opt;
  opt.height = 4;
  opt.width = 4;
  opt.augment = {Transform::hflip, Transform::vflip};
  opt.seed = 8;
  const auto merged = data::prepare(samples, opt);
  CHECK(merged.splits.train.size() + merged.splits.validation.size() + merged.splits.test.size() == 120);
  CHECK(merged.splits.test.size() == 24);

  opt.split_first = true;
  const auto first = data::prepare(samples, opt);
  CHECK(first.splits.train.size() == 24 * 3);
  CHECK(first.splits.test.size() == 8);
  for (const auto& s : first.splits.test) CHECK(s.is_original());
}

TEST_CASE("pattern dataset") {
  const auto a = data::make_pattern_dataset(5, 44, 52, 7);
  const auto b = data::make_pattern_dataset(5, 44, 52, 7);
  REQUIRE(a.size() == 20);
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].image == b[i].image);
    REQUIRE(a[i].image.well_formed());
    REQUIRE(a[i].image.height() == 44);
  }
  CHECK(a[0].source_path.rfind(std::string(kClassNames[a[0].label]) + "/", 0) == 0);
}
