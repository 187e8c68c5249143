#include "dsnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dsnet/image_io.hpp"
#include "dsnet/parallel.hpp"
#include "dsnet/rng.hpp"

namespace dsnet::data {

namespace fs = std::filesystem;

LoadResult load_directory(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw ConfigError("data root '" + root.string() + "' is not a directory");
  }
  std::vector<std::string> found;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) found.push_back(entry.path().filename().string());
  }
  std::sort(found.begin(), found.end());
  std::vector<std::string> missing;
  for (auto name : kClassNames) {
    if (std::find(found.begin(), found.end(), name) == found.end()) missing.emplace_back(name);
  }
  if (!missing.empty()) {
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
      return s.empty() ? std::string("nothing") : s;
    };
    throw ConfigError("missing class directories under '" + root.string() + "': " + join(missing) +
                      " (found: " + join(found) + ")");
  }

  struct Entry {
    fs::path path;
    std::size_t label;
  };
  std::vector<Entry> files;
  for (std::size_t label = 0; label < kNumClasses; ++label) {
    for (const auto& entry : fs::directory_iterator(root / kClassNames[label])) {
      if (entry.is_regular_file()) files.push_back({entry.path(), label});
    }
  }
  std::sort(files.begin(), files.end(),
            [](const Entry& a, const Entry& b) { return a.path.string() < b.path.string(); });

  std::vector<std::optional<Sample>> decoded(files.size());
  std::vector<std::string> errors(files.size());
  parallel_for(static_cast<std::int64_t>(files.size()), [&](std::int64_t i) {
    const auto& f = files[static_cast<std::size_t>(i)];
    try {
      Sample s;
      s.image = io::read_image(f.path);
      s.label = f.label;
      s.source_path = std::string(kClassNames[f.label]) + "/" + f.path.filename().string();
      decoded[static_cast<std::size_t>(i)] = std::move(s);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  });

  LoadResult result;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (decoded[i]) {
      result.samples.push_back(std::move(*decoded[i]));
    } else {
      result.skipped.push_back({files[i].path.string(), errors[i]});
    }
  }
  return result;
}

Image resize(const Image& img, std::size_t height, std::size_t width) {
  if (img.empty()) throw ShapeError("resize: empty source image");
  if (height == 0 || width == 0) throw ShapeError("resize: empty target size");
  Image out(height, width);
  const double sy = static_cast<double>(img.height()) / static_cast<double>(height);
  const double sx = static_cast<double>(img.width()) / static_cast<double>(width);
  const double max_y = static_cast<double>(img.height() - 1);
  const double max_x = static_cast<double>(img.width() - 1);
  for (std::size_t y = 0; y < height; ++y) {
    const double src_y = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, max_y);
    for (std::size_t x = 0; x < width; ++x) {
      const double src_x = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, max_x);
      out.at(y, x) = sample_bilinear(img, src_y, src_x, 0.0f);
    }
  }
  out.clamp_range();
  return out;
}

SplitDataset split(std::span<const Sample> samples, std::uint64_t seed, SplitRatio ratio,
                   std::size_t num_classes) {
  const std::size_t total = ratio.train + ratio.validation + ratio.test;
  if (total == 0) throw ConfigError("split ratio must not be all zero");
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].label >= num_classes) {
      throw ContractError("sample label " + std::to_string(samples[i].label) + " out of range");
    }
    by_class[samples[i].label].push_back(i);
  }
  std::vector<std::size_t> train, val, test;
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) {
      throw ConfigError("class '" +
                        (c < kClassNames.size() ? std::string(kClassNames[c]) : std::to_string(c)) +
                        "' has no samples");
    }
    Rng rng = make_stream(seed, Stream::split, c);
    rng.shuffle(std::span<std::size_t>(idx));
    const std::size_t n = idx.size();
    const std::size_t n_test = n * ratio.test / total;
    const std::size_t n_val = n * ratio.validation / total;
    test.insert(test.end(), idx.begin(), idx.begin() + n_test);
    val.insert(val.end(), idx.begin() + n_test, idx.begin() + n_test + n_val);
    train.insert(train.end(), idx.begin() + n_test + n_val, idx.end());
  }
  auto gather = [&](std::vector<std::size_t>& idx) {
    std::sort(idx.begin(), idx.end());
    std::vector<Sample> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(samples[i]);
    return out;
  };
  return {gather(train), gather(val), gather(test), seed};
}

PreparedData prepare(std::span<const Sample> samples, const PipelineOptions& options) {
  PreparedData out;
  augment::AugmentPlan plan{options.augment, options.augment_params, options.seed};
  auto resize_all = [&](std::vector<Sample>& v) {
    parallel_for(static_cast<std::int64_t>(v.size()), [&](std::int64_t i) {
      auto& s = v[static_cast<std::size_t>(i)];
      s.image = resize(s.image, options.height, options.width);
    });
  };
  if (options.split_first) {
    out.splits = split(samples, options.seed);
    auto aug = augment::augment_dataset(out.splits.train, plan);
    out.splits.train = std::move(aug.samples);
    out.skipped = std::move(aug.skipped);
  } else {
    auto aug = augment::augment_dataset(samples, plan);
    out.skipped = std::move(aug.skipped);
    out.splits = split(aug.samples, options.seed);
  }
  resize_all(out.splits.train);
  resize_all(out.splits.validation);
  resize_all(out.splits.test);
  return out;
}

template <typename T>
BasicTensor<T> one_hot(std::span<const std::size_t> labels, std::size_t num_classes) {
  BasicTensor<T> out({labels.size(), num_classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw ContractError("label " + std::to_string(labels[i]) + " out of range for " +
                          std::to_string(num_classes) + " classes");
    }
    out[i * num_classes + labels[i]] = T{1};
  }
  return out;
}

template Tensor one_hot<float>(std::span<const std::size_t>, std::size_t);
template Tensor64 one_hot<double>(std::span<const std::size_t>, std::size_t);

std::uint64_t epoch_shuffle_seed(std::uint64_t master_seed, std::size_t epoch) noexcept {
  return mix_seed(master_seed, static_cast<std::uint64_t>(Stream::shuffle), epoch);
}

BatchStream::BatchStream(std::span<const Sample> samples, std::size_t batch_size,
                         std::optional<std::uint64_t> shuffle_seed, std::size_t num_classes)
    : samples_(samples), batch_size_(batch_size), num_classes_(num_classes) {
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  for (const auto& s : samples) {
    if (s.image.height() != samples.front().image.height() ||
        s.image.width() != samples.front().image.width()) {
      throw ShapeError("batching requires equally sized images; '" + s.source_path + "' differs");
    }
  }
  order_.resize(samples.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (shuffle_seed) Rng(*shuffle_seed).shuffle(std::span<std::size_t>(order_));
  batch_count_ = (samples.size() + batch_size - 1) / batch_size;
}

Batch BatchStream::operator[](std::size_t index) const {
  if (index >= batch_count_) throw ContractError("batch index out of range");
  const std::size_t begin = index * batch_size_;
  const std::size_t end = std::min(begin + batch_size_, samples_.size());
  const std::size_t b = end - begin;
  const std::size_t h = samples_.front().image.height();
  const std::size_t w = samples_.front().image.width();
  Batch batch;
  batch.images = Tensor({b, 1, h, w});
  batch.labels.reserve(b);
  for (std::size_t i = 0; i < b; ++i) {
    const Sample& s = samples_[order_[begin + i]];
    const auto px = s.image.data();
    float* dst = batch.images.raw() + i * h * w;
    for (std::size_t j = 0; j < px.size(); ++j) dst[j] = px[j] / 255.0f;
    batch.labels.push_back(s.label);
  }
  batch.targets = one_hot<float>(batch.labels, num_classes_);
  return batch;
}

std::string sample_id(const Sample& s) {
  if (s.is_original()) return s.source_path;
  return s.source_path + "#" + std::string(transform_name(*s.augmented_by));
}

namespace {
std::string csv_field(const std::string& v) {
  if (v.find_first_of(",\"\n") == std::string::npos) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}
}  // namespace

std::string split_manifest_csv(const SplitDataset& splits) {
  std::string out = "path,label,split\n";
  auto emit = [&](const std::vector<Sample>& v, const char* name) {
    for (const auto& s : v) {
      out += csv_field(sample_id(s)) + "," + std::to_string(s.label) + "," + name + "\n";
    }
  };
  emit(splits.train, "train");
  emit(splits.validation, "validation");
  emit(splits.test, "test");
  return out;
}

std::vector<Sample> make_pattern_dataset(std::size_t per_class, std::size_t height,
                                         std::size_t width, std::uint64_t seed) {
  if (height < 8 || width < 8) throw ParameterError("pattern images need at least 8x8 pixels");
  std::vector<Sample> out;
  out.reserve(per_class * kNumClasses);
  const double h = static_cast<double>(height), w = static_cast<double>(width);
  for (std::size_t label = 0; label < kNumClasses; ++label) {
    for (std::size_t i = 0; i < per_class; ++i) {
      Rng rng = make_stream(seed, Stream::synthetic, label, i);
      const double background = rng.uniform(10.0, 50.0);
      const double foreground = rng.uniform(150.0, 230.0);
      const double period = rng.uniform(6.0, 10.0);
      const double phase = rng.uniform(0.0, period);
      const double cy = h / 2.0 + rng.uniform(-h / 8.0, h / 8.0);
      const double cx = w / 2.0 + rng.uniform(-w / 8.0, w / 8.0);
      const double radius = rng.uniform(h / 6.0, h / 3.0);
      const double arm = std::min(h, w) * rng.uniform(0.3, 0.45);
      Image img(height, width);
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          const double dy = static_cast<double>(y) - cy;
          const double dx = static_cast<double>(x) - cx;
          bool on = false;
          switch (label) {
            case 0: on = std::fmod(static_cast<double>(y) + phase, period) < period / 2.0; break;
            case 1: on = std::fmod(static_cast<double>(x) + phase, period) < period / 2.0; break;
            case 2: on = dx * dx + dy * dy <= radius * radius; break;
            default:
              on = (std::abs(dx - dy) <= 2.0 || std::abs(dx + dy) <= 2.0) &&
                   std::abs(dx) <= arm && std::abs(dy) <= arm;
              break;
          }
          img.at(y, x) = static_cast<float>((on ? foreground : background) + rng.normal(0.0, 12.0));
        }
      }
      img.clamp_range();
      Sample s;
      s.image = std::move(img);
      s.label = label;
      s.source_path = std::string(kClassNames[label]) + "/pattern_" +
                      std::string(3 - std::min<std::size_t>(3, std::to_string(i).size()), '0') +
                      std::to_string(i) + ".pgm";
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace dsnet::data
