#include "dsnet/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include "dsnet/augment.hpp"
#include "dsnet/checkpoint.hpp"
#include "dsnet/dataset.hpp"
#include "dsnet/error.hpp"
#include "dsnet/image_io.hpp"
#include "dsnet/parallel.hpp"
#include "dsnet/trainer.hpp"

namespace dsnet::cli {

namespace fs = std::filesystem;

namespace {

template <typename... Args>
std::string format(const char* fmt, Args... args) {
  const int n = std::snprintf(nullptr, 0, fmt, args...);
  std::string s(static_cast<std::size_t>(n) + 1, '\0');
  std::snprintf(s.data(), s.size(), fmt, args...);
  s.pop_back();
  return s;
}

void refuse_overwrite(const std::vector<fs::path>& outputs, bool force) {
  if (force) return;
  for (const auto& p : outputs) {
    if (fs::exists(p)) {
      throw ConfigError("refusing to overwrite '" + p.string() + "' (pass --force)");
    }
  }
}

void write_text(const fs::path& path, const std::string& text) {
  io::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

model::RunConfig load_config(const std::optional<std::string>& path) {
  if (!path) return {};
  const auto bytes = io::read_file(*path);
  try {
    return model::parse_run_config(
        std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  } catch (const ConfigError& e) {
    throw ConfigError(*path + ": " + e.what());
  }
}

data::PipelineOptions pipeline_options(const model::RunConfig& rc) {
  data::PipelineOptions o;
  o.height = rc.model.input_height;
  o.width = rc.model.input_width;
  o.augment = rc.data.augment;
  o.split_first = rc.data.split_first;
  o.seed = rc.training.seed;
  return o;
}

void report_skips(const std::vector<Skip>& skipped, std::ostream& err) {
  for (const auto& s : skipped) err << "skipped " << s.path << ": " << s.reason << '\n';
}

// "mild/scan.png" -> "mild/scan.pgm"; augmented copies get ".<transform>" before
// the extension.
std::string output_name(const Sample& s) {
  fs::path p(s.source_path);
  std::string stem = (p.parent_path() / p.stem()).generic_string();
  if (s.augmented_by) stem += "." + std::string(transform_name(*s.augmented_by));
  return stem + ".pgm";
}

std::vector<std::string> output_names(const std::vector<Sample>& samples) {
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (const auto& s : samples) {
    names.push_back(output_name(s));
    if (!seen.insert(names.back()).second) {
      throw ConfigError("two inputs map to the same output file '" + names.back() + "'");
    }
  }
  return names;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::size_t per_class = 50;
  std::size_t height = 44;
  std::size_t width = 52;
  std::uint64_t seed = 7;
  bool force = false;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const auto samples = data::make_pattern_dataset(a.per_class, a.height, a.width, a.seed);
  std::vector<fs::path> paths;
  for (const auto& s : samples) paths.push_back(fs::path(a.out) / s.source_path);
  refuse_overwrite(paths, a.force);
  for (auto name : kClassNames) fs::create_directories(fs::path(a.out) / name);
  for (std::size_t i = 0; i < samples.size(); ++i) io::write_pgm(paths[i], samples[i].image);
  out << "wrote " << samples.size() << " images to " << a.out << '\n';
  return kSuccess;
}

// ---- augment -------------------------------------------------------------

struct AugmentArgs {
  std::string data;
  std::string out;
  std::string transforms = "all";
  std::uint64_t seed = 0;
  double blur_sigma = 1.0;
  double noise_amplitude = 0.05;
  bool force = false;
};

int cmd_augment(const AugmentArgs& a, std::ostream& out, std::ostream& err) {
  augment::AugmentPlan plan;
  plan.transforms = augment::parse_transform_list(a.transforms);
  plan.params.blur_sigma = a.blur_sigma;
  plan.params.noise_amplitude = a.noise_amplitude;
  plan.seed = a.seed;
  augment::validate_plan(plan);

  const auto loaded = data::load_directory(a.data);
  report_skips(loaded.skipped, err);
  const auto result = augment::augment_dataset(loaded.samples, plan);
  report_skips(result.skipped, err);

  const fs::path root(a.out);
  const auto names = output_names(result.samples);
  std::vector<fs::path> paths{root / "manifest.csv"};
  for (const auto& n : names) paths.push_back(root / n);
  refuse_overwrite(paths, a.force);

  for (auto name : kClassNames) fs::create_directories(root / name);
  std::string manifest = "path,label,transform,source\n";
  for (std::size_t i = 0; i < result.samples.size(); ++i) {
    const auto& s = result.samples[i];
    io::write_pgm(root / names[i], s.image);
    manifest += csv_field(names[i]) + "," + std::string(kClassNames[s.label]) + "," +
                (s.augmented_by ? std::string(transform_name(*s.augmented_by)) : "original") +
                "," + csv_field(s.source_path) + "\n";
  }
  write_text(root / "manifest.csv", manifest);
  out << "in=" << loaded.samples.size() << " out=" << result.samples.size() << '\n';
  return kSuccess;
}

// ---- prepare -------------------------------------------------------------

struct PrepareArgs {
  std::string data;
  std::string out;
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

int cmd_prepare(const PrepareArgs& a, std::ostream& out, std::ostream& err) {
  model::RunConfig rc = load_config(a.config);
  if (a.seed) rc.training.seed = *a.seed;
  const auto loaded = data::load_directory(a.data);
  report_skips(loaded.skipped, err);
  const auto prepared = data::prepare(loaded.samples, pipeline_options(rc));
  report_skips(prepared.skipped, err);

  const fs::path root(a.out);
  const std::pair<const char*, const std::vector<Sample>*> parts[] = {
      {"train", &prepared.splits.train},
      {"validation", &prepared.splits.validation},
      {"test", &prepared.splits.test}};
  std::vector<fs::path> paths{root / "split.csv"};
  std::vector<std::vector<std::string>> names;
  for (const auto& [dir, samples] : parts) {
    names.push_back(output_names(*samples));
    for (const auto& n : names.back()) paths.push_back(root / dir / n);
  }
  refuse_overwrite(paths, a.force);

  for (std::size_t p = 0; p < 3; ++p) {
    for (auto name : kClassNames) fs::create_directories(root / parts[p].first / name);
    const auto& samples = *parts[p].second;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      io::write_pgm(root / parts[p].first / names[p][i], samples[i].image);
    }
  }
  write_text(root / "split.csv", data::split_manifest_csv(prepared.splits));
  out << "train=" << prepared.splits.train.size()
      << " validation=" << prepared.splits.validation.size()
      << " test=" << prepared.splits.test.size() << '\n';
  return kSuccess;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::optional<std::string> config;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> batch_size;
  std::optional<double> learning_rate;
  std::optional<std::string> augment;
  bool split_first = false;
  std::string out;
  bool force = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  model::RunConfig rc = load_config(a.config);
  if (a.epochs) rc.training.epochs = *a.epochs;
  if (a.seed) rc.training.seed = *a.seed;
  if (a.batch_size) rc.training.batch_size = *a.batch_size;
  if (a.learning_rate) rc.training.adam.learning_rate = *a.learning_rate;
  if (a.augment) rc.data.augment = augment::parse_transform_list(*a.augment);
  if (a.split_first) rc.data.split_first = true;
  if (rc.training.batch_size == 0) throw ConfigError("batch_size must be >= 1");

  model::TrainState state = model::build_model(rc);

  const fs::path root(a.out);
  const fs::path metrics_path = root / "metrics.csv";
  const fs::path best_path = root / "best.ckpt";
  const fs::path last_path = root / "last.ckpt";
  const fs::path split_path = root / "split.csv";
  refuse_overwrite({metrics_path, best_path, last_path, split_path}, a.force);

  const auto loaded = data::load_directory(a.data);
  report_skips(loaded.skipped, err);
  const auto prepared = data::prepare(loaded.samples, pipeline_options(rc));
  report_skips(prepared.skipped, err);
  const auto& splits = prepared.splits;
  out << "train=" << splits.train.size() << " validation=" << splits.validation.size()
      << " test=" << splits.test.size() << '\n';

  const std::size_t epochs = rc.training.epochs;
  const auto history =
      model::train(state, splits.train, splits.validation, epochs, [&](const model::EpochMetrics& m) {
        out << format("epoch %zu/%zu train_loss=%.6f train_acc=%.6f val_loss=%.6f val_acc=%.6f\n",
                      m.epoch, epochs, m.train_loss, m.train_acc, m.val_loss, m.val_acc)
            << std::flush;
      });

  fs::create_directories(root);
  model::export_metrics(history, metrics_path);
  model::save_checkpoint(state, last_path);
  model::save_checkpoint(model::best_state(state), best_path);
  write_text(split_path, data::split_manifest_csv(splits));

  const auto train_eval = model::evaluate(state.network, splits.train, rc.training.batch_size);
  const auto val_eval = model::evaluate(state.network, splits.validation, rc.training.batch_size);
  out << format("final train_acc=%.6f val_acc=%.6f\n", train_eval.accuracy, val_eval.accuracy);
  if (state.best) {
    out << format("best epoch=%zu val_acc=%.6f\n", state.best->epoch, state.best->val_accuracy);
  }
  return kSuccess;
}

// ---- evaluate ------------------------------------------------------------

struct EvaluateArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  model::TrainState state = model::load_checkpoint(a.checkpoint);
  const auto loaded = data::load_directory(a.data);
  report_skips(loaded.skipped, err);
  const auto prepared = data::prepare(loaded.samples, pipeline_options(state.config));
  const auto& sp = prepared.splits;

  std::vector<Sample> selected;
  if (a.split == "train") {
    selected = sp.train;
  } else if (a.split == "validation") {
    selected = sp.validation;
  } else if (a.split == "test") {
    selected = sp.test;
  } else {
    selected = sp.train;
    selected.insert(selected.end(), sp.validation.begin(), sp.validation.end());
    selected.insert(selected.end(), sp.test.begin(), sp.test.end());
  }

  const auto ev = model::evaluate(state.network, selected, state.config.training.batch_size);
  out << "split=" << a.split << " samples=" << ev.count << '\n';
  out << format("loss=%.6f\n", ev.loss);
  out << format("accuracy=%.6f\n", ev.accuracy);
  out << "confusion (rows: true class, columns: predicted)\n";
  out << format("%-13s", "");
  for (std::size_t p = 0; p < ev.num_classes; ++p) {
    out << format(" %12s", std::string(p < kNumClasses ? kClassNames[p] : "?").c_str());
  }
  out << '\n';
  for (std::size_t t = 0; t < ev.num_classes; ++t) {
    out << format("%-13s", std::string(t < kNumClasses ? kClassNames[t] : "?").c_str());
    for (std::size_t p = 0; p < ev.num_classes; ++p) out << format(" %12zu", ev.at(t, p));
    out << '\n';
  }
  return kSuccess;
}

// ---- predict -------------------------------------------------------------

struct PredictArgs {
  std::string checkpoint;
  std::vector<std::string> images;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  model::TrainState state = model::load_checkpoint(a.checkpoint);
  const auto& mc = state.config.model;
  const std::size_t k = mc.num_classes;
  for (const auto& path : a.images) {
    Sample s;
    s.image = data::resize(io::read_image(path), mc.input_height, mc.input_width);
    s.source_path = path;
    const std::vector<Sample> one{std::move(s)};
    const data::BatchStream stream(one, 1, std::nullopt, k);
    const Tensor probs = state.network.predict(stream[0].images);
    const std::size_t cls = argmax(probs.data());
    out << path << ' ' << (cls < kNumClasses ? kClassNames[cls] : std::string_view("?"));
    for (std::size_t j = 0; j < k; ++j) out << format(" %.6f", static_cast<double>(probs[j]));
    out << '\n';
  }
  return kSuccess;
}

// ---- inspect -------------------------------------------------------------

struct InspectArgs {
  std::optional<std::string> checkpoint;
  std::optional<std::string> config;
};

int cmd_inspect(const InspectArgs& a, std::ostream& out) {
  model::ModelConfig mc;
  if (a.checkpoint) {
    mc = model::load_checkpoint(*a.checkpoint).config.model;
  } else {
    mc = load_config(a.config).model;
  }
  const auto layers = model::describe(mc);
  out << format("%-28s %-18s %-16s %12s %14s\n", "layer", "type", "output", "trainable",
                "non_trainable");
  for (const auto& l : layers) {
    out << format("%-28s %-18s %-16s %12zu %14zu\n", l.name.c_str(),
                  std::string(model::layer_kind_name(l.spec.kind)).c_str(),
                  to_string(l.output_shape).c_str(), l.trainable, l.non_trainable);
  }
  const auto c = model::count_parameters(mc);
  out << "total=" << c.total << " trainable=" << c.trainable
      << " non_trainable=" << c.non_trainable << '\n';
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dsnet: depthwise-separable CNN for dementia-stage MRI classification", "dsnet"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads for internal parallel loops")
      ->check(CLI::PositiveNumber);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic 4-class pattern dataset");
  synth_cmd->add_option("--out", synth.out, "Output data root")->required();
  synth_cmd->add_option("--per-class", synth.per_class, "Images per class");
  synth_cmd->add_option("--height", synth.height, "Image height")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--width", synth.width, "Image width")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", synth.seed, "Master seed");
  synth_cmd->add_flag("--force", synth.force, "Overwrite existing files");

  AugmentArgs aug;
  auto* aug_cmd = app.add_subcommand("augment", "Write augmented copies of a dataset as PGM");
  aug_cmd->add_option("--data", aug.data, "Input data root")->required();
  aug_cmd->add_option("--out", aug.out, "Output data root")->required();
  aug_cmd->add_option("--transforms", aug.transforms,
                      "Comma-separated list of rotate_ccw,rotate_cw,hflip,vflip,blur,noise or 'all'");
  aug_cmd->add_option("--seed", aug.seed, "Master seed");
  aug_cmd->add_option("--blur-sigma", aug.blur_sigma, "Gaussian blur sigma");
  aug_cmd->add_option("--noise-amplitude", aug.noise_amplitude, "Noise amplitude in [0, 1]");
  aug_cmd->add_flag("--force", aug.force, "Overwrite existing files");

  PrepareArgs prep;
  auto* prep_cmd =
      app.add_subcommand("prepare", "Augment, split 6:2:2 and resize; write one root per split");
  prep_cmd->add_option("--data", prep.data, "Input data root")->required();
  prep_cmd->add_option("--out", prep.out, "Output directory")->required();
  prep_cmd->add_option("--config", prep.config, "Run config JSON");
  prep_cmd->add_option("--seed", prep.seed, "Override the config seed");
  prep_cmd->add_flag("--force", prep.force, "Overwrite existing files");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write metrics and checkpoints");
  train_cmd->add_option("--data", tr.data, "Data root")->required();
  train_cmd->add_option("--config", tr.config, "Run config JSON");
  train_cmd->add_option("--epochs", tr.epochs, "Override the number of epochs");
  train_cmd->add_option("--seed", tr.seed, "Override the master seed");
  train_cmd->add_option("--batch-size", tr.batch_size, "Override the batch size");
  train_cmd->add_option("--learning-rate", tr.learning_rate, "Override the Adam learning rate");
  train_cmd->add_option("--augment", tr.augment, "Override the augmentation transforms");
  train_cmd->add_flag("--split-first", tr.split_first, "Augment only the training split");
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  train_cmd->add_flag("--force", tr.force, "Overwrite existing files");

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Report loss, accuracy and confusion matrix");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data", ev.data, "Data root used for training")->required();
  eval_cmd->add_option("--split", ev.split, "train, validation, test or all")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}));

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Classify images");
  predict_cmd->add_option("--checkpoint", pr.checkpoint, "Checkpoint file")->required();
  predict_cmd->add_option("images", pr.images, "PGM or PNG files")->required();

  InspectArgs in;
  auto* inspect_cmd = app.add_subcommand("inspect", "Per-layer shapes and parameter counts");
  auto* ckpt_opt = inspect_cmd->add_option("--checkpoint", in.checkpoint, "Checkpoint file");
  inspect_cmd->add_option("--config", in.config, "Run config JSON")->excludes(ckpt_opt);

  std::vector<const char*> argv{"dsnet"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigFailure;
  }

  const int previous_threads = num_threads();
  set_num_threads(threads);
  struct RestoreThreads {
    int n;
    ~RestoreThreads() { set_num_threads(n); }
  } restore{previous_threads};

  try {
    if (*synth_cmd) return cmd_synth(synth, out);
    if (*aug_cmd) return cmd_augment(aug, out, err);
    if (*prep_cmd) return cmd_prepare(prep, out, err);
    if (*train_cmd) return cmd_train(tr, out, err);
    if (*eval_cmd) return cmd_evaluate(ev, out, err);
    if (*predict_cmd) return cmd_predict(pr, out);
    if (*inspect_cmd) return cmd_inspect(in, out);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const Error& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIoFailure;
  }
  return kConfigFailure;
}

}  // namespace dsnet::cli
