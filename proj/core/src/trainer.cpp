#include "dsnet/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dsnet/dataset.hpp"

namespace dsnet::model {

Snapshot take_snapshot(Network<float>& net, std::size_t epoch, double val_accuracy) {
  Snapshot s{epoch, val_accuracy, {}};
  for (const auto& p : net.parameters()) s.tensors.push_back(*p.value);
  for (const auto& b : net.buffers()) s.tensors.push_back(*b.tensor);
  return s;
}

void restore_snapshot(Network<float>& net, const Snapshot& snapshot) {
  std::vector<Tensor*> targets;
  for (const auto& p : net.parameters()) targets.push_back(p.value);
  for (const auto& b : net.buffers()) targets.push_back(b.tensor);
  if (targets.size() != snapshot.tensors.size()) {
    throw ContractError("snapshot holds " + std::to_string(snapshot.tensors.size()) +
                        " tensors, network has " + std::to_string(targets.size()));
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i]->shape() != snapshot.tensors[i].shape()) {
      throw ContractError("snapshot tensor " + std::to_string(i) + " has the wrong shape");
    }
    *targets[i] = snapshot.tensors[i];
  }
}

TrainState build_model(const RunConfig& config, const ArchitectureRules& rules) {
  TrainState state{config,
                   Network<float>(config.model, config.training.seed, config.training.batchnorm,
                                  rules),
                   {},
                   0,
                   std::nullopt};
  const auto params = state.network.parameters();
  state.adam = optim::make_adam_state<float>(params, config.training.adam);
  return state;
}

TrainState best_state(const TrainState& state) {
  TrainState out = state;
  if (out.best) restore_snapshot(out.network, *out.best);
  return out;
}

namespace {
bool head_has_batchnorm(const ModelConfig& c) {
  for (const auto& s : c.head) {
    if (s.kind == LayerKind::batchnorm) return true;
  }
  return false;
}
}  // namespace

std::vector<EpochMetrics> train(TrainState& state, std::span<const Sample> train_set,
                                std::span<const Sample> validation_set, std::size_t epochs,
                                const EpochCallback& on_epoch) {
  std::vector<EpochMetrics> history;
  if (epochs == 0) return history;
  if (train_set.empty()) throw ConfigError("training set is empty");
  if (validation_set.empty()) throw ConfigError("validation set is empty");
  const std::size_t batch_size = state.config.training.batch_size;
  if (head_has_batchnorm(state.config.model) && train_set.size() % batch_size == 1) {
    throw ConfigError("a head batchnorm layer cannot normalize the final single-sample batch; "
                      "change batch_size");
  }
  const std::size_t k = state.config.model.num_classes;

  for (std::size_t e = 0; e < epochs; ++e) {
    const std::size_t epoch = state.epoch + 1;
    data::BatchStream batches(train_set, batch_size,
                              data::epoch_shuffle_seed(state.config.training.seed, epoch), k);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const data::Batch batch = batches[b];
      const Tensor logits = state.network.forward(batch.images, nn::NormMode::train);
      const auto sce = optim::softmax_cross_entropy(logits, batch.targets);
      if (!std::isfinite(sce.loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b + 1));
      }
      state.network.backward(sce.grad_logits);
      const auto params = state.network.parameters();
      try {
        optim::adam_step<float>(params, state.adam);
      } catch (const NumericError& err) {
        throw NumericError(std::string(err.what()) + " at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(b + 1));
      }
      const std::size_t n = batch.labels.size();
      loss_sum += static_cast<double>(sce.loss) * static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = std::span<const float>(sce.probs.raw() + i * k, k);
        if (argmax(row) == batch.labels[i]) ++correct;
      }
    }
    const Evaluation val = evaluate(state.network, validation_set, batch_size);
    EpochMetrics m{epoch, loss_sum / static_cast<double>(train_set.size()),
                   static_cast<double>(correct) / static_cast<double>(train_set.size()), val.loss,
                   val.accuracy};
    state.epoch = epoch;
    if (!state.best || m.val_acc > state.best->val_accuracy) {
      state.best = take_snapshot(state.network, epoch, m.val_acc);
    }
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return history;
}

Evaluation evaluate(Network<float>& net, std::span<const Sample> samples, std::size_t batch_size) {
  if (samples.empty()) throw ConfigError("cannot evaluate an empty sample set");
  const std::size_t k = net.config().num_classes;
  Evaluation ev;
  ev.num_classes = k;
  ev.count = samples.size();
  ev.confusion.assign(k * k, 0);
  data::BatchStream batches(samples, batch_size, std::nullopt, k);
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const data::Batch batch = batches[b];
    const Tensor logits = net.forward(batch.images, nn::NormMode::infer);
    const auto sce = optim::softmax_cross_entropy(logits, batch.targets);
    loss_sum += static_cast<double>(sce.loss) * static_cast<double>(batch.labels.size());
    for (std::size_t i = 0; i < batch.labels.size(); ++i) {
      const std::size_t predicted = argmax(std::span<const float>(sce.probs.raw() + i * k, k));
      ++ev.confusion[batch.labels[i] * k + predicted];
      if (predicted == batch.labels[i]) ++correct;
    }
  }
  ev.loss = loss_sum / static_cast<double>(samples.size());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  return ev;
}

std::string metrics_csv(std::span<const EpochMetrics> metrics) {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
  char line[256];
  for (const auto& m : metrics) {
    std::snprintf(line, sizeof line, "%zu,%.6f,%.6f,%.6f,%.6f\n", m.epoch, m.train_loss,
                  m.train_acc, m.val_loss, m.val_acc);
    out += line;
  }
  return out;
}

std::vector<EpochMetrics> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "epoch,train_loss,train_acc,val_loss,val_acc") {
    throw FormatError("metrics CSV: unexpected header", 0);
  }
  std::vector<EpochMetrics> out;
  std::size_t offset = line.size() + 1;
  while (std::getline(in, line)) {
    EpochMetrics m;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf", &m.epoch, &m.train_loss, &m.train_acc,
                    &m.val_loss, &m.val_acc) != 5) {
      throw FormatError("metrics CSV: malformed row", offset);
    }
    out.push_back(m);
    offset += line.size() + 1;
  }
  return out;
}

void export_metrics(std::span<const EpochMetrics> metrics, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << metrics_csv(metrics);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace dsnet::model
