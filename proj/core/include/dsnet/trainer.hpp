#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsnet/config.hpp"
#include "dsnet/image.hpp"
#include "dsnet/network.hpp"
#include "dsnet/optim.hpp"

namespace dsnet::model {

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t num_classes = 0;
  std::size_t count = 0;
  std::vector<std::size_t> confusion;  // row = true class, column = prediction

  std::size_t at(std::size_t truth, std::size_t predicted) const {
    return confusion[truth * num_classes + predicted];
  }
};

// Copy of every parameter followed by every buffer, in Network order.
struct Snapshot {
  std::size_t epoch = 0;
  double val_accuracy = 0.0;
  std::vector<Tensor> tensors;
};

Snapshot take_snapshot(Network<float>& net, std::size_t epoch, double val_accuracy);
void restore_snapshot(Network<float>& net, const Snapshot& snapshot);

struct TrainState {
  RunConfig config;
  Network<float> network;
  optim::AdamState<float> adam;
  std::size_t epoch = 0;  // completed epochs
  std::optional<Snapshot> best;
};

// Fresh state: initialized network and zeroed Adam moments.
TrainState build_model(const RunConfig& config, const ArchitectureRules& rules = {});

// Copy of `state` whose network holds the best-validation snapshot.
TrainState best_state(const TrainState& state);

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Runs `epochs` epochs: shuffled train batches with batchnorm in train mode,
// fused softmax cross-entropy, backward, Adam; then a validation pass in
// inference mode. Keeps the snapshot with the highest validation accuracy
// (earliest wins ties). A non-finite loss raises NumericError with epoch and
// batch context.
std::vector<EpochMetrics> train(TrainState& state, std::span<const Sample> train_set,
                                std::span<const Sample> validation_set, std::size_t epochs,
                                const EpochCallback& on_epoch = {});

// Batchnorm in inference mode; loss is mean categorical cross-entropy.
Evaluation evaluate(Network<float>& net, std::span<const Sample> samples, std::size_t batch_size);

// "epoch,train_loss,train_acc,val_loss,val_acc" then one row per epoch, reals
// with six decimals.
std::string metrics_csv(std::span<const EpochMetrics> metrics);
std::vector<EpochMetrics> parse_metrics_csv(const std::string& text);
void export_metrics(std::span<const EpochMetrics> metrics, const std::filesystem::path& path);

}  // namespace dsnet::model
