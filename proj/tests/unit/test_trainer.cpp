#include <doctest.h>

#include <cmath>

#include "dsnet/checkpoint.hpp"
#include "dsnet/dataset.hpp"
#include "dsnet/error.hpp"
#include "dsnet/trainer.hpp"

using namespace dsnet;
using model::LayerSpec;

namespace {

model::RunConfig small_run() {
  model::RunConfig rc;
  auto& m = rc.model;
  m.input_height = 12;
  m.input_width = 12;
  m.blocks = {
      {LayerSpec::conv2d(4), LayerSpec::relu(), LayerSpec::maxpool()},
      {LayerSpec::separable(8), LayerSpec::relu(), LayerSpec::batchnorm(), LayerSpec::maxpool()},
  };
  m.head = {LayerSpec::dense(8), LayerSpec::relu(), LayerSpec::dense(4)};
  rc.training.batch_size = 4;
  rc.training.seed = 11;
  rc.training.batchnorm.momentum = 0.1;
  return rc;
}

model::TrainState fresh(const model::RunConfig& rc = small_run()) {
  return model::build_model(rc, model::ArchitectureRules::relaxed());
}

std::vector<Sample> patterns(std::size_t per_class, std::uint64_t seed) {
  return data::make_pattern_dataset(per_class, 12, 12, seed);
}

model::TrainState trained(std::size_t epochs) {
  auto state = fresh();
  const auto tr = patterns(6, 1), va = patterns(3, 2);
  model::train(state, tr, va, epochs);
  return state;
}

std::vector<Tensor> all_tensors(model::Network<float>& net) {
  std::vector<Tensor> out;
  for (const auto& p : net.parameters()) out.push_back(*p.value);
  for (const auto& b : net.buffers()) out.push_back(*b.tensor);
  return out;
}

}  // namespace

TEST_CASE("zero epochs leave the state untouched") {
  auto state = fresh();
  const auto before = all_tensors(state.network);
  const auto tr = patterns(2, 1);
  const auto history = model::train(state, tr, tr, 0);
  CHECK(history.empty());
  CHECK(state.epoch == 0);
  CHECK(state.adam.step == 0);
  CHECK(!state.best.has_value());
  CHECK(all_tensors(state.network) == before);
  CHECK(model::metrics_csv(history) == "epoch,train_loss,train_acc,val_loss,val_acc\n");
}

TEST_CASE("training is deterministic and keeps the best snapshot") {
  auto a = fresh(), b = fresh();
  const auto tr = patterns(6, 1), va = patterns(3, 2);
  std::vector<model::EpochMetrics> seen;
  const auto ha = model::train(a, tr, va, 4, [&](const model::EpochMetrics& m) { seen.push_back(m); });
  const auto hb = model::train(b, tr, va, 4);
  CHECK(ha == hb);
  CHECK(seen == ha);
  CHECK(model::metrics_csv(ha) == model::metrics_csv(hb));
  CHECK(all_tensors(a.network) == all_tensors(b.network));
  REQUIRE(ha.size() == 4);
  for (std::size_t e = 0; e < 4; ++e) {
    CHECK(ha[e].epoch == e + 1);
    CHECK(std::isfinite(ha[e].train_loss));
    CHECK(ha[e].train_acc >= 0.0);
    CHECK(ha[e].train_acc <= 1.0);
  }
  REQUIRE(a.best.has_value());
  for (const auto& m : ha) CHECK(a.best->val_accuracy >= m.val_acc);
  CHECK(ha[a.best->epoch - 1].val_acc == a.best->val_accuracy);

  auto best = model::best_state(a);
  const auto ev = model::evaluate(best.network, va, 4);
  CHECK(ev.accuracy == doctest::Approx(a.best->val_accuracy).epsilon(1e-12));

  // Resuming continues the epoch counter.
  model::train(a, tr, va, 1);
  CHECK(a.epoch == 5);
}

TEST_CASE("evaluation bookkeeping") {
  auto state = fresh();
  const auto samples = patterns(5, 3);
  const auto ev = model::evaluate(state.network, samples, 3);
  CHECK(ev.count == 20);
  CHECK(ev.num_classes == 4);
  std::size_t total = 0, diagonal = 0;
  for (std::size_t t = 0; t < 4; ++t) {
    std::size_t row = 0;
    for (std::size_t p = 0; p < 4; ++p) row += ev.at(t, p);
    CHECK(row == 5);
    total += row;
    diagonal += ev.at(t, t);
  }
  CHECK(total == 20);
  CHECK(ev.accuracy == doctest::Approx(static_cast<double>(diagonal) / 20.0));
  CHECK(ev.loss > 0.0);
  // Batch size does not change the result in inference mode.
  const auto ev1 = model::evaluate(state.network, samples, 1);
  CHECK(ev1.confusion == ev.confusion);
  CHECK(ev1.loss == doctest::Approx(ev.loss).epsilon(1e-5));
}

TEST_CASE("untrained accuracy is near chance") {
  // Averaged over seeds; 4 sigma of a binomial with p = 1/4.
  const auto samples = patterns(25, 4);
  double acc = 0;
  const int seeds = 8;
  for (int s = 0; s < seeds; ++s) {
    auto rc = small_run();
    rc.training.seed = 100 + s;
    auto state = fresh(rc);
    acc += model::evaluate(state.network, samples, 10).accuracy;
  }
  acc /= seeds;
  const double sigma = std::sqrt(0.25 * 0.75 / (100.0 * seeds));
  CHECK(std::abs(acc - 0.25) <= 4 * sigma + 0.1);
}

TEST_CASE("a trained model gives a diagonal confusion matrix") {
  auto state = fresh();
  const auto tr = patterns(10, 5);
  model::train(state, tr, tr, 60);
  const auto ev = model::evaluate(state.network, tr, 8);
  INFO("accuracy " << ev.accuracy);
  REQUIRE(ev.accuracy == 1.0);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t p = 0; p < 4; ++p) CHECK(ev.at(t, p) == (t == p ? 10u : 0u));
}

TEST_CASE("metrics CSV") {
  std::vector<model::EpochMetrics> ms;
  for (std::size_t e = 1; e <= 20; ++e)
    ms.push_back({e, 1.0 / static_cast<double>(e), 0.5 + 0.01 * static_cast<double>(e), 0.123456789, 1.0});
  const auto text = model::metrics_csv(ms);
  CHECK(std::count(text.begin(), text.end(), '\n') == 21);
  const auto back = model::parse_metrics_csv(text);
  REQUIRE(back.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(back[i].epoch == ms[i].epoch);
    CHECK(std::abs(back[i].train_loss - ms[i].train_loss) <= 5e-7);
    CHECK(std::abs(back[i].train_acc - ms[i].train_acc) <= 5e-7);
    CHECK(std::abs(back[i].val_loss - ms[i].val_loss) <= 5e-7);
    CHECK(std::abs(back[i].val_acc - ms[i].val_acc) <= 5e-7);
  }
  CHECK(model::parse_metrics_csv(model::metrics_csv({})).empty());
  CHECK_THROWS_AS(model::parse_metrics_csv("epoch,loss\n1,2\n"), FormatError);
}

TEST_CASE("checkpoint round trip") {
  auto state = trained(3);
  const auto bytes = model::serialize_checkpoint(state);
  auto loaded = model::deserialize_checkpoint(bytes);
  CHECK(model::serialize_checkpoint(loaded) == bytes);
  CHECK(loaded.epoch == 3);
  CHECK(loaded.adam.step == state.adam.step);
  CHECK(loaded.config.model == state.config.model);
  REQUIRE(loaded.best.has_value());
  CHECK(loaded.best->epoch == state.best->epoch);

  const auto samples = patterns(4, 9);
  const auto a = model::evaluate(state.network, samples, 4);
  const auto b = model::evaluate(loaded.network, samples, 4);
  CHECK(a.loss == b.loss);
  CHECK(a.confusion == b.confusion);

  // Continuing from the loaded state matches continuing the original.
  const auto tr = patterns(6, 1), va = patterns(3, 2);
  CHECK(model::train(state, tr, va, 1) == model::train(loaded, tr, va, 1));
  CHECK(all_tensors(state.network) == all_tensors(loaded.network));
}

TEST_CASE("checkpoint corruption is rejected") {
  const auto bytes = model::serialize_checkpoint(trained(1));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(model::deserialize_checkpoint(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_AS(model::deserialize_checkpoint(bad_version), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(model::deserialize_checkpoint(trailing), FormatError);
  auto bad_header = bytes;
  bad_header[9] = '!';
  CHECK_THROWS_AS(model::deserialize_checkpoint(bad_header), FormatError);
  CHECK_THROWS_AS(model::deserialize_checkpoint({}), FormatError);
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t cut = rng.below(bytes.size());
    REQUIRE_THROWS_AS(model::deserialize_checkpoint(std::span(bytes.data(), cut)), FormatError);
  }
}
