#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "test_support.hpp"
#include "vle/errors.hpp"
#include "vle/synthetic.hpp"
#include "vle/training.hpp"

using namespace vle;
using namespace vle::train;
using nn::Tensor;

TEST_CASE("weighted loss examples") {
  const auto uniform_w = features::class_weights(std::array{1.0, 1.0, 1.0, 1.0});
  const Tensor onehot({2, 4}, {1, 0, 0, 0, 0, 0, 1, 0});
  CHECK(weighted_sce_loss(onehot, {0, 2}, uniform_w).loss < 1e-10);

  const Tensor flat({3, 4}, 0.25);
  CHECK(std::abs(weighted_sce_loss(flat, {0, 1, 3}, uniform_w).loss - std::log(4.0)) < 1e-12);

  const Tensor probs({2, 4}, {0.5, 0.2, 0.2, 0.1, 0.25, 0.25, 0.25, 0.25});
  const double expected = (1.5 * -std::log(0.5) + 1.0 * -std::log(0.25)) / 2.5;
  CHECK(std::abs(weighted_sce_loss(probs, {0, 2}, features::class_weights()).loss - expected) < 1e-15);

  const Tensor zero({1, 4}, {0, 1, 0, 0});
  CHECK(std::isfinite(weighted_sce_loss(zero, {0}, uniform_w).loss));
  CHECK_THROWS_AS(weighted_sce_loss(flat, {0, 4, 1}, uniform_w), LabelError);
  CHECK_THROWS_AS(weighted_sce_loss(flat, {0, -1, 1}, uniform_w), LabelError);
}

TEST_CASE("loss gradient w.r.t. logits matches finite differences") {
  Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    const Tensor logits = testing::random_tensor({6, 4}, rng, 2.0);
    std::vector<int> labels(6);
    for (int& y : labels) y = static_cast<int>(rng.below(4));
    CHECK(testing::check_softmax_loss(logits, labels, features::class_weights()) < 1e-6);
  }
}

TEST_CASE("uniform weights reduce to plain cross-entropy") {
  Rng rng(2);
  const Tensor p = nn::softmax(testing::random_tensor({8, 4}, rng));
  const std::vector<int> labels = {0, 1, 2, 3, 3, 2, 1, 0};
  double plain = 0;
  for (std::size_t i = 0; i < 8; ++i) plain -= std::log(p.at(i, static_cast<std::size_t>(labels[i])));
  plain /= 8;
  CHECK(weighted_sce_loss(p, labels, features::class_weights(std::array{1.0, 1.0, 1.0, 1.0})).loss ==
        doctest::Approx(plain).epsilon(1e-15));
}

namespace {

nn::Parameter scalar(double theta, double grad) {
  nn::Parameter p("theta", Tensor({1}, theta));
  p.grad[0] = grad;
  return p;
}

}  // namespace

TEST_CASE("adam first step, zero gradient, direction invariance") {
  for (double g : {1e-3, 0.5, -2.0, 40.0}) {
    nn::Parameter p = scalar(0.0, g);
    Adam adam;
    adam.step({&p});
    CHECK(std::abs(std::abs(p.value[0]) - 1e-3 * std::abs(g) / (std::abs(g) + 1e-8)) < 1e-15);
    CHECK(std::signbit(p.value[0]) != std::signbit(g));

    nn::Parameter scaled = scalar(0.0, 10 * g);
    Adam other;
    other.step({&scaled});
    CHECK(std::signbit(scaled.value[0]) == std::signbit(p.value[0]));
    CHECK(std::abs(scaled.value[0] - p.value[0]) < 1e-7);
  }
  nn::Parameter z = scalar(1.25, 0.0);
  Adam adam;
  adam.step({&z});
  CHECK(z.value[0] == 1.25);
  CHECK(adam.steps() == 1);
}

TEST_CASE("adam minimizes a quadratic") {
  nn::Parameter p = scalar(1.0, 0.0);
  AdamHyper h;
  h.learning_rate = 0.1;
  Adam adam(h);
  for (int t = 0; t < 200; ++t) {
    p.grad[0] = 2.0 * p.value[0];
    adam.step({&p});
  }
  CHECK(std::abs(p.value[0]) < 0.02);
  CHECK(p.adam_v[0] >= 0.0);
}

namespace {

features::FeatureFrame small_frame(std::size_t students, std::uint64_t seed) {
  synth::SynthConfig cfg;
  cfg.n_students = students;
  cfg.seed = seed;
  features::PipelineOptions o;
  o.seed = seed;
  return features::build_feature_frame(synth::generate(cfg).bundle, o);
}

TrainConfig quick_config(std::size_t epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 128;
  c.shuffle_seed = 5;
  return c;
}

}  // namespace

TEST_CASE("train: one epoch, determinism, empty frame") {
  const auto ff = small_frame(60, 3);
  const auto rows = ff.data.select(ff.split.train);
  nn::ModelConfig mc;
  mc.init_seed = 11;

  nn::Network a = nn::build_network(mc);
  const auto h1 = train::train(a, rows, quick_config(1));
  CHECK(h1.epochs.size() == 1);
  CHECK(h1.epochs[0].train_loss >= 0.0);

  nn::Network b = nn::build_network(mc);
  nn::Network c = nn::build_network(mc);
  const auto hb = train::train(b, rows, quick_config(3));
  const auto hc = train::train(c, rows, quick_config(3));
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(hb.epochs[e].train_loss == hc.epochs[e].train_loss);
    CHECK(hb.epochs[e].val_accuracy == hc.epochs[e].val_accuracy);
  }
  const auto pb = b.parameters();
  const auto pc = c.parameters();
  for (std::size_t i = 0; i < pb.size(); ++i) CHECK(pb[i]->value == pc[i]->value);

  nn::Network d = nn::build_network(mc);
  CHECK_THROWS_AS(train::train(d, features::EncodedFrame{}, quick_config(1)), TrainError);
  TrainConfig bad = quick_config(0);
  CHECK_THROWS_AS(train::train(d, rows, bad), ConfigError);
}

TEST_CASE("checkpoint round-trip is bit-exact; corrupt and mismatched files are rejected") {
  testing::TempDir dir("ckpt");
  const auto ff = small_frame(60, 4);
  nn::ModelConfig mc;
  mc.init_seed = 3;
  nn::Network net = nn::build_network(mc);
  train::train(net, ff.data.select(ff.split.train), quick_config(2));
  save_checkpoint(net, ff.sidecar, "sidecar.json", dir / "model.json");

  const LoadedCheckpoint loaded = load_checkpoint(dir / "model.json", nn::Architecture::PaperCnn);
  const Tensor probe = make_batch(ff.data, ff.split.test);
  CHECK(loaded.net.predict(probe) == net.predict(probe));
  CHECK(features::sidecar_json(loaded.sidecar) == features::sidecar_json(ff.sidecar));
  CHECK(loaded.sidecar_ref == "sidecar.json");

  CHECK_THROWS_AS(load_checkpoint(dir / "model.json", nn::Architecture::MlpBaseline), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.json"), CheckpointError);

  const std::string text = testing::read_text(dir / "model.json");
  testing::write_text(dir / "truncated.json", text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(dir / "truncated.json"), CheckpointError);

  std::string reshaped = text;
  const auto pos = reshaped.find("\"shape\":[3,1,16]");
  REQUIRE(pos != std::string::npos);
  reshaped.replace(pos, 16, "\"shape\":[3,1,17]");
  testing::write_text(dir / "reshaped.json", reshaped);
  CHECK_THROWS_AS(load_checkpoint(dir / "reshaped.json"), CheckpointError);
}

TEST_CASE("history csv round-trip") {
  testing::TempDir dir("hist");
  TrainingHistory h;
  h.epochs.push_back({1, 0.5, 0.75, 0.25, 0.875, 1.0});
  h.epochs.push_back({2, 0.125, 0.9, 0.0625, 0.95, 1.0});
  write_history_csv(h, dir / "history.csv");
  const auto back = read_history_csv(dir / "history.csv");
  REQUIRE(back.epochs.size() == 2);
  CHECK(back.epochs[1].train_loss == 0.125);
  CHECK(back.epochs[0].val_accuracy == 0.875);
  CHECK(testing::read_text(dir / "history.csv").rfind("epoch,train_loss,train_acc,val_loss,val_acc\n", 0) == 0);
}
