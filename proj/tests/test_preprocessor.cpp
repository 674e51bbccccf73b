// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "slicekit/error.hpp"
#include "slicekit/preprocessor.hpp"
#include "slicekit/wire.hpp"
#include "test_util.hpp"

namespace slicekit {
namespace {

TEST(InsertTl, StripRestoresBase) {
  for (const auto& name : synthetic_model_names()) {
    const LayerGraph g = make_synthetic_model(name, 4);
    for (const auto& sp : enumerate_split_points(g)) {
      if (!sp.tl_eligible || sp.kind == SplitKind::kLocalOnly) continue;
      const TLModel m = insert_tl(g, sp.index);
      EXPECT_EQ(m.graph.size(), g.size() + 2);
      EXPECT_EQ(strip_tl(m), g) << name << " split " << sp.index;
    }
  }
}

TEST(InsertTl, OutputShapeUnchanged) {
  Rng rng(6);
  for (const auto& name : synthetic_model_names()) {
    const LayerGraph g = make_synthetic_model(name, 4);
    const Tensor x = testing::random_tensor(g.input_shape, rng);
    const Shape want = run(g, x).shape();
    for (const auto& sp : enumerate_split_points(g)) {
      if (!sp.tl_eligible || sp.kind == SplitKind::kLocalOnly) continue;
      EXPECT_EQ(run(insert_tl(g, sp.index).graph, x).shape(), want) << name << " " << sp.index;
    }
  }
}

TEST(InsertTl, RejectsIneligibleAndLocalOnly) {
  const LayerGraph g = make_synthetic_model("tiny-cnn-8", 1);
  EXPECT_THROW(insert_tl(g, 6), NotTlEligible);  // flattened boundary
  EXPECT_THROW(insert_tl(g, static_cast<int>(g.size()) - 1), InvalidSplit);
  EXPECT_THROW(insert_tl(g, 42), InvalidSplit);
  const LayerGraph deep = make_synthetic_model("deep-20", 1);
  for (const auto& sp : enumerate_split_points(deep)) {
    if (sp.kind == SplitKind::kInterior && !sp.tl_eligible) {
      EXPECT_THROW(insert_tl(deep, sp.index), NotTlEligible);
    }
  }
}

TEST(SplitModel, CompositionIdentity) {
  const LayerGraph g = make_synthetic_model("tiny-cnn-8", 2);
  for (int split : {-1, 0, 2, 5}) {
    const TLModel m = insert_tl(g, split);
    const SplitModels parts = split_model(m);
    ASSERT_FALSE(parts.head.layers.empty());
    EXPECT_TRUE(std::holds_alternative<DeviceTL>(parts.head.layers.back().kind));
    EXPECT_TRUE(std::holds_alternative<EdgeTL>(parts.tail.layers.front().kind));
    Rng rng(static_cast<std::uint64_t>(split + 10));
    for (int i = 0; i < 100; ++i) {
      const Tensor x = testing::random_tensor(g.input_shape, rng);
      EXPECT_EQ(run(parts.tail, run(parts.head, x)), run(m.graph, x));
    }
  }
}

TEST(SplitModel, HeadOutputIsAQuarter) {
  const LayerGraph g = make_synthetic_model("branchy-12", 2);
  for (const auto& sp : enumerate_split_points(g)) {
    if (!sp.tl_eligible || sp.kind == SplitKind::kLocalOnly) continue;
    const SplitModels parts = split_model(insert_tl(g, sp.index));
    const Shape out = propagate_shapes(parts.head).back().output_shape;
    EXPECT_EQ(out.elements() * 4, sp.output_shape.elements());
    EXPECT_EQ(wire::tensor_frame_size(0, out),
              wire::header_size(0) + (sp.output_bytes - wire::header_size(g.name.size())) / 4);
  }
}

TEST(ToyDataset, DeterministicAndBalanced) {
  const ToyDataset a = make_toy_dataset(3, 4, 50);
  const ToyDataset b = make_toy_dataset(3, 4, 50);
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train.inputs[i], b.train.inputs[i]);
    EXPECT_EQ(a.train.labels[i], b.train.labels[i]);
  }
  EXPECT_EQ(a.train.size(), 160u);
  EXPECT_EQ(a.validation.size(), 40u);
  for (const LabeledSet* s : {&a.train, &a.validation}) {
    std::vector<int> count(4, 0);
    for (int l : s->labels) ++count.at(static_cast<std::size_t>(l));
    for (int c : count) EXPECT_EQ(c, count[0]);
  }
  EXPECT_EQ(a.train.inputs[0].shape(), kToyInputShape);
}

TEST(Train, RejectsBadConfig) {
  LayerGraph g = make_synthetic_model("tiny-cnn-8", 1);
  const ToyDataset d = make_toy_dataset(1, 4, 10);
  TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(train(g, d, cfg), InvalidArgument);
  cfg = {};
  cfg.learning_rate = 0;
  EXPECT_THROW(train(g, d, cfg), InvalidArgument);
}

TEST(Train, DivergenceIsReported) {
  LayerGraph g = make_synthetic_model("tiny-cnn-8", 1);
  const ToyDataset d = make_toy_dataset(1, 4, 10);
  TrainConfig cfg;
  cfg.learning_rate = 1e30;
  cfg.epochs = 3;
  EXPECT_THROW(train(g, d, cfg), DivergedLoss);
}

TEST(Train, DeterministicForSeed) {
  const ToyDataset d = make_toy_dataset(1, 4, 20);
  TrainConfig cfg;
  cfg.epochs = 2;
  LayerGraph a = make_synthetic_model("tiny-cnn-8", 1);
  LayerGraph b = make_synthetic_model("tiny-cnn-8", 1);
  train(a, d, cfg);
  train(b, d, cfg);
  EXPECT_EQ(a, b);
}

TEST(Train, LossDecreasesForMostSeeds) {
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const ToyDataset d = make_toy_dataset(seed, 4, 40);
    LayerGraph g = make_synthetic_model("tiny-cnn-8", seed);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = seed;
    const auto log = train(g, d, cfg);
    bool monotone = true;
    for (std::size_t e = 1; e < log.size(); ++e) monotone &= log[e].train_loss <= log[0].train_loss;
    ok += monotone;
  }
  EXPECT_GE(ok, 9);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
  Tensor logits(Shape{3, 1, 1}, {1.0f, 2.0f, 3.0f});
  Tensor grad;
  const double loss = cross_entropy(logits, 2, &grad);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(loss, -std::log(std::exp(3.0) / z), 1e-6);
  EXPECT_NEAR(grad.values()[0], std::exp(1.0) / z, 1e-6);
  EXPECT_NEAR(grad.values()[2], std::exp(3.0) / z - 1.0, 1e-6);
  EXPECT_EQ(argmax(logits), 2);
}

// Trains the base model once for the accuracy checks below.
class Accuracy : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new ToyDataset(make_toy_dataset(1, 4, 250));
    base_ = new LayerGraph(make_synthetic_model("tiny-cnn-8", 7));
    base_log_ = new std::vector<EpochLog>(train(*base_, *data_, TrainConfig{}));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete base_;
    delete base_log_;
  }
  static ToyDataset* data_;
  static LayerGraph* base_;
  static std::vector<EpochLog>* base_log_;
};

ToyDataset* Accuracy::data_ = nullptr;
LayerGraph* Accuracy::base_ = nullptr;
std::vector<EpochLog>* Accuracy::base_log_ = nullptr;

TEST_F(Accuracy, BaseReachesNinetyPercent) {
  EXPECT_EQ(base_log_->size(), 30u);
  EXPECT_GE(base_log_->back().validation_accuracy, 0.90);
  EXPECT_EQ(accuracy(*base_, data_->validation), base_log_->back().validation_accuracy);
}

TEST_F(Accuracy, UntrainedTlLosesAccuracyAndRetrainingRecovers) {
  const double base = accuracy(*base_, data_->validation);
  const TLModel tl = insert_tl(*base_, 2);
  EXPECT_LT(accuracy(tl.graph, data_->validation), base);
  const RetrainResult r = retrain(tl, *data_, TrainConfig{});
  EXPECT_GE(r.log.back().validation_accuracy, base - 0.02);
}

TEST(TrainingLog, Format) {
  const std::string s = format_training_log({{1, 0.5, 0.75, 0.5}});
  EXPECT_EQ(s.substr(0, s.find('\n')), "epoch,train_loss,train_acc,val_acc");
}

}  // namespace
}  // namespace slicekit
