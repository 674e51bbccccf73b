// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slicekit/model_graph.hpp"

namespace slicekit {

// A model with DeviceTL inserted right after unit `split_index` and EdgeTL
// right after that.
struct TLModel {
  LayerGraph base;
  int split_index = 0;
  LayerGraph graph;
};

// Throws InvalidSplit for LocalOnly or out-of-range splits, NotTlEligible
// when the boundary has odd spatial dims.
TLModel insert_tl(const LayerGraph& graph, int split_index);
// Removes the DeviceTL/EdgeTL pair, keeping any retrained weights.
LayerGraph strip_tl(const TLModel& model);

struct SplitModels {
  LayerGraph head;  // ends with DeviceTL
  LayerGraph tail;  // starts with EdgeTL
};

SplitModels split_model(const TLModel& model);

struct LabeledSet {
  std::vector<Tensor> inputs;
  std::vector<int> labels;
  std::size_t size() const noexcept { return inputs.size(); }
};

struct ToyDataset {
  int classes = 0;
  LabeledSet train;
  LabeledSet validation;
};

inline constexpr Shape kToyInputShape{3, 16, 16};
// Standard deviation of the per-pixel noise added to each class pattern.
inline constexpr double kToyNoise = 1.0;

// Deterministic 3x16x16 samples: a fixed random pattern per class plus
// Gaussian noise. Labels are exactly balanced in both halves.
ToyDataset make_toy_dataset(std::uint64_t seed, int classes, int samples_per_class,
                            double validation_fraction = 0.2, double noise = kToyNoise);

struct TrainConfig {
  double learning_rate = 0.001;
  int epochs = 30;
  int batch_size = 32;
  std::uint64_t seed = 1;
};

struct EpochLog {
  int epoch;
  double train_loss;
  double train_accuracy;
  double validation_accuracy;
};

// Plain minibatch SGD on mean softmax cross-entropy, all weights trainable.
// Throws InvalidArgument for a bad config and DivergedLoss on a non-finite
// loss.
std::vector<EpochLog> train(LayerGraph& graph, const ToyDataset& data, const TrainConfig& cfg);

struct RetrainResult {
  TLModel model;
  std::vector<EpochLog> log;
};

RetrainResult retrain(const TLModel& model, const ToyDataset& data, const TrainConfig& cfg);

double accuracy(const LayerGraph& graph, const LabeledSet& set);
int argmax(const Tensor& logits);

// Softmax cross-entropy of one sample, and its gradient w.r.t. the logits.
double cross_entropy(const Tensor& logits, int label, Tensor* grad);

std::string format_training_log(const std::vector<EpochLog>& log);

}  // namespace slicekit
