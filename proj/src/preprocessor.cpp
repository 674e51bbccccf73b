// SPDX-License-Identifier: Apache-2.0
#include "slicekit/preprocessor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "slicekit/error.hpp"
#include "slicekit/random.hpp"

namespace slicekit {

TLModel insert_tl(const LayerGraph& graph, int split_index) {
  const SplitPoint sp = split_point_at(graph, split_index);
  if (sp.kind == SplitKind::kLocalOnly) {
    throw InvalidSplit("local-only plan has no boundary to insert a transfer layer into");
  }
  if (!sp.tl_eligible) {
    throw NotTlEligible("boundary after unit " + std::to_string(split_index) + " is " +
                        sp.output_shape.str() + "; the transfer layer needs even spatial dims");
  }
  TLModel m{graph, split_index, graph};
  auto at = m.graph.layers.begin() + (split_index + 1);
  at = m.graph.layers.insert(at, Layer{DeviceTL{}, {}});
  m.graph.layers.insert(at + 1, Layer{EdgeTL{}, {}});
  m.graph.name = graph.name + ".tl" + std::to_string(split_index);
  propagate_shapes(m.graph);
  return m;
}

LayerGraph strip_tl(const TLModel& model) {
  LayerGraph g = model.graph;
  const auto at = g.layers.begin() + (model.split_index + 1);
  if (g.layers.size() < 2 || !std::holds_alternative<DeviceTL>(at->kind) ||
      !std::holds_alternative<EdgeTL>((at + 1)->kind)) {
    throw InvalidSplit("model has no transfer layer pair after unit " +
                       std::to_string(model.split_index));
  }
  g.layers.erase(at, at + 2);
  g.name = model.base.name;
  return g;
}

SplitModels split_model(const TLModel& model) {
  const int device_tl = model.split_index + 1;
  const int n = static_cast<int>(model.graph.size());
  return {slice(model.graph, 0, device_tl + 1, model.base.name + ".head"),
          slice(model.graph, device_tl + 1, n, model.base.name + ".tail")};
}

ToyDataset make_toy_dataset(std::uint64_t seed, int classes, int samples_per_class,
                            double validation_fraction, double noise) {
  if (classes < 2 || classes > 10) {
    throw InvalidArgument("classes must be in [2, 10], got " + std::to_string(classes));
  }
  if (samples_per_class < 2) throw InvalidArgument("need at least 2 samples per class");
  const int n_val = std::clamp(
      static_cast<int>(std::lround(samples_per_class * validation_fraction)), 1,
      samples_per_class - 1);

  Rng rng(seed);
  const Shape s = kToyInputShape;
  std::vector<std::vector<float>> prototypes(classes, std::vector<float>(s.elements()));
  for (auto& p : prototypes) {
    for (float& v : p) v = static_cast<float>(rng.normal());
  }

  ToyDataset ds;
  ds.classes = classes;
  // Interleave classes so every prefix of the sets is close to balanced.
  for (int i = 0; i < samples_per_class; ++i) {
    for (int c = 0; c < classes; ++c) {
      std::vector<float> x(s.elements());
      for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] = prototypes[c][k] + static_cast<float>(noise * rng.normal());
      }
      LabeledSet& dst = i < samples_per_class - n_val ? ds.train : ds.validation;
      dst.inputs.emplace_back(s, std::move(x));
      dst.labels.push_back(c);
    }
  }
  return ds;
}

int argmax(const Tensor& logits) {
  const auto d = logits.data();
  return static_cast<int>(std::max_element(d.begin(), d.end()) - d.begin());
}

double cross_entropy(const Tensor& logits, int label, Tensor* grad) {
  const auto z = logits.data();
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (float v : z) sum += std::exp(static_cast<double>(v) - m);
  const double log_sum = m + std::log(sum);
  if (grad != nullptr) {
    *grad = Tensor(logits.shape());
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double p = std::exp(static_cast<double>(z[i]) - log_sum);
      grad->data()[i] = static_cast<float>(p - (static_cast<int>(i) == label ? 1.0 : 0.0));
    }
  }
  return log_sum - static_cast<double>(z[label]);
}

double accuracy(const LayerGraph& graph, const LabeledSet& set) {
  if (set.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (argmax(run(graph, set.inputs[i])) == set.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(set.size());
}

std::vector<EpochLog> train(LayerGraph& graph, const ToyDataset& data, const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0)) throw InvalidArgument("learning_rate must be > 0");
  if (cfg.epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (cfg.batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (data.train.size() == 0) throw InvalidArgument("training set is empty");
  validate(graph);

  const std::size_t n_units = graph.size();
  // Gradient accumulators shaped like each unit's parameter blocks.
  std::vector<std::vector<std::vector<float>>> grads(n_units);
  for (std::size_t u = 0; u < n_units; ++u) {
    for (auto blk : parameter_blocks(std::as_const(graph.layers[u]))) {
      grads[u].emplace_back(blk.size(), 0.0f);
    }
  }

  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);
  std::vector<EpochLog> log;
  std::vector<Tensor> acts;
  acts.reserve(n_units + 1);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (auto& unit : grads) {
        for (auto& g : unit) std::fill(g.begin(), g.end(), 0.0f);
      }
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        acts.clear();
        acts.push_back(data.train.inputs[idx]);
        for (std::size_t u = 0; u < n_units; ++u) acts.push_back(forward(graph.layers[u], acts[u]));
        Tensor upstream;
        const double loss = cross_entropy(acts.back(), data.train.labels[idx], &upstream);
        if (!std::isfinite(loss)) {
          throw DivergedLoss("non-finite loss in epoch " + std::to_string(epoch));
        }
        loss_sum += loss;
        if (argmax(acts.back()) == data.train.labels[idx]) ++correct;
        for (std::size_t u = n_units; u-- > 0;) {
          LayerGradients lg = backward(graph.layers[u], acts[u], upstream);
          for (std::size_t k = 0; k < lg.weights.size(); ++k) {
            auto& dst = grads[u][k];
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += lg.weights[k][j];
          }
          upstream = std::move(lg.input);
        }
      }
      const float step = static_cast<float>(cfg.learning_rate / static_cast<double>(end - start));
      for (std::size_t u = 0; u < n_units; ++u) {
        auto blocks = parameter_blocks(graph.layers[u]);
        for (std::size_t k = 0; k < blocks.size(); ++k) {
          for (std::size_t j = 0; j < blocks[k].size(); ++j) blocks[k][j] -= step * grads[u][k][j];
        }
      }
    }
    const double n = static_cast<double>(order.size());
    log.push_back({epoch, loss_sum / n, static_cast<double>(correct) / n,
                   accuracy(graph, data.validation)});
  }
  return log;
}

RetrainResult retrain(const TLModel& model, const ToyDataset& data, const TrainConfig& cfg) {
  RetrainResult r{model, {}};
  r.log = train(r.model.graph, data, cfg);
  return r;
}

std::string format_training_log(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os << "epoch,train_loss,train_acc,val_acc\n";
  for (const auto& e : log) {
    os << e.epoch << ',' << e.train_loss << ',' << e.train_accuracy << ','
       << e.validation_accuracy << '\n';
  }
  return os.str();
}

}  // namespace slicekit
