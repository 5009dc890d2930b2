#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "setoie/core.hpp"
#include "setoie/errors.hpp"
#include "setoie/eval/token_f1.hpp"
#include "setoie/matching.hpp"
#include "setoie/nn/autograd.hpp"
#include "setoie/nn/decode.hpp"
#include "setoie/nn/model.hpp"
#include "setoie/nn/optim.hpp"

namespace setoie::nn {

struct Example {
  TokenSequence seq;
  LabelGrid gold;
};

struct TrainConfig {
  double learning_rate = 5e-4;
  double weight_decay = 1e-6;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 20;
  std::uint64_t seed = 0;
  // Fraction held out for checkpoint selection; 0 selects on the training set.
  double validation_fraction = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Stop once validation F1 reaches this value.
  std::optional<double> stop_at_f1;
  LossConfig loss;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
    if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (validation_fraction < 0.0 || validation_fraction >= 1.0)
      throw ConfigError("validation_fraction must lie in [0, 1)");
  }
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_f1 = 0.0;
  double best_f1 = 0.0;
  bool improved = false;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  double best_f1 = 0.0;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;
};

inline PredictionTensor to_prediction(const Var& probs, std::size_t tokens, std::size_t slots) {
  PredictionTensor p;
  p.tokens = tokens;
  p.slots = slots;
  p.probs = probs->value.data;
  return p;
}

// Corpus token-wise macro F1 of the argmax grids under the loss-optimal assignment.
template <TokenEncoder E>
double token_f1(const Tagger<E>& model, std::span<const Example> data,
                std::span<const std::size_t> indices, const LossConfig& loss = {}) {
  eval::TokenConfusion conf;
  for (auto i : indices) {
    const auto& ex = data[i];
    const auto p = model.forward(ex.seq);
    conf.add_grid(argmax_grid(p), ex.gold, loss_assignment(p, ex.gold, loss));
  }
  return conf.macro_f1();
}

template <TokenEncoder E>
double token_f1(const Tagger<E>& model, std::span<const Example> data, const LossConfig& loss = {}) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return token_f1(model, data, all, loss);
}

inline std::vector<std::vector<double>> snapshot(std::span<const NamedParameter> params) {
  std::vector<std::vector<double>> out;
  for (const auto& [_, v] : params) out.push_back(v->value.data);
  return out;
}

inline void restore(std::span<const NamedParameter> params, const std::vector<std::vector<double>>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i].second->value.data = values.at(i);
}

template <TokenEncoder E>
using EpochCallback = std::function<void(const EpochMetrics&, const Tagger<E>&)>;

// Trains in place and leaves the model at its best-validation checkpoint.
template <TokenEncoder E>
TrainResult train(Tagger<E>& model, std::span<const Example> data, const TrainConfig& cfg,
                  const EpochCallback<E>& on_epoch = {}) {
  cfg.validate();
  if (data.empty()) throw ConfigError("training set is empty");
  for (const auto& ex : data)
    if (ex.gold.masks.size() > model.slots())
      throw TooManyGold("example has more gold triplets than the model has slots");

  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(data.size()) + 0.5));
  if (n_val >= data.size()) n_val = data.size() - 1;
  result.validation_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  result.train_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(result.validation_indices.begin(), result.validation_indices.end());
  std::sort(result.train_indices.begin(), result.train_indices.end());
  const auto& selection = result.validation_indices.empty() ? result.train_indices : result.validation_indices;

  const auto named = model.named_parameters();
  Adam adam(model.trainable_parameters(),
            AdamConfig{cfg.learning_rate, cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.epsilon});
  auto best = snapshot(named);
  result.best_f1 = -1.0;

  std::vector<std::size_t> epoch_order = result.train_indices;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(epoch_order.begin(), epoch_order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < epoch_order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, epoch_order.size());
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      adam.zero_grad();
      for (std::size_t b = start; b < end; ++b) {
        const auto& ex = data[epoch_order[b]];
        Var probs = model.forward_graph(ex.seq);
        const auto p = to_prediction(probs, ex.seq.size(), model.slots());
        const auto assignment = loss_assignment(p, ex.gold, cfg.loss);
        const double loss = loss_with_assignment(p, ex.gold, assignment, cfg.loss);
        if (!std::isfinite(loss))
          throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", example " +
                               std::to_string(epoch_order[b]));
        loss_sum += loss;
        auto grad = gradient_with_assignment(p, ex.gold, assignment, cfg.loss);
        for (auto& g : grad) g *= inv_batch;
        backward(probs, grad);
      }
      adam.step();
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(epoch_order.size());
    m.validation_f1 = token_f1(model, data, selection, cfg.loss);
    if (m.validation_f1 > result.best_f1) {
      result.best_f1 = m.validation_f1;
      result.best_epoch = epoch;
      best = snapshot(named);
      m.improved = true;
    }
    m.best_f1 = result.best_f1;
    result.history.push_back(m);
    if (on_epoch) on_epoch(m, model);
    if (cfg.stop_at_f1 && m.validation_f1 >= *cfg.stop_at_f1) break;
  }
  restore(named, best);
  return result;
}

struct SpeedReport {
  double sentences_per_second = 0.0;
  std::size_t batch_size = 32;
  std::size_t sentences = 0;
};

// Wall-clock throughput of forward + decode; the fastest of `repeats` passes.
template <TokenEncoder E>
SpeedReport measure_speed(const Tagger<E>& model, std::span<const TokenSequence> sentences,
                          std::size_t batch_size = 32, std::size_t repeats = 3) {
  if (sentences.empty()) throw ConfigError("speed measurement needs at least one sentence");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  double best_seconds = std::numeric_limits<double>::infinity();
  std::size_t sink = 0;
  for (std::size_t r = 0; r < std::max<std::size_t>(repeats, 1); ++r) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t b = 0; b < sentences.size(); b += batch_size) {
      const std::size_t end = std::min(b + batch_size, sentences.size());
      for (std::size_t i = b; i < end; ++i) {
        const auto p = model.forward(sentences[i]);
        sink += decode(p, sentences[i], true).size();
      }
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    best_seconds = std::min(best_seconds, elapsed.count());
  }
  (void)sink;
  SpeedReport report;
  report.batch_size = batch_size;
  report.sentences = sentences.size();
  report.sentences_per_second = static_cast<double>(sentences.size()) / std::max(best_seconds, 1e-9);
  return report;
}

}  // namespace setoie::nn
