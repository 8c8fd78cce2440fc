#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "graphrouter/common/error.hpp"
#include "graphrouter/common/rng.hpp"
#include "graphrouter/graph/hetero_graph.hpp"
#include "graphrouter/model/network.hpp"
#include "graphrouter/model/params.hpp"
#include "graphrouter/numerics/optim.hpp"

namespace graphrouter::train {

using graph::CompiledGraph;
using graph::GraphView;
using graph::HeteroGraph;

struct TrainConfig {
  int hidden = 32;
  int layers = 2;
  int batch_size = 32;
  int max_epochs = 150;
  double base_lr = 1e-3;
  // Epochs without a validation improvement before training stops.
  int patience = 20;
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden <= 0 || layers <= 0)
      throw validation_error("TrainConfig: hidden and layers must be positive");
    if (batch_size <= 0)
      throw validation_error("TrainConfig: batch_size must be positive");
    if (max_epochs <= 0)
      throw validation_error("TrainConfig: max_epochs must be positive");
    if (!(base_lr > 0.0))
      throw validation_error("TrainConfig: base_lr must be positive");
    if (patience <= 0)
      throw validation_error("TrainConfig: patience must be positive");
  }
};

struct EpochStats {
  int epoch = 0;            // 1-based
  double train_loss = 0.0;  // mean batch loss over the epoch
  double val_reward = 0.0;  // mean reward of the argmax routing on Val
  double lr = 0.0;          // learning rate of the epoch's final step
};

struct TrainResult {
  model::ModelParams params;  // parameters of the best validation epoch
  int best_epoch = 0;
  double best_val_reward = 0.0;
  int epochs_run = 0;
  std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Mean logged reward of the model's argmax choice over the given queries.
// Every choice must have a logged outcome; routing to an LLM the log never
// paired with that query has no measurable reward and is reported as an
// error rather than guessed at.
inline double mean_argmax_reward(const HeteroGraph& g,
                                 const model::ModelParams& params,
                                 const CompiledGraph& c,
                                 const std::vector<int>& queries) {
  if (queries.empty())
    throw validation_error("mean_argmax_reward: no queries to evaluate");
  const auto preds = model::predict(params, c, queries);
  double sum = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const graph::MqEdge* e = g.find_edge(queries[i], preds[i].llm);
    if (!e)
      throw validation_error(
          "mean_argmax_reward: no logged outcome for query '" +
          g.vocab.query_ids[queries[i]] + "' routed to '" +
          c.llm_ids[static_cast<std::size_t>(preds[i].llm)] + "'");
    sum += e->reward;
  }
  return sum / static_cast<double>(queries.size());
}

// Mini-batch training with per-batch edge masking and early stopping on the
// validation reward. Each step sees the training edges minus those of its
// own batch queries, predicts the batch's best LLMs and takes one Adam step
// on the cross-entropy; the learning rate decays linearly over the full
// max_epochs schedule. The returned parameters are the snapshot of the best
// validation epoch, not the last one.
inline TrainResult train(const HeteroGraph& g, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  const std::vector<int> train_queries = g.queries_in(data::Split::Train);
  const std::vector<int> val_queries = g.queries_in(data::Split::Val);
  if (train_queries.empty())
    throw validation_error("train: the graph has no training queries");
  if (val_queries.empty())
    throw validation_error(
        "train: the graph has no validation queries for early stopping");

  const model::ModelDims dims{g.features.dim, cfg.hidden, cfg.layers};
  model::ModelParams params = model::ModelParams::init(dims, cfg.seed);
  const auto tensors = params.tensors();
  numerics::AdamState adam(tensors);
  Rng shuffle_rng(mix_seed(cfg.seed, "shuffle"));

  const std::int64_t batches_per_epoch =
      (static_cast<std::int64_t>(train_queries.size()) + cfg.batch_size - 1) /
      cfg.batch_size;
  const std::int64_t total_steps = batches_per_epoch * cfg.max_epochs;
  const CompiledGraph inference = GraphView::inference_view(g).compile();

  TrainResult result;
  result.params = params;
  std::int64_t step = 0;
  int stall = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto batches = make_epoch_batches(g, cfg.batch_size, shuffle_rng);
    double loss_sum = 0.0;
    double lr = 0.0;
    for (const auto& batch : batches) {
      std::vector<int> labels;
      labels.reserve(batch.size());
      for (int q : batch) labels.push_back(g.best_llm(q));

      const CompiledGraph c = GraphView::training_view(g, batch).compile();
      numerics::Tape tape;
      model::ModelIds ids = model::register_params(tape, params);
      model::BatchForward fwd =
          model::batch_forward(tape, dims, ids, c, batch, labels);
      loss_sum += tape.value(fwd.loss).value();
      const auto grads = tape.backward(fwd.loss);
      lr = numerics::lr_at(step, total_steps, cfg.base_lr);
      adam.step(tensors, grads.param_grads, lr);
      ++step;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(batches.size());
    stats.val_reward = mean_argmax_reward(g, params, inference, val_queries);
    stats.lr = lr;
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);

    if (epoch == 1 || stats.val_reward > result.best_val_reward) {
      result.best_val_reward = stats.val_reward;
      result.best_epoch = epoch;
      result.params = params;
      stall = 0;
    } else if (++stall >= cfg.patience) {
      break;
    }
  }
  result.epochs_run = static_cast<int>(result.history.size());
  return result;
}

}  // namespace graphrouter::train
