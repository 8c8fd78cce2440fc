#pragma once

#include <string>
#include <vector>

#include "graphrouter/graph/hetero_graph.hpp"
#include "graphrouter/model/params.hpp"
#include "graphrouter/numerics/tape.hpp"

namespace graphrouter::model {

using graph::CompiledGraph;
using numerics::Tape;
using numerics::ValueId;

namespace detail {
inline std::vector<std::int64_t> to_i64(const std::vector<int>& v) {
  return std::vector<std::int64_t>(v.begin(), v.end());
}
}  // namespace detail

// Tape handles for the registered parameters. Field order mirrors
// LayerParams::for_each_impl / ModelParams::for_each.
struct ModelIds {
  struct Layer {
    ValueId w_qt, w_tq, w_mq, w_qm;
    ValueId g_mq, g_qm;
    ValueId u_t, u_q, u_m;
    ValueId b_t, b_q, b_m;
  };
  std::vector<Layer> layers;
  ValueId combine_w1, combine_b1, combine_w2, combine_b2;
};

// Records every parameter on the tape, in ModelParams::for_each order so
// BackwardResult::param_grads lines up with ModelParams::tensors(). With
// trainable=false the parameters become constants, which keeps inference
// tapes free of backward closures.
inline ModelIds register_params(Tape& tape, const ModelParams& p,
                                bool trainable = true) {
  std::vector<ValueId> flat;
  p.for_each([&](const std::string& name, const Tensor& t) {
    flat.push_back(trainable ? tape.parameter(t, name) : tape.constant(t));
  });
  ModelIds ids;
  std::size_t k = 0;
  ids.layers.resize(p.layers.size());
  for (auto& L : ids.layers) {
    L.w_qt = flat[k++];
    L.w_tq = flat[k++];
    L.w_mq = flat[k++];
    L.w_qm = flat[k++];
    L.g_mq = flat[k++];
    L.g_qm = flat[k++];
    L.u_t = flat[k++];
    L.u_q = flat[k++];
    L.u_m = flat[k++];
    L.b_t = flat[k++];
    L.b_q = flat[k++];
    L.b_m = flat[k++];
  }
  ids.combine_w1 = flat[k++];
  ids.combine_b1 = flat[k++];
  ids.combine_w2 = flat[k++];
  ids.combine_b2 = flat[k++];
  return ids;
}

// Final node embeddings, all (rows, hidden).
struct Embeddings {
  ValueId tasks;
  ValueId queries;
  ValueId llms;
};

// Message passing over the compiled graph.
//
// Per layer, with E the visible edge features:
//   task    <- mean over its queries of      relu(Q W_qt) * w_tq
//   query   <- [ relu(T W_tq) * w_tq  +  mean of relu((M W_mq) o (E G_mq)) ] / 2
//   llm     <- mean over its queries of      relu((Q W_qm) o (E G_qm))
//   state'  =  relu([state, aggregate] U + b)
// where o is the elementwise product and the means run over the incoming
// edges of each node (empty sets aggregate to zero). All three updates read
// the pre-update states. The implementation applies each W to the node
// matrix first and gathers per-edge rows afterwards, which is the same map
// at a fraction of the flops; the task-side terms need no edge expansion at
// all because every query has exactly one task edge.
inline Embeddings forward_embeddings(Tape& tape, const ModelDims& dims,
                                     const ModelIds& ids,
                                     const CompiledGraph& c) {
  dims.validate();
  if (c.dim != dims.feat_dim)
    throw validation_error("forward: graph feature dim " +
                           std::to_string(c.dim) +
                           " does not match model feat_dim " +
                           std::to_string(dims.feat_dim));
  if (ids.layers.size() != static_cast<std::size_t>(dims.layers))
    throw validation_error("forward: parameter set has " +
                           std::to_string(ids.layers.size()) +
                           " layers, dims say " + std::to_string(dims.layers));

  const auto query_task = detail::to_i64(c.query_task);
  const auto mq_llm = detail::to_i64(c.mq_llm);
  const auto mq_query = detail::to_i64(c.mq_query);
  const bool has_mq = !c.mq_llm.empty();

  ValueId T = tape.constant(c.task_feats);
  ValueId Q = tape.constant(c.query_feats);
  ValueId M = tape.constant(c.llm_feats);
  ValueId E = has_mq ? tape.constant(c.mq_feats) : ValueId{-1};

  for (const auto& L : ids.layers) {
    ValueId qmsg = tape.relu(tape.matmul(Q, L.w_qt));
    ValueId tmsg = tape.relu(tape.matmul(T, L.w_tq));
    if (c.task_query_weight != 1.0) {
      qmsg = tape.scale(qmsg, c.task_query_weight);
      tmsg = tape.scale(tmsg, c.task_query_weight);
    }
    ValueId a_t = tape.segment_mean(qmsg, query_task, c.n_tasks);
    ValueId a_q_task = tape.gather_rows(tmsg, query_task);

    ValueId a_q_llm, a_m;
    if (has_mq) {
      ValueId s_mq = tape.relu(
          tape.mul(tape.gather_rows(tape.matmul(M, L.w_mq), mq_llm),
                   tape.matmul(E, L.g_mq)));
      a_q_llm = tape.segment_mean(s_mq, mq_query, c.n_queries);
      ValueId s_qm = tape.relu(
          tape.mul(tape.gather_rows(tape.matmul(Q, L.w_qm), mq_query),
                   tape.matmul(E, L.g_qm)));
      a_m = tape.segment_mean(s_qm, mq_llm, c.n_llms);
    } else {
      a_q_llm = tape.constant(Tensor::zeros({c.n_queries, dims.hidden}));
      a_m = tape.constant(Tensor::zeros({c.n_llms, dims.hidden}));
    }
    ValueId a_q = tape.scale(tape.add(a_q_task, a_q_llm), 0.5);

    T = tape.relu(
        tape.add_row_bias(tape.matmul(tape.concat({T, a_t}, 1), L.u_t), L.b_t));
    Q = tape.relu(
        tape.add_row_bias(tape.matmul(tape.concat({Q, a_q}, 1), L.u_q), L.b_q));
    M = tape.relu(
        tape.add_row_bias(tape.matmul(tape.concat({M, a_m}, 1), L.u_m), L.b_m));
  }
  return {T, Q, M};
}

// Fuses the task and query embeddings of the given query rows through the
// combine MLP; output is (|queries|, hidden).
inline ValueId combine_query_task(Tape& tape, const ModelIds& ids,
                                  const Embeddings& emb,
                                  const CompiledGraph& c,
                                  const std::vector<int>& queries) {
  std::vector<std::int64_t> tasks_of;
  tasks_of.reserve(queries.size());
  for (int q : queries) {
    if (q < 0 || q >= c.n_queries)
      throw validation_error("combine_query_task: query index " +
                             std::to_string(q) + " out of range");
    tasks_of.push_back(c.query_task[static_cast<std::size_t>(q)]);
  }
  ValueId x = tape.concat({tape.gather_rows(emb.tasks, std::move(tasks_of)),
                           tape.gather_rows(emb.queries, detail::to_i64(queries))},
                          1);
  ValueId h = tape.relu(
      tape.add_row_bias(tape.matmul(x, ids.combine_w1), ids.combine_b1));
  return tape.add_row_bias(tape.matmul(h, ids.combine_w2), ids.combine_b2);
}

// Routing scores: scaled dot of each fused query vector with each LLM
// embedding, (|queries|, n_llms).
inline ValueId edge_logits(Tape& tape, ValueId fused, ValueId llms,
                           int hidden) {
  return tape.scale(tape.matmul(fused, tape.transpose(llms)),
                    1.0 / static_cast<double>(hidden));
}

struct BatchForward {
  ValueId logits;  // (|queries|, n_llms)
  ValueId loss;    // scalar, mean cross-entropy
};

// Full forward for one batch of queries with known best-LLM labels.
inline BatchForward batch_forward(Tape& tape, const ModelDims& dims,
                                  const ModelIds& ids, const CompiledGraph& c,
                                  const std::vector<int>& queries,
                                  const std::vector<int>& labels) {
  if (queries.size() != labels.size())
    throw validation_error("batch_forward: " + std::to_string(queries.size()) +
                           " queries but " + std::to_string(labels.size()) +
                           " labels");
  Embeddings emb = forward_embeddings(tape, dims, ids, c);
  ValueId fused = combine_query_task(tape, ids, emb, c, queries);
  ValueId z = edge_logits(tape, fused, emb.llms, dims.hidden);
  return {z, tape.softmax_xent_rows(z, detail::to_i64(labels))};
}

// Argmax over one logit row with a deterministic tie-break: equal scores go
// to the lexicographically smaller llm_id.
inline int argmax_llm(const std::vector<double>& logits,
                      const std::vector<std::string>& llm_ids) {
  if (logits.empty() || logits.size() != llm_ids.size())
    throw validation_error("argmax_llm: got " + std::to_string(logits.size()) +
                           " logits for " + std::to_string(llm_ids.size()) +
                           " LLMs");
  int best = 0;
  for (int i = 1; i < static_cast<int>(logits.size()); ++i) {
    if (logits[i] > logits[best] ||
        (logits[i] == logits[best] && llm_ids[i] < llm_ids[best]))
      best = i;
  }
  return best;
}

struct Prediction {
  int llm = -1;
  std::vector<double> logits;         // one score per LLM row
  std::vector<double> probabilities;  // softmax of the logits
};

// Inference over a set of query rows: one shared message-passing pass, then
// a scored row per query. Parameters enter as constants, so the tape stays
// closure-free.
inline std::vector<Prediction> predict(const ModelParams& params,
                                       const CompiledGraph& c,
                                       const std::vector<int>& queries) {
  Tape tape;
  ModelIds ids = register_params(tape, params, false);
  Embeddings emb = forward_embeddings(tape, params.dims, ids, c);
  ValueId fused = combine_query_task(tape, ids, emb, c, queries);
  ValueId z = edge_logits(tape, fused, emb.llms, params.dims.hidden);
  ValueId p = tape.softmax_row(z);

  const Tensor& tz = tape.value(z);
  const Tensor& tp = tape.value(p);
  std::vector<Prediction> out(queries.size());
  for (std::size_t r = 0; r < queries.size(); ++r) {
    Prediction& pred = out[r];
    pred.logits.resize(static_cast<std::size_t>(c.n_llms));
    pred.probabilities.resize(static_cast<std::size_t>(c.n_llms));
    for (int m = 0; m < c.n_llms; ++m) {
      pred.logits[static_cast<std::size_t>(m)] =
          tz.at(static_cast<std::int64_t>(r), m);
      pred.probabilities[static_cast<std::size_t>(m)] =
          tp.at(static_cast<std::int64_t>(r), m);
    }
    pred.llm = argmax_llm(pred.logits, c.llm_ids);
  }
  return out;
}

}  // namespace graphrouter::model
