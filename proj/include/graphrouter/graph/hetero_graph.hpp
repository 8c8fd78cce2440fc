#pragma once

#include <algorithm>
#include <string>
#include <unordered_set>
#include <vector>

#include "graphrouter/common/error.hpp"
#include "graphrouter/common/rng.hpp"
#include "graphrouter/data/reward.hpp"
#include "graphrouter/data/types.hpp"
#include "graphrouter/features/feature_table.hpp"
#include "graphrouter/numerics/tensor.hpp"

namespace graphrouter::graph {

using numerics::Tensor;

// One observed (LLM, query) interaction inside the routing graph. The reward
// and the best-of-query label are fixed at build time for a single scenario;
// changing the tradeoff means rebuilding the graph.
struct MqEdge {
  int llm = 0;
  int query = 0;
  double perf_norm = 0.0;
  double cost_norm = 0.0;
  double raw_performance = 0.0;
  double raw_cost = 0.0;
  double reward = 0.0;
  bool is_best = false;
};

// Heterogeneous routing graph over one interaction log. Nodes are the tasks,
// queries and LLMs of the vocab; task-query edges are implicit (every query
// links to exactly one task with a constant weight), LLM-query edges are the
// observed interactions. The graph itself is immutable once built; GraphView
// below decides which edges a forward pass may see.
struct HeteroGraph {
  data::LogVocab vocab;
  features::FeatureTable features;
  data::ScenarioWeights weights;

  std::vector<MqEdge> edges;
  std::vector<data::Split> query_split;          // per query index
  std::vector<std::vector<int>> edges_by_query;  // edge indices per query
  std::vector<int> best_edge_by_query;           // edge index, -1 if no edges

  int n_tasks() const { return static_cast<int>(vocab.task_ids.size()); }
  int n_queries() const { return static_cast<int>(vocab.query_ids.size()); }
  int n_llms() const { return static_cast<int>(vocab.llm_ids.size()); }

  std::vector<int> queries_in(data::Split s) const {
    std::vector<int> out;
    for (int q = 0; q < n_queries(); ++q)
      if (query_split[q] == s) out.push_back(q);
    return out;
  }

  // LLM index of the label edge for a query, -1 when the query has no edges.
  int best_llm(int query) const {
    const int e = best_edge_by_query[query];
    return e < 0 ? -1 : edges[e].llm;
  }

  const MqEdge* find_edge(int query, int llm) const {
    for (int e : edges_by_query[query])
      if (edges[e].llm == llm) return &edges[e];
    return nullptr;
  }

  double oracle_reward(int query) const {
    const int e = best_edge_by_query[query];
    if (e < 0)
      throw validation_error("oracle_reward: query '" +
                             vocab.query_ids[query] + "' has no edges");
    return edges[e].reward;
  }
};

// Assembles the graph for one scenario. Labels reproduce best_llm_labels:
// highest reward wins, ties break toward lower raw cost, then the smaller
// llm_id. Training queries must have at least one edge because they anchor
// the classification loss; validation and test queries may be sparse.
inline HeteroGraph build_graph(const data::LogVocab& vocab,
                               const features::FeatureTable& features,
                               const data::SplitAssignment& split,
                               const data::ScenarioWeights& weights) {
  HeteroGraph g;
  g.vocab = vocab;
  g.features = features;
  g.weights = weights;

  const int n_queries = g.n_queries();
  g.query_split.resize(n_queries);
  for (int q = 0; q < n_queries; ++q)
    g.query_split[q] = split.of(vocab.query_ids[q]);

  g.edges_by_query.assign(n_queries, {});
  g.best_edge_by_query.assign(n_queries, -1);
  g.edges.reserve(features.llm_query_feats.size());
  for (const auto& f : features.llm_query_feats) {
    MqEdge e;
    e.llm = f.llm;
    e.query = f.query;
    e.perf_norm = f.perf_norm;
    e.cost_norm = f.cost_norm;
    e.raw_performance = f.raw_performance;
    e.raw_cost = f.raw_cost;
    e.reward = data::compute_reward(f.perf_norm, f.cost_norm, weights);
    const int idx = static_cast<int>(g.edges.size());
    g.edges.push_back(e);
    g.edges_by_query[e.query].push_back(idx);

    int& best = g.best_edge_by_query[e.query];
    if (best < 0) {
      best = idx;
    } else {
      const MqEdge& b = g.edges[best];
      const bool better =
          e.reward > b.reward ||
          (e.reward == b.reward &&
           (e.raw_cost < b.raw_cost ||
            (e.raw_cost == b.raw_cost &&
             vocab.llm_ids[e.llm] < vocab.llm_ids[b.llm])));
      if (better) best = idx;
    }
  }
  for (int e = 0; e < static_cast<int>(g.edges.size()); ++e)
    g.edges[e].is_best = g.best_edge_by_query[g.edges[e].query] == e;

  for (int q = 0; q < n_queries; ++q)
    if (g.query_split[q] == data::Split::Train && g.edges_by_query[q].empty())
      throw validation_error("build_graph: training query '" +
                             vocab.query_ids[q] + "' has no LLM edges");
  return g;
}

// Everything a single forward pass needs, flattened into dense feature
// matrices and edge index arrays. Row order is the vocab order with any
// attached extras appended, so compiling the same view twice yields
// byte-identical tensors.
struct CompiledGraph {
  int n_tasks = 0;
  int n_queries = 0;
  int n_llms = 0;
  int dim = 0;

  Tensor task_feats;   // (n_tasks, dim)
  Tensor query_feats;  // (n_queries, dim)
  Tensor llm_feats;    // (n_llms, dim)

  // Task-query edges are stored implicitly: every query row has exactly one,
  // to query_task[q], carrying task_query_weight.
  double task_query_weight = 1.0;
  std::vector<int> query_task;

  // Visible LLM-query edges; mq_feats holds [perf_norm, cost_norm] rows.
  std::vector<int> mq_llm;
  std::vector<int> mq_query;
  Tensor mq_feats;  // (n_edges, 2)

  std::vector<std::string> query_ids;
  std::vector<std::string> llm_ids;
};

// A visibility mask plus optional attachments over an immutable HeteroGraph.
// Only training-split edges can ever be visible; a training batch addition-
// ally hides the edges of the queries it is about to predict. Attached
// queries and LLMs cover serving and few-shot insertion: they add rows to the
// compiled matrices without touching the underlying graph.
class GraphView {
public:
  struct ExtraEdge {
    int query = 0;
    double perf_norm = 0.0;
    double cost_norm = 0.0;
  };

  // Forward view for a training step: training edges minus the edges of the
  // batch queries, so the model cannot read the answers it must predict.
  static GraphView training_view(const HeteroGraph& g,
                                 const std::vector<int>& batch_queries) {
    GraphView v(g);
    std::unordered_set<int> masked(batch_queries.begin(), batch_queries.end());
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      const MqEdge& edge = g.edges[e];
      v.visible_[e] = g.query_split[edge.query] == data::Split::Train &&
                      masked.count(edge.query) == 0;
    }
    return v;
  }

  // Forward view for validation, test and serving: all training edges.
  static GraphView inference_view(const HeteroGraph& g) {
    return training_view(g, {});
  }

  const HeteroGraph& graph() const { return *graph_; }
  bool visible(int edge) const { return visible_[edge] != 0; }

  // Adds a query row (serving path). Returns its row index in the compiled
  // matrices. The query gets a task edge and nothing else.
  int attach_query(const std::string& id, int task, Tensor feat) {
    if (task < 0 || task >= graph_->n_tasks())
      throw validation_error("attach_query: task index " +
                             std::to_string(task) + " out of range");
    check_feat("attach_query", feat);
    if (graph_->vocab.query_index.count(id) || extra_query_ids_.count(id))
      throw validation_error("attach_query: query id '" + id +
                             "' already present");
    extra_query_ids_.insert(id);
    extra_queries_.push_back({id, task, std::move(feat)});
    return graph_->n_queries() + static_cast<int>(extra_queries_.size()) - 1;
  }

  // Adds an LLM row plus its auxiliary observation edges (few-shot path).
  // Aux edges must target training queries; they are always visible.
  int attach_llm(const std::string& id, Tensor feat,
                 std::vector<ExtraEdge> edges) {
    check_feat("attach_llm", feat);
    if (graph_->vocab.llm_index.count(id) || extra_llm_ids_.count(id))
      throw validation_error("attach_llm: llm id '" + id +
                             "' already present");
    for (const auto& e : edges) {
      if (e.query < 0 || e.query >= graph_->n_queries())
        throw validation_error("attach_llm: edge query index " +
                               std::to_string(e.query) + " out of range");
      if (graph_->query_split[e.query] != data::Split::Train)
        throw validation_error(
            "attach_llm: aux edge targets non-training query '" +
            graph_->vocab.query_ids[e.query] + "'");
      if (e.perf_norm < 0 || e.perf_norm > 1 || e.cost_norm < 0 ||
          e.cost_norm > 1)
        throw validation_error(
            "attach_llm: aux edge features must lie in [0, 1]");
    }
    extra_llm_ids_.insert(id);
    extra_llms_.push_back({id, std::move(feat), std::move(edges)});
    return graph_->n_llms() + static_cast<int>(extra_llms_.size()) - 1;
  }

  CompiledGraph compile() const {
    const HeteroGraph& g = *graph_;
    CompiledGraph c;
    c.dim = g.features.dim;
    c.n_tasks = g.n_tasks();
    c.n_queries = g.n_queries() + static_cast<int>(extra_queries_.size());
    c.n_llms = g.n_llms() + static_cast<int>(extra_llms_.size());
    c.task_query_weight = g.features.task_query_weight;

    c.task_feats = g.features.task_feats;
    c.query_feats = append_rows(g.features.query_feats, extra_queries_.size(),
                                [&](std::size_t i) -> const Tensor& {
                                  return extra_queries_[i].feat;
                                });
    c.llm_feats = append_rows(g.features.llm_feats, extra_llms_.size(),
                              [&](std::size_t i) -> const Tensor& {
                                return extra_llms_[i].feat;
                              });

    c.query_task = g.vocab.query_task;
    c.query_ids = g.vocab.query_ids;
    for (const auto& q : extra_queries_) {
      c.query_task.push_back(q.task);
      c.query_ids.push_back(q.id);
    }
    c.llm_ids = g.vocab.llm_ids;
    for (const auto& m : extra_llms_) c.llm_ids.push_back(m.id);

    std::vector<double> feat_rows;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      if (!visible_[e]) continue;
      c.mq_llm.push_back(g.edges[e].llm);
      c.mq_query.push_back(g.edges[e].query);
      feat_rows.push_back(g.edges[e].perf_norm);
      feat_rows.push_back(g.edges[e].cost_norm);
    }
    for (std::size_t i = 0; i < extra_llms_.size(); ++i) {
      for (const auto& e : extra_llms_[i].edges) {
        c.mq_llm.push_back(g.n_llms() + static_cast<int>(i));
        c.mq_query.push_back(e.query);
        feat_rows.push_back(e.perf_norm);
        feat_rows.push_back(e.cost_norm);
      }
    }
    c.mq_feats = Tensor::from_matrix(
        static_cast<std::int64_t>(c.mq_llm.size()), 2, std::move(feat_rows));
    return c;
  }

private:
  struct ExtraQuery {
    std::string id;
    int task;
    Tensor feat;
  };
  struct ExtraLlm {
    std::string id;
    Tensor feat;
    std::vector<ExtraEdge> edges;
  };

  explicit GraphView(const HeteroGraph& g)
      : graph_(&g), visible_(g.edges.size(), 0) {}

  void check_feat(const char* who, const Tensor& feat) const {
    if (feat.rank() != 1 || feat.dim(0) != graph_->features.dim)
      throw validation_error(std::string(who) + ": feature shape " +
                             feat.shape_string() + " does not match dim " +
                             std::to_string(graph_->features.dim));
  }

  template <typename RowAt>
  static Tensor append_rows(const Tensor& base, std::size_t extra,
                            RowAt row_at) {
    if (extra == 0) return base;
    const std::int64_t rows = base.dim(0) + static_cast<std::int64_t>(extra);
    const std::int64_t cols = base.dim(1);
    Tensor out = Tensor::zeros({rows, cols});
    std::copy(base.data(), base.data() + base.numel(), out.data());
    for (std::size_t i = 0; i < extra; ++i) {
      const Tensor& row = row_at(i);
      std::copy(row.data(), row.data() + cols,
                out.data() + (base.dim(0) + static_cast<std::int64_t>(i)) * cols);
    }
    return out;
  }

  const HeteroGraph* graph_;
  std::vector<char> visible_;
  std::vector<ExtraQuery> extra_queries_;
  std::vector<ExtraLlm> extra_llms_;
  std::unordered_set<std::string> extra_query_ids_;
  std::unordered_set<std::string> extra_llm_ids_;
};

// Shuffled partition of the training queries for one epoch. Every training
// query appears in exactly one batch; the last batch may run short.
inline std::vector<std::vector<int>> make_epoch_batches(const HeteroGraph& g,
                                                        int batch_size,
                                                        Rng& rng) {
  if (batch_size <= 0)
    throw validation_error("make_epoch_batches: batch_size must be positive");
  std::vector<int> train = g.queries_in(data::Split::Train);
  rng.shuffle(train);
  std::vector<std::vector<int>> batches;
  for (std::size_t i = 0; i < train.size(); i += batch_size) {
    const std::size_t end = std::min(train.size(), i + batch_size);
    batches.emplace_back(train.begin() + i, train.begin() + end);
  }
  return batches;
}

}  // namespace graphrouter::graph
