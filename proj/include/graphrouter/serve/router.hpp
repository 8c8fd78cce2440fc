#pragma once

#include <cstdint>
#include <cstdio>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphrouter/common/error.hpp"
#include "graphrouter/common/rng.hpp"
#include "graphrouter/data/reward.hpp"
#include "graphrouter/data/types.hpp"
#include "graphrouter/features/embedder.hpp"
#include "graphrouter/features/feature_table.hpp"
#include "graphrouter/graph/hetero_graph.hpp"
#include "graphrouter/model/network.hpp"
#include "graphrouter/model/params.hpp"

namespace graphrouter::serve {

// A single routing answer. llm_ids carries the row order of the score
// vectors; the JSON form keys scores by LLM id instead.
struct RouteDecision {
  std::string llm_id;
  std::vector<std::string> llm_ids;
  std::vector<double> logits;
  std::vector<double> probabilities;
  std::string snapshot_id;

  nlohmann::json to_json() const {
    nlohmann::json z = nlohmann::json::object();
    nlohmann::json p = nlohmann::json::object();
    for (std::size_t i = 0; i < llm_ids.size(); ++i) {
      z[llm_ids[i]] = logits[i];
      p[llm_ids[i]] = probabilities[i];
    }
    return {{"llm_id", llm_id},
            {"logits", std::move(z)},
            {"probabilities", std::move(p)},
            {"snapshot_id", snapshot_id}};
  }
};

// Immutable routing state: trained weights plus the graph they were trained
// on, with any later-attached LLMs layered on top. Attaching an LLM yields a
// new snapshot and never mutates the old one, so in-flight requests keep a
// consistent view.
//
// route() is a pure function of (snapshot, task, query text). Decisions are
// cached per snapshot because one answer costs a full message-passing pass
// over the graph; repeated queries are common in serving and must not pay
// that price twice.
class RouterSnapshot {
public:
  RouterSnapshot(model::ModelParams params,
                 std::shared_ptr<const graph::HeteroGraph> graph,
                 data::NormalizationParams norm,
                 std::shared_ptr<const features::Embedder> embedder,
                 features::DescriptionStore store = {})
      : params_(std::move(params)),
        graph_(std::move(graph)),
        norm_(norm),
        embedder_(std::move(embedder)),
        store_(std::move(store)) {
    if (!graph_) throw validation_error("RouterSnapshot: null graph");
    if (!embedder_) throw validation_error("RouterSnapshot: null embedder");
    if (embedder_->dim() != graph_->features.dim)
      throw validation_error(
          "RouterSnapshot: embedder dim " + std::to_string(embedder_->dim()) +
          " does not match graph dim " +
          std::to_string(graph_->features.dim));
    rebuild();
  }

  const std::string& id() const { return id_; }
  const graph::HeteroGraph& graph() const { return *graph_; }
  const model::ModelParams& params() const { return params_; }

  // All routable LLM ids: the graph's own plus attached ones, in row order.
  std::vector<std::string> llm_ids() const {
    std::vector<std::string> ids = graph_->vocab.llm_ids;
    for (const auto& m : extras_) ids.push_back(m.info.llm_id);
    return ids;
  }

  RouteDecision route(const std::string& task_id,
                      const std::string& query_text) const {
    auto t = graph_->vocab.task_index.find(task_id);
    if (t == graph_->vocab.task_index.end())
      throw validation_error("route: unknown task '" + task_id + "'");
    const std::string key = task_id + '\n' + query_text;

    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;

    graph::GraphView view = *base_view_;
    const int row = view.attach_query("route:" + detail_hex(fnv1a64(key)),
                                      t->second, embedder_->embed(query_text));
    const graph::CompiledGraph c = view.compile();
    const model::Prediction pred = model::predict(params_, c, {row})[0];

    RouteDecision d;
    d.llm_ids = c.llm_ids;
    d.logits = pred.logits;
    d.probabilities = pred.probabilities;
    d.llm_id = c.llm_ids[static_cast<std::size_t>(pred.llm)];
    d.snapshot_id = id_;
    if (cache_.size() >= kCacheCap) cache_.clear();
    cache_.emplace(key, d);
    return d;
  }

  // Few-shot insertion: a new LLM joins with its description and a handful
  // of logged observations on training queries. No retraining happens; the
  // new node rides on the trained message functions.
  std::shared_ptr<const RouterSnapshot> with_llm(
      const data::LlmInfo& info,
      const std::vector<data::InteractionRecord>& aux_records) const {
    if (info.llm_id.empty())
      throw validation_error("with_llm: llm_id must not be empty");
    for (const auto& id : llm_ids())
      if (id == info.llm_id)
        throw validation_error("with_llm: llm '" + info.llm_id +
                               "' is already routable");

    ExtraLlm extra;
    extra.info = info;
    extra.feat = embedder_->embed(
        features::llm_embedding_text(info, store_));
    for (const auto& r : aux_records) {
      if (!r.llm_id.empty() && r.llm_id != info.llm_id)
        throw validation_error("with_llm: record for query '" + r.query_id +
                               "' belongs to llm '" + r.llm_id + "'");
      auto q = graph_->vocab.query_index.find(r.query_id);
      if (q == graph_->vocab.query_index.end())
        throw validation_error("with_llm: unknown query '" + r.query_id +
                               "'");
      graph::GraphView::ExtraEdge e;
      e.query = q->second;
      e.perf_norm =
          data::normalize(r.performance, data::MetricKind::Performance, norm_);
      e.cost_norm = data::normalize(r.cost, data::MetricKind::Cost, norm_);
      extra.edges.push_back(e);
    }

    auto next = std::shared_ptr<RouterSnapshot>(new RouterSnapshot(*this));
    next->extras_.push_back(std::move(extra));
    next->rebuild();
    return next;
  }

private:
  struct ExtraLlm {
    data::LlmInfo info;
    numerics::Tensor feat;
    std::vector<graph::GraphView::ExtraEdge> edges;
  };

  // Copy used by with_llm; drops the decision cache of the source.
  RouterSnapshot(const RouterSnapshot& other)
      : params_(other.params_),
        graph_(other.graph_),
        norm_(other.norm_),
        embedder_(other.embedder_),
        store_(other.store_),
        extras_(other.extras_) {}

  static std::string detail_hex(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(v));
    return buf;
  }

  // The view every route() starts from, and a content id that changes
  // whenever the weights, the graph or the attachments do.
  void rebuild() {
    base_view_.emplace(graph::GraphView::inference_view(*graph_));
    std::string ident = detail_hex(params_.content_hash());
    ident += '|' + graph_->weights.label();
    ident += '|' + std::to_string(graph_->n_queries());
    for (const auto& id : graph_->vocab.llm_ids) ident += '|' + id;
    for (const auto& m : extras_) {
      ident += "|+" + m.info.llm_id;
      for (const auto& e : m.edges) {
        char buf[80];
        std::snprintf(buf, sizeof(buf), ":%d,%.17g,%.17g", e.query,
                      e.perf_norm, e.cost_norm);
        ident += buf;
      }
      base_view_->attach_llm(m.info.llm_id, m.feat, m.edges);
    }
    id_ = "snap-" + detail_hex(fnv1a64(ident));
    cache_.clear();
  }

  static constexpr std::size_t kCacheCap = 1024;

  model::ModelParams params_;
  std::shared_ptr<const graph::HeteroGraph> graph_;
  data::NormalizationParams norm_;
  std::shared_ptr<const features::Embedder> embedder_;
  features::DescriptionStore store_;
  std::vector<ExtraLlm> extras_;
  std::optional<graph::GraphView> base_view_;
  std::string id_;

  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, RouteDecision> cache_;
};

}  // namespace graphrouter::serve
