#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "graphrouter/common/error.hpp"
#include "graphrouter/data/reward.hpp"
#include "graphrouter/data/types.hpp"
#include "graphrouter/features/embedder.hpp"
#include "graphrouter/numerics/tensor.hpp"

namespace graphrouter::features {

// Optional on-disk description texts, one file per entity under
// <root>/tasks/<task_id>.txt and <root>/llms/<llm_id>.txt. Descriptions
// carried in the log win over these files.
class DescriptionStore {
public:
  DescriptionStore() = default;

  explicit DescriptionStore(std::filesystem::path root)
      : root_(std::move(root)) {}

  std::optional<std::string> task_description(const std::string& id) const {
    return read(root_.empty() ? root_ : root_ / "tasks" / (id + ".txt"));
  }

  std::optional<std::string> llm_description(const std::string& id) const {
    return read(root_.empty() ? root_ : root_ / "llms" / (id + ".txt"));
  }

  const std::filesystem::path& root() const { return root_; }

private:
  static std::optional<std::string> read(const std::filesystem::path& p) {
    if (p.empty() || !std::filesystem::exists(p)) return std::nullopt;
    std::ifstream in(p, std::ios::binary);
    if (!in) throw io_error("cannot read description file '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string s = ss.str();
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s.empty() ? std::nullopt : std::optional<std::string>(std::move(s));
  }

  std::filesystem::path root_;
};

namespace detail {

inline std::string fmt_cost(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

}  // namespace detail

// Resolved description text for a task; errors if none is available.
inline std::string task_embedding_text(const data::TaskInfo& task,
                                       const DescriptionStore& store) {
  if (!task.description.empty()) return task.description;
  if (auto d = store.task_description(task.task_id)) return *d;
  throw validation_error("task '" + task.task_id + "' has no description");
}

// Resolved description text for an LLM with its price appended, so the cost
// level is part of the node's content representation.
inline std::string llm_embedding_text(const data::LlmInfo& llm,
                                      const DescriptionStore& store) {
  std::string desc = llm.description;
  if (desc.empty()) {
    if (auto d = store.llm_description(llm.llm_id)) desc = *d;
  }
  if (desc.empty())
    throw validation_error("llm '" + llm.llm_id + "' has no description");
  return desc + " Cost per 1M tokens: " + detail::fmt_cost(llm.cost_per_mtoken) +
         ".";
}

// Initial node embeddings and edge features, row-aligned with a LogVocab.
struct FeatureTable {
  int dim = 0;
  numerics::Tensor task_feats;   // (n_tasks, dim)
  numerics::Tensor query_feats;  // (n_queries, dim)
  numerics::Tensor llm_feats;    // (n_llms, dim)

  // Task-query edges carry the constant weight 1; one edge per query.
  double task_query_weight = 1.0;

  // One entry per interaction whose LLM is in the vocab, in record order.
  // Raw values ride along for label tie-breaking and evaluation reports.
  struct EdgeFeature {
    int query = 0;
    int llm = 0;
    double perf_norm = 0.0;
    double cost_norm = 0.0;
    double raw_performance = 0.0;
    double raw_cost = 0.0;
  };
  std::vector<EdgeFeature> llm_query_feats;
};

inline FeatureTable build_feature_table(const data::InteractionLog& log,
                                        const data::LogVocab& vocab,
                                        const data::NormalizationParams& norm,
                                        const Embedder& embedder,
                                        const DescriptionStore& store = {}) {
  FeatureTable table;
  table.dim = embedder.dim();
  const std::int64_t d = table.dim;

  auto fill_row = [d](numerics::Tensor& dst, std::int64_t row,
                      const numerics::Tensor& src) {
    for (std::int64_t j = 0; j < d; ++j) dst.at(row, j) = src.at(j);
  };

  table.task_feats =
      numerics::Tensor::zeros({std::int64_t(vocab.task_ids.size()), d});
  for (std::size_t i = 0; i < vocab.task_ids.size(); ++i) {
    const data::TaskInfo* info = log.find_task(vocab.task_ids[i]);
    if (!info)
      throw validation_error("feature table: task '" + vocab.task_ids[i] +
                             "' missing from log");
    fill_row(table.task_feats, std::int64_t(i),
             embedder.embed(task_embedding_text(*info, store)));
  }

  table.llm_feats =
      numerics::Tensor::zeros({std::int64_t(vocab.llm_ids.size()), d});
  for (std::size_t i = 0; i < vocab.llm_ids.size(); ++i) {
    const data::LlmInfo* info = log.find_llm(vocab.llm_ids[i]);
    if (!info)
      throw validation_error("feature table: llm '" + vocab.llm_ids[i] +
                             "' missing from log");
    fill_row(table.llm_feats, std::int64_t(i),
             embedder.embed(llm_embedding_text(*info, store)));
  }

  table.query_feats =
      numerics::Tensor::zeros({std::int64_t(vocab.query_ids.size()), d});
  for (std::size_t i = 0; i < vocab.query_ids.size(); ++i)
    fill_row(table.query_feats, std::int64_t(i),
             embedder.embed(vocab.query_texts[i]));

  for (const auto& r : log.records) {
    auto m = vocab.llm_index.find(r.llm_id);
    if (m == vocab.llm_index.end()) continue;  // excluded LLM
    auto q = vocab.query_index.find(r.query_id);
    if (q == vocab.query_index.end())
      throw validation_error("feature table: query '" + r.query_id +
                             "' missing from vocab");
    FeatureTable::EdgeFeature e;
    e.query = q->second;
    e.llm = m->second;
    e.perf_norm =
        data::normalize(r.performance, data::MetricKind::Performance, norm);
    e.cost_norm = data::normalize(r.cost, data::MetricKind::Cost, norm);
    e.raw_performance = r.performance;
    e.raw_cost = r.cost;
    table.llm_query_feats.push_back(e);
  }
  return table;
}

}  // namespace graphrouter::features
