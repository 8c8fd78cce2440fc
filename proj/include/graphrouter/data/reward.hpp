#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "graphrouter/common/error.hpp"
#include "graphrouter/data/types.hpp"

namespace graphrouter::data {

enum class MetricKind { Performance, Cost };

// Fits min-max ranges on training-split records only, so evaluation scores
// live on the scale the model was trained against.
inline NormalizationParams fit_normalization(const InteractionLog& log,
                                             const SplitAssignment& split) {
  NormalizationParams p;
  bool any = false;
  for (const auto& r : log.records) {
    if (split.of(r.query_id) != Split::Train) continue;
    if (!any) {
      p.perf_min = p.perf_max = r.performance;
      p.cost_min = p.cost_max = r.cost;
      any = true;
    } else {
      p.perf_min = std::min(p.perf_min, r.performance);
      p.perf_max = std::max(p.perf_max, r.performance);
      p.cost_min = std::min(p.cost_min, r.cost);
      p.cost_max = std::max(p.cost_max, r.cost);
    }
  }
  if (!any)
    throw validation_error(
        "fit_normalization: no training-split records in the log");
  return p;
}

// Min-max to [0, 1], clamped for out-of-range inputs (val/test values can
// fall outside the training range). A degenerate range maps to 0.5.
inline double normalize(double x, MetricKind kind,
                        const NormalizationParams& p) {
  const double lo = kind == MetricKind::Performance ? p.perf_min : p.cost_min;
  const double hi = kind == MetricKind::Performance ? p.perf_max : p.cost_max;
  if (hi <= lo) return 0.5;
  return std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
}

inline double compute_reward(double perf_norm, double cost_norm,
                             const ScenarioWeights& w) {
  return w.alpha * perf_norm - w.beta * cost_norm;
}

// Best LLM per query by normalized reward. Ties break toward the lower raw
// cost, then the lexicographically smaller llm_id, so labels are stable
// regardless of record order.
inline std::map<std::string, std::string> best_llm_labels(
    const std::vector<InteractionRecord>& records, const ScenarioWeights& w,
    const NormalizationParams& norm) {
  struct Best {
    double reward;
    double raw_cost;
    std::string llm_id;
  };
  std::map<std::string, Best> best;
  for (const auto& r : records) {
    const double reward =
        compute_reward(normalize(r.performance, MetricKind::Performance, norm),
                       normalize(r.cost, MetricKind::Cost, norm), w);
    auto it = best.find(r.query_id);
    if (it == best.end()) {
      best.emplace(r.query_id, Best{reward, r.cost, r.llm_id});
      continue;
    }
    Best& b = it->second;
    const bool better =
        reward > b.reward ||
        (reward == b.reward &&
         (r.cost < b.raw_cost ||
          (r.cost == b.raw_cost && r.llm_id < b.llm_id)));
    if (better) b = Best{reward, r.cost, r.llm_id};
  }
  std::map<std::string, std::string> labels;
  for (const auto& [query, b] : best) labels.emplace(query, b.llm_id);
  return labels;
}

}  // namespace graphrouter::data
