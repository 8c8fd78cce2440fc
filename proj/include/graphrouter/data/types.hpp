#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "graphrouter/common/error.hpp"

namespace graphrouter::data {

struct TaskInfo {
  std::string task_id;
  std::string name;
  std::string description;
  std::string metric_name;
};

struct LlmInfo {
  std::string llm_id;
  std::string name;
  std::string size_label;  // e.g. "7b", "8x7b", "70b"
  double cost_per_mtoken = 0.0;
  std::string description;
};

// One logged (task, query, llm) call with its measured outcome. performance
// is on the task metric scale, cost is the raw price of the call.
// response_text is carried through for bookkeeping but never consumed by the
// model.
struct InteractionRecord {
  std::string task_id;
  std::string query_id;
  std::string query_text;
  std::string llm_id;
  double performance = 0.0;
  double cost = 0.0;
  std::string response_text;
};

enum class Split { Train, Val, Test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

inline Split split_from_name(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw validation_error("unknown split name '" + s + "'");
}

struct SplitAssignment {
  std::unordered_map<std::string, Split> by_query;
  // Populated in the new-LLM setting: these LLMs are invisible during
  // training and attach later through auxiliary records.
  std::vector<std::string> held_out_llms;
  std::vector<std::string> aux_query_ids;

  Split of(const std::string& query_id) const {
    auto it = by_query.find(query_id);
    if (it == by_query.end())
      throw validation_error("query '" + query_id +
                             "' has no split assignment");
    return it->second;
  }

  bool is_new_llm_setting() const { return !held_out_llms.empty(); }

  bool is_held_out(const std::string& llm_id) const {
    for (const auto& id : held_out_llms)
      if (id == llm_id) return true;
    return false;
  }
};

// Min-max ranges fitted on the training split only.
struct NormalizationParams {
  double perf_min = 0.0;
  double perf_max = 1.0;
  double cost_min = 0.0;
  double cost_max = 1.0;
};

enum class ScenarioName { PerformanceFirst, Balance, CostFirst, Custom };

// Reward weights: reward = alpha * performance - beta * cost, both inputs
// normalized to [0, 1].
struct ScenarioWeights {
  ScenarioName name = ScenarioName::Balance;
  double alpha = 0.5;
  double beta = 0.5;

  static ScenarioWeights performance_first() {
    return {ScenarioName::PerformanceFirst, 1.0, 0.0};
  }
  static ScenarioWeights balance() { return {ScenarioName::Balance, 0.5, 0.5}; }
  static ScenarioWeights cost_first() {
    return {ScenarioName::CostFirst, 0.2, 0.8};
  }
  static ScenarioWeights custom(double alpha, double beta) {
    return {ScenarioName::Custom, alpha, beta};
  }

  static ScenarioWeights parse(const std::string& s) {
    if (s == "performance-first") return performance_first();
    if (s == "balance") return balance();
    if (s == "cost-first") return cost_first();
    throw validation_error(
        "unknown scenario '" + s +
        "' (expected performance-first, balance or cost-first)");
  }

  std::string label() const {
    switch (name) {
      case ScenarioName::PerformanceFirst: return "performance-first";
      case ScenarioName::Balance: return "balance";
      case ScenarioName::CostFirst: return "cost-first";
      case ScenarioName::Custom:
        return "custom(" + std::to_string(alpha) + "," +
               std::to_string(beta) + ")";
    }
    return "?";
  }
};

// A full interaction log: entity tables plus the per-call records.
struct InteractionLog {
  std::vector<TaskInfo> tasks;
  std::vector<LlmInfo> llms;
  std::vector<InteractionRecord> records;

  const TaskInfo* find_task(const std::string& id) const {
    for (const auto& t : tasks)
      if (t.task_id == id) return &t;
    return nullptr;
  }

  const LlmInfo* find_llm(const std::string& id) const {
    for (const auto& m : llms)
      if (m.llm_id == id) return &m;
    return nullptr;
  }
};

// Canonical handle ordering shared by the feature table, the graph and the
// checkpoint: tasks and LLMs in log declaration order, queries in first
// appearance order over the records. exclude_llms drops LLMs (and their
// records' edges) without renumbering anything else.
struct LogVocab {
  std::vector<std::string> task_ids;
  std::vector<std::string> llm_ids;
  std::vector<std::string> query_ids;
  std::vector<std::string> query_texts;  // aligned with query_ids
  std::vector<int> query_task;           // task handle per query
  std::unordered_map<std::string, int> task_index;
  std::unordered_map<std::string, int> llm_index;
  std::unordered_map<std::string, int> query_index;

  static LogVocab from_log(const InteractionLog& log,
                           const std::vector<std::string>& exclude_llms = {}) {
    LogVocab v;
    for (const auto& t : log.tasks) {
      v.task_index.emplace(t.task_id, static_cast<int>(v.task_ids.size()));
      v.task_ids.push_back(t.task_id);
    }
    auto excluded = [&](const std::string& id) {
      for (const auto& e : exclude_llms)
        if (e == id) return true;
      return false;
    };
    for (const auto& m : log.llms) {
      if (excluded(m.llm_id)) continue;
      v.llm_index.emplace(m.llm_id, static_cast<int>(v.llm_ids.size()));
      v.llm_ids.push_back(m.llm_id);
    }
    for (const auto& r : log.records) {
      if (v.query_index.count(r.query_id)) continue;
      auto t = v.task_index.find(r.task_id);
      if (t == v.task_index.end())
        throw validation_error("record for query '" + r.query_id +
                               "' references unknown task '" + r.task_id + "'");
      v.query_index.emplace(r.query_id, static_cast<int>(v.query_ids.size()));
      v.query_ids.push_back(r.query_id);
      v.query_texts.push_back(r.query_text);
      v.query_task.push_back(t->second);
    }
    return v;
  }
};

}  // namespace graphrouter::data
