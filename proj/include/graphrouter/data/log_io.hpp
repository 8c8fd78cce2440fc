#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "graphrouter/common/error.hpp"
#include "graphrouter/data/types.hpp"

// JSONL interaction logs. One object per line with a "kind" discriminator:
// task and llm lines declare entities, interaction lines carry outcomes.
// Lines may appear in any order; the canonical writer emits tasks, then
// LLMs, then interactions.
namespace graphrouter::data {

namespace detail {

inline std::string json_where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

}  // namespace detail

// Field extraction with location-tagged validation errors, shared by every
// JSON reader in the library.
inline const nlohmann::json& require_field(const nlohmann::json& j,
                                           const char* field,
                                           const std::string& where) {
  auto it = j.find(field);
  if (it == j.end())
    throw validation_error(where + ": missing field '" + std::string(field) +
                           "'");
  return *it;
}

inline std::string require_string(const nlohmann::json& j, const char* field,
                                  const std::string& where,
                                  bool allow_empty = false) {
  const nlohmann::json& v = require_field(j, field, where);
  if (!v.is_string())
    throw validation_error(where + ": field '" + std::string(field) +
                           "' must be a string");
  std::string s = v.get<std::string>();
  if (!allow_empty && s.empty())
    throw validation_error(where + ": field '" + std::string(field) +
                           "' must not be empty");
  return s;
}

inline double require_number(const nlohmann::json& j, const char* field,
                             const std::string& where) {
  const nlohmann::json& v = require_field(j, field, where);
  if (!v.is_number())
    throw validation_error(where + ": field '" + std::string(field) +
                           "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x))
    throw validation_error(where + ": field '" + std::string(field) +
                           "' must be finite");
  return x;
}

inline TaskInfo parse_task(const nlohmann::json& j, const std::string& where) {
  TaskInfo t;
  t.task_id = require_string(j, "task_id", where);
  t.name = require_string(j, "name", where);
  t.description = require_string(j, "description", where, true);
  t.metric_name = require_string(j, "metric_name", where);
  return t;
}

inline LlmInfo parse_llm(const nlohmann::json& j, const std::string& where) {
  LlmInfo m;
  m.llm_id = require_string(j, "llm_id", where);
  m.name = require_string(j, "name", where);
  m.size_label = require_string(j, "size_label", where);
  m.cost_per_mtoken = require_number(j, "cost_per_mtoken", where);
  if (m.cost_per_mtoken < 0.0)
    throw validation_error(where + ": cost_per_mtoken must be >= 0");
  m.description = require_string(j, "description", where, true);
  return m;
}

inline InteractionRecord parse_interaction(const nlohmann::json& j,
                                           const std::string& where) {
  InteractionRecord r;
  r.task_id = require_string(j, "task_id", where);
  r.query_id = require_string(j, "query_id", where);
  r.query_text = require_string(j, "query_text", where);
  r.llm_id = require_string(j, "llm_id", where);
  r.performance = require_number(j, "performance", where);
  r.cost = require_number(j, "cost", where);
  if (r.cost < 0.0) throw validation_error(where + ": cost must be >= 0");
  if (auto it = j.find("response_text"); it != j.end()) {
    if (!it->is_string())
      throw validation_error(where + ": field 'response_text' must be a string");
    r.response_text = it->get<std::string>();
  }
  return r;
}

inline nlohmann::json task_to_json(const TaskInfo& t) {
  return {{"kind", "task"},
          {"task_id", t.task_id},
          {"name", t.name},
          {"description", t.description},
          {"metric_name", t.metric_name}};
}

inline nlohmann::json llm_to_json(const LlmInfo& m) {
  return {{"kind", "llm"},
          {"llm_id", m.llm_id},
          {"name", m.name},
          {"size_label", m.size_label},
          {"cost_per_mtoken", m.cost_per_mtoken},
          {"description", m.description}};
}

inline nlohmann::json interaction_to_json(const InteractionRecord& r) {
  nlohmann::json j = {{"kind", "interaction"}, {"task_id", r.task_id},
                      {"query_id", r.query_id}, {"query_text", r.query_text},
                      {"llm_id", r.llm_id},     {"performance", r.performance},
                      {"cost", r.cost}};
  if (!r.response_text.empty()) j["response_text"] = r.response_text;
  return j;
}

// Cross-record checks run after every line has been read, so declaration
// order in the file does not matter.
inline void validate_log(const InteractionLog& log, const std::string& source) {
  std::set<std::string> task_ids, llm_ids;
  for (const auto& t : log.tasks)
    if (!task_ids.insert(t.task_id).second)
      throw validation_error(source + ": duplicate task_id '" + t.task_id +
                             "'");
  for (const auto& m : log.llms)
    if (!llm_ids.insert(m.llm_id).second)
      throw validation_error(source + ": duplicate llm_id '" + m.llm_id + "'");

  std::set<std::pair<std::string, std::string>> seen_pairs;
  std::set<std::string> dangling_tasks, dangling_llms;
  std::unordered_map<std::string, std::pair<std::string, std::string>>
      query_identity;  // query -> (task, text)
  for (const auto& r : log.records) {
    if (!task_ids.count(r.task_id)) dangling_tasks.insert(r.task_id);
    if (!llm_ids.count(r.llm_id)) dangling_llms.insert(r.llm_id);
    if (!seen_pairs.insert({r.query_id, r.llm_id}).second)
      throw validation_error(source + ": duplicate interaction for query '" +
                             r.query_id + "' and llm '" + r.llm_id + "'");
    auto [it, inserted] =
        query_identity.try_emplace(r.query_id, r.task_id, r.query_text);
    if (!inserted) {
      if (it->second.first != r.task_id)
        throw validation_error(source + ": query '" + r.query_id +
                               "' appears under tasks '" + it->second.first +
                               "' and '" + r.task_id + "'");
      if (it->second.second != r.query_text)
        throw validation_error(source + ": query '" + r.query_id +
                               "' has inconsistent query_text");
    }
  }
  auto join = [](const std::set<std::string>& ids) {
    std::string s;
    for (const auto& id : ids) {
      if (!s.empty()) s += ", ";
      s += "'" + id + "'";
    }
    return s;
  };
  if (!dangling_tasks.empty())
    throw validation_error(source + ": interactions reference unknown tasks " +
                           join(dangling_tasks));
  if (!dangling_llms.empty())
    throw validation_error(source + ": interactions reference unknown llms " +
                           join(dangling_llms));
}

inline InteractionLog parse_log_stream(std::istream& in,
                                       const std::string& source) {
  InteractionLog log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = detail::json_where(source, lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw validation_error(where + ": malformed JSON: " + e.what());
    }
    if (!j.is_object())
      throw validation_error(where + ": expected a JSON object");
    const std::string kind = require_string(j, "kind", where);
    if (kind == "task") {
      log.tasks.push_back(parse_task(j, where));
    } else if (kind == "llm") {
      log.llms.push_back(parse_llm(j, where));
    } else if (kind == "interaction") {
      log.records.push_back(parse_interaction(j, where));
    } else {
      throw validation_error(where + ": unknown kind '" + kind + "'");
    }
  }
  validate_log(log, source);
  return log;
}

inline InteractionLog ingest_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open log file '" + path.string() + "'");
  return parse_log_stream(in, path.filename().string());
}

// Canonical form: tasks, then LLMs, then interactions, keys sorted within
// each line. Writing the same log twice yields identical bytes.
inline void write_log(const std::filesystem::path& path,
                      const InteractionLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write log file '" + path.string() + "'");
  for (const auto& t : log.tasks) out << task_to_json(t).dump() << "\n";
  for (const auto& m : log.llms) out << llm_to_json(m).dump() << "\n";
  for (const auto& r : log.records)
    out << interaction_to_json(r).dump() << "\n";
  if (!out) throw io_error("failed writing log file '" + path.string() + "'");
}

}  // namespace graphrouter::data
