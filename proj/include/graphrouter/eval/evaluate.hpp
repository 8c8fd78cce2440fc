#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "graphrouter/common/error.hpp"
#include "graphrouter/data/types.hpp"
#include "graphrouter/eval/policies.hpp"
#include "graphrouter/graph/hetero_graph.hpp"

namespace graphrouter::eval {

// Mean outcomes of one policy over an evaluation split. Performance and cost
// are on their raw logged scales; reward is on the scenario's normalized
// scale, comparable with the graph's oracle values.
struct PolicyResult {
  std::string policy;
  int queries = 0;
  double performance = 0.0;
  double cost = 0.0;
  double reward = 0.0;
};

// Scores a policy's choices against the logged outcomes. Routing to an LLM
// that was never logged for the query is an error: without an outcome there
// is nothing truthful to report.
inline PolicyResult score_policy(const graph::HeteroGraph& g,
                                 const Policy& policy,
                                 const std::vector<int>& queries) {
  if (queries.empty())
    throw validation_error("score_policy: no queries to evaluate");
  const std::vector<int> choices = policy.choose(g, queries);
  if (choices.size() != queries.size())
    throw validation_error("score_policy: policy '" + policy.name() +
                           "' returned " + std::to_string(choices.size()) +
                           " choices for " + std::to_string(queries.size()) +
                           " queries");
  PolicyResult r;
  r.policy = policy.name();
  r.queries = static_cast<int>(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const int q = queries[i];
    const int m = choices[i];
    const graph::MqEdge* e = g.find_edge(q, m);
    if (!e)
      throw validation_error(
          "score_policy: no logged outcome for query '" +
          g.vocab.query_ids[static_cast<std::size_t>(q)] + "' routed to '" +
          g.vocab.llm_ids[static_cast<std::size_t>(m)] + "'");
    r.performance += e->raw_performance;
    r.cost += e->raw_cost;
    r.reward += e->reward;
  }
  r.performance /= static_cast<double>(queries.size());
  r.cost /= static_cast<double>(queries.size());
  r.reward /= static_cast<double>(queries.size());
  return r;
}

inline std::vector<PolicyResult> evaluate_policies(
    const graph::HeteroGraph& g, const std::vector<const Policy*>& policies,
    data::Split split = data::Split::Test) {
  const std::vector<int> queries = g.queries_in(split);
  std::vector<PolicyResult> out;
  out.reserve(policies.size());
  for (const Policy* p : policies) {
    if (!p) throw validation_error("evaluate_policies: null policy");
    out.push_back(score_policy(g, *p, queries));
  }
  return out;
}

// Plain-text table, one row per policy.
inline std::string format_report(const std::vector<PolicyResult>& results,
                                 const std::string& scenario,
                                 const std::string& split_name) {
  std::size_t width = std::string("Router").size();
  for (const auto& r : results) width = std::max(width, r.policy.size());

  std::ostringstream out;
  out << "Scenario: " << scenario << "  (split: " << split_name << ", "
      << (results.empty() ? 0 : results.front().queries) << " queries)\n";
  out << std::left << std::setw(static_cast<int>(width)) << "Router"
      << "  Performance       Cost     Reward\n";
  out << std::string(width + 37, '-') << "\n";
  for (const auto& r : results) {
    char row[128];
    std::snprintf(row, sizeof(row), "%10.3f %10.4f %10.3f", r.performance,
                  r.cost, r.reward);
    out << std::left << std::setw(static_cast<int>(width)) << r.policy << row
        << "\n";
  }
  return out.str();
}

// Machine-readable companion of the text report. Deliberately carries no
// timing or environment columns; those go to a separate timings file so the
// CSV stays byte-reproducible across machines.
inline void write_results_csv(const std::filesystem::path& path,
                              const std::vector<PolicyResult>& results,
                              const std::string& scenario) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write results file '" + path.string() + "'");
  out << "policy,scenario,queries,performance,cost,reward\n";
  for (const auto& r : results) {
    char row[160];
    std::snprintf(row, sizeof(row), ",%d,%.6f,%.6f,%.6f", r.queries,
                  r.performance, r.cost, r.reward);
    out << r.policy << ',' << scenario << row << "\n";
  }
  if (!out)
    throw io_error("failed writing results file '" + path.string() + "'");
}

// One row of a published benchmark table: a policy's printed means under
// one scenario.
struct PublishedRow {
  std::string policy;
  std::string scenario;
  double performance = 0.0;
  double cost = 0.0;
  double reward = 0.0;
};

// Reads "policy,scenario,performance,cost,reward" CSV. Fields contain no
// commas or quoting; this is a data table, not a general CSV dialect.
inline std::vector<PublishedRow> load_published_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw io_error("cannot open published table '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  std::vector<PublishedRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 5)
      throw validation_error(path.filename().string() + ":" +
                             std::to_string(lineno) +
                             ": expected 5 comma-separated fields, got " +
                             std::to_string(fields.size()));
    if (lineno == 1) {
      if (fields[0] != "policy")
        throw validation_error(path.filename().string() +
                               ": missing header row");
      continue;
    }
    PublishedRow r;
    r.policy = fields[0];
    r.scenario = fields[1];
    try {
      r.performance = std::stod(fields[2]);
      r.cost = std::stod(fields[3]);
      r.reward = std::stod(fields[4]);
    } catch (const std::exception&) {
      throw validation_error(path.filename().string() + ":" +
                             std::to_string(lineno) + ": malformed number");
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty())
    throw validation_error(path.filename().string() + ": no data rows");
  return rows;
}

}  // namespace graphrouter::eval
