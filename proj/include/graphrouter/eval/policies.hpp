#pragma once

#include <cctype>
#include <string>
#include <unordered_map>
#include <vector>

#include "graphrouter/common/error.hpp"
#include "graphrouter/data/types.hpp"
#include "graphrouter/graph/hetero_graph.hpp"
#include "graphrouter/model/network.hpp"
#include "graphrouter/model/params.hpp"

namespace graphrouter::eval {

// Parameter count in billions from a size label: "7b", "70B", "0.5b" and
// mixture forms like "8x7b" (eight experts of seven billion each).
inline double parse_size_label(const std::string& label) {
  const auto bad = [&]() -> Error {
    return validation_error("cannot parse size label '" + label + "'");
  };
  if (label.empty()) throw bad();

  // Strip one trailing b/B; everything else must be digits, dots and at
  // most one x separator.
  std::string s = label;
  if (s.back() == 'b' || s.back() == 'B') s.pop_back();
  const auto x = s.find_first_of("xX");
  if (x != std::string::npos && s.find_first_of("xX", x + 1) != std::string::npos)
    throw bad();

  const auto to_number = [&](const std::string& part) {
    if (part.empty()) throw bad();
    for (char c : part)
      if (!std::isdigit(static_cast<unsigned char>(c)) && c != '.') throw bad();
    try {
      return std::stod(part);
    } catch (const std::exception&) {
      throw bad();
    }
  };
  const double v =
      x == std::string::npos
          ? to_number(s)
          : to_number(s.substr(0, x)) * to_number(s.substr(x + 1));
  if (v <= 0.0) throw bad();
  return v;
}

// A routing policy: one LLM handle per query. Policies answer from the
// graph's vocabulary, so every implementation competes on the same pool.
class Policy {
public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual std::vector<int> choose(const graph::HeteroGraph& g,
                                  const std::vector<int>& queries) const = 0;
};

namespace detail {

// Size ladder shared by the two fixed baselines. Ties break toward the
// lexicographically smaller llm_id so results never depend on pool order.
class SizeRankedPolicy : public Policy {
public:
  explicit SizeRankedPolicy(const data::InteractionLog& log) {
    for (const auto& m : log.llms)
      sizes_.emplace(m.llm_id, parse_size_label(m.size_label));
  }

  std::vector<int> choose(const graph::HeteroGraph& g,
                          const std::vector<int>& queries) const override {
    int pick = -1;
    double pick_size = 0.0;
    for (int m = 0; m < g.n_llms(); ++m) {
      const std::string& id = g.vocab.llm_ids[static_cast<std::size_t>(m)];
      auto it = sizes_.find(id);
      if (it == sizes_.end())
        throw validation_error(name() + ": llm '" + id +
                               "' has no known size");
      const bool better =
          pick < 0 || prefer(it->second, pick_size) ||
          (it->second == pick_size &&
           id < g.vocab.llm_ids[static_cast<std::size_t>(pick)]);
      if (better) {
        pick = m;
        pick_size = it->second;
      }
    }
    if (pick < 0) throw validation_error(name() + ": empty LLM pool");
    return std::vector<int>(queries.size(), pick);
  }

protected:
  virtual bool prefer(double candidate, double incumbent) const = 0;

private:
  std::unordered_map<std::string, double> sizes_;
};

}  // namespace detail

// Always the biggest model: the quality-no-matter-what habit.
class LargestLlmPolicy final : public detail::SizeRankedPolicy {
public:
  using SizeRankedPolicy::SizeRankedPolicy;
  std::string name() const override { return "Largest LLM"; }

protected:
  bool prefer(double candidate, double incumbent) const override {
    return candidate > incumbent;
  }
};

// Always the smallest model: the cheapest-possible habit.
class SmallestLlmPolicy final : public detail::SizeRankedPolicy {
public:
  using SizeRankedPolicy::SizeRankedPolicy;
  std::string name() const override { return "Smallest LLM"; }

protected:
  bool prefer(double candidate, double incumbent) const override {
    return candidate < incumbent;
  }
};

// Upper bound: reads the logged outcomes and picks the best edge per query.
class OraclePolicy final : public Policy {
public:
  std::string name() const override { return "Oracle"; }

  std::vector<int> choose(const graph::HeteroGraph& g,
                          const std::vector<int>& queries) const override {
    std::vector<int> out;
    out.reserve(queries.size());
    for (int q : queries) {
      const int m = g.best_llm(q);
      if (m < 0)
        throw validation_error(
            "Oracle: query '" +
            g.vocab.query_ids[static_cast<std::size_t>(q)] + "' has no edges");
      out.push_back(m);
    }
    return out;
  }
};

// The trained model, scored in one batched pass over the inference view.
class RouterPolicy final : public Policy {
public:
  explicit RouterPolicy(model::ModelParams params,
                        std::string name = "GraphRouter")
      : params_(std::move(params)), name_(std::move(name)) {}

  std::string name() const override { return name_; }

  std::vector<int> choose(const graph::HeteroGraph& g,
                          const std::vector<int>& queries) const override {
    const graph::CompiledGraph c =
        graph::GraphView::inference_view(g).compile();
    const auto preds = model::predict(params_, c, queries);
    std::vector<int> out;
    out.reserve(preds.size());
    for (const auto& p : preds) out.push_back(p.llm);
    return out;
  }

private:
  model::ModelParams params_;
  std::string name_;
};

}  // namespace graphrouter::eval
