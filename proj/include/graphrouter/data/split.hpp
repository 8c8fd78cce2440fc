#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "graphrouter/common/error.hpp"
#include "graphrouter/common/rng.hpp"
#include "graphrouter/data/types.hpp"

namespace graphrouter::data {

namespace detail {

// Unique query ids sorted lexicographically, so the split depends only on
// the set of queries and the seed, not on record order.
inline std::vector<std::string> sorted_query_ids(const InteractionLog& log) {
  std::vector<std::string> ids;
  for (const auto& r : log.records) ids.push_back(r.query_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace detail

// Random query-level split with largest-remainder rounding of the ratios.
// Every record of a query lands in that query's split.
inline SplitAssignment split_standard(const InteractionLog& log,
                                      std::array<double, 3> ratios,
                                      std::uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw validation_error("split_standard: negative ratio");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw validation_error("split_standard: ratios must sum to 1, got " +
                           std::to_string(sum));
  std::vector<std::string> ids = detail::sorted_query_ids(log);
  const std::size_t n = ids.size();
  if (n < 3)
    throw validation_error("split_standard: need at least 3 queries, got " +
                           std::to_string(n));
  Rng rng(mix_seed(seed, "split"));
  rng.shuffle(ids);

  std::array<std::size_t, 3> counts{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = ratios[i] * double(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    frac[i] = exact - std::floor(exact);
    assigned += counts[i];
  }
  // Hand leftover slots to the largest fractional parts (ties to the
  // earlier split).
  while (assigned < n) {
    int pick = 0;
    for (int i = 1; i < 3; ++i)
      if (frac[i] > frac[pick]) pick = i;
    ++counts[pick];
    frac[pick] = -1.0;
    ++assigned;
  }

  SplitAssignment out;
  std::size_t at = 0;
  const std::array<Split, 3> kinds{Split::Train, Split::Val, Split::Test};
  for (int i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < counts[i]; ++k)
      out.by_query.emplace(ids[at++], kinds[static_cast<std::size_t>(i)]);
  return out;
}

// New-LLM setting: the query split is identical to split_standard with the
// same seed; held_out LLMs are hidden from training and later attach through
// aux_query_count sampled training queries.
inline SplitAssignment split_new_llm(const InteractionLog& log,
                                     std::vector<std::string> held_out,
                                     std::size_t aux_query_count,
                                     std::array<double, 3> ratios,
                                     std::uint64_t seed) {
  if (held_out.empty())
    throw validation_error("split_new_llm: no held-out LLMs given");
  for (const auto& id : held_out)
    if (!log.find_llm(id))
      throw validation_error("split_new_llm: held-out llm '" + id +
                             "' is not in the log");
  if (held_out.size() >= log.llms.size())
    throw validation_error(
        "split_new_llm: cannot hold out every LLM in the log");

  SplitAssignment out = split_standard(log, ratios, seed);
  std::vector<std::string> train_queries;
  for (const auto& [q, s] : out.by_query)
    if (s == Split::Train) train_queries.push_back(q);
  std::sort(train_queries.begin(), train_queries.end());
  if (aux_query_count > train_queries.size())
    throw validation_error(
        "split_new_llm: aux_query_count " + std::to_string(aux_query_count) +
        " exceeds the " + std::to_string(train_queries.size()) +
        " training queries");

  Rng rng(mix_seed(seed, "aux"));
  for (std::size_t i :
       rng.sample_without_replacement(train_queries.size(), aux_query_count))
    out.aux_query_ids.push_back(train_queries[i]);
  std::sort(out.aux_query_ids.begin(), out.aux_query_ids.end());
  out.held_out_llms = std::move(held_out);
  return out;
}

// Records a trained model may see: everything except train/val records of
// held-out LLMs. Test records stay intact for evaluation.
inline bool visible_in_training(const InteractionRecord& r,
                                const SplitAssignment& split) {
  if (!split.is_held_out(r.llm_id)) return true;
  return split.of(r.query_id) == Split::Test;
}

// The few-shot attachment set for one held-out LLM.
inline std::vector<InteractionRecord> aux_records_for(
    const InteractionLog& log, const SplitAssignment& split,
    const std::string& llm_id) {
  std::vector<InteractionRecord> out;
  for (const auto& r : log.records) {
    if (r.llm_id != llm_id) continue;
    for (const auto& q : split.aux_query_ids)
      if (q == r.query_id) {
        out.push_back(r);
        break;
      }
  }
  return out;
}

}  // namespace graphrouter::data
