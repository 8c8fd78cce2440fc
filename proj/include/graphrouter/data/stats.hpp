#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "graphrouter/common/error.hpp"
#include "graphrouter/data/types.hpp"

// Descriptive statistics over a log: per-(task, llm) performance histograms
// and, for a chosen LLM pair, the probability that one beats the other by at
// least a margin. Useful for eyeballing whether a log has any routable
// signal before training on it.
namespace graphrouter::data {

struct StatsOptions {
  int histogram_bins = 20;
  // (a, b): tabulate P[perf_a - perf_b >= threshold] over shared queries.
  std::optional<std::pair<std::string, std::string>> superiority_pair;
  int superiority_steps = 81;  // thresholds spanning [-1, 1]
};

namespace detail {

inline std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

}  // namespace detail

// histograms.csv: performance histograms per (task, llm) over the global
// performance range of the log.
inline void write_histograms_csv(const InteractionLog& log,
                                 const std::filesystem::path& path,
                                 int bins) {
  if (bins < 1) throw validation_error("histograms: bins must be >= 1");
  if (log.records.empty())
    throw validation_error("histograms: log has no interaction records");
  double lo = log.records.front().performance, hi = lo;
  for (const auto& r : log.records) {
    lo = std::min(lo, r.performance);
    hi = std::max(hi, r.performance);
  }
  if (hi <= lo) hi = lo + 1.0;

  std::map<std::pair<std::string, std::string>, std::vector<long>> counts;
  for (const auto& t : log.tasks)
    for (const auto& m : log.llms)
      counts[{t.task_id, m.llm_id}].assign(bins, 0);
  const double width = (hi - lo) / bins;
  for (const auto& r : log.records) {
    int b = int((r.performance - lo) / width);
    b = std::clamp(b, 0, bins - 1);  // right edge joins the last bin
    counts[{r.task_id, r.llm_id}][b] += 1;
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  out << "task_id,llm_id,bin,lo,hi,count\n";
  for (const auto& [key, hist] : counts)
    for (int b = 0; b < bins; ++b)
      out << key.first << "," << key.second << "," << b << ","
          << detail::fmt_double(lo + b * width) << ","
          << detail::fmt_double(b + 1 == bins ? hi : lo + (b + 1) * width)
          << "," << hist[b] << "\n";
  if (!out) throw io_error("failed writing '" + path.string() + "'");
}

// superiority.csv: P[perf_a - perf_b >= threshold] across queries that have
// records under both LLMs.
inline void write_superiority_csv(const InteractionLog& log,
                                  const std::filesystem::path& path,
                                  const std::string& llm_a,
                                  const std::string& llm_b, int steps) {
  for (const auto& id : {llm_a, llm_b})
    if (!log.find_llm(id))
      throw validation_error("superiority: unknown llm '" + id + "'");
  if (steps < 2) throw validation_error("superiority: need >= 2 thresholds");

  std::map<std::string, double> perf_a, perf_b;
  for (const auto& r : log.records) {
    if (r.llm_id == llm_a) perf_a[r.query_id] = r.performance;
    if (r.llm_id == llm_b) perf_b[r.query_id] = r.performance;
  }
  std::vector<double> diffs;
  for (const auto& [q, pa] : perf_a) {
    auto it = perf_b.find(q);
    if (it != perf_b.end()) diffs.push_back(pa - it->second);
  }
  if (diffs.empty())
    throw validation_error("superiority: llms '" + llm_a + "' and '" + llm_b +
                           "' share no queries");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  out << "threshold,probability\n";
  for (int i = 0; i < steps; ++i) {
    const double t = -1.0 + 2.0 * i / (steps - 1);
    long hits = 0;
    for (double d : diffs)
      if (d >= t) ++hits;
    out << detail::fmt_double(t) << ","
        << detail::fmt_double(double(hits) / double(diffs.size())) << "\n";
  }
  if (!out) throw io_error("failed writing '" + path.string() + "'");
}

// Writes histograms.csv (always) and superiority.csv (when a pair is given)
// into out_dir.
inline void write_distribution_stats(const InteractionLog& log,
                                     const std::filesystem::path& out_dir,
                                     const StatsOptions& opts = {}) {
  std::filesystem::create_directories(out_dir);
  write_histograms_csv(log, out_dir / "histograms.csv", opts.histogram_bins);
  if (opts.superiority_pair)
    write_superiority_csv(log, out_dir / "superiority.csv",
                          opts.superiority_pair->first,
                          opts.superiority_pair->second,
                          opts.superiority_steps);
}

}  // namespace graphrouter::data
