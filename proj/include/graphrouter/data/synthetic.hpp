#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "graphrouter/common/error.hpp"
#include "graphrouter/common/rng.hpp"
#include "graphrouter/data/types.hpp"

// Synthetic interaction logs with planted structure. Each task has a few
// latent query classes; every (task, class) pair has a champion LLM whose
// performance is boosted well above the pack, and per-call cost follows the
// LLM's price times a class-dependent token count. Query texts carry the
// class vocabulary, so text embeddings can recover the class and a router
// can, in principle, hit the planted optimum.
namespace graphrouter::data {

struct SyntheticConfig {
  int n_tasks = 4;
  int n_llms = 10;
  int queries_per_task = 600;
  int classes_per_task = 3;
  double noise = 0.02;  // stddev of the gaussian performance jitter
};

// Noise-free ground truth behind a generated log, for oracle checks.
struct SyntheticTruth {
  SyntheticConfig config;
  // perf0[task][cls][llm] and cost0[task][cls][llm]
  std::vector<std::vector<std::vector<double>>> perf0;
  std::vector<std::vector<std::vector<double>>> cost0;
  std::vector<std::vector<int>> champion;  // [task][cls] -> llm handle
  std::unordered_map<std::string, int> query_class;

  int class_of(const std::string& query_id) const {
    auto it = query_class.find(query_id);
    if (it == query_class.end())
      throw validation_error("synthetic truth: unknown query '" + query_id +
                             "'");
    return it->second;
  }
};

struct SyntheticResult {
  InteractionLog log;
  SyntheticTruth truth;
};

namespace detail {

inline std::string padded(int value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%0*d", width, value);
  return buf;
}

// Distinct pronounceable pseudo-words.
inline std::vector<std::string> make_words(Rng& rng, std::size_t count) {
  static const char* kSyllables[] = {"ra",  "ven", "lo",  "mi",  "tak", "sor",
                                     "bel", "un",  "qi",  "zar", "del", "pho",
                                     "ner", "ug",  "ti",  "mos"};
  std::set<std::string> used;
  std::vector<std::string> out;
  while (out.size() < count) {
    std::string w;
    for (int s = 0; s < 3; ++s) w += kSyllables[rng.below(16)];
    if (used.insert(w).second) out.push_back(w);
  }
  return out;
}

}  // namespace detail

inline SyntheticResult generate_synthetic(const SyntheticConfig& cfg,
                                          std::uint64_t seed) {
  if (cfg.n_tasks < 1 || cfg.n_llms < 2 || cfg.classes_per_task < 1)
    throw validation_error(
        "generate_synthetic: need n_tasks >= 1, n_llms >= 2, "
        "classes_per_task >= 1");
  if (cfg.queries_per_task < cfg.classes_per_task)
    throw validation_error(
        "generate_synthetic: queries_per_task must be >= classes_per_task");
  if (cfg.noise < 0.0)
    throw validation_error("generate_synthetic: noise must be >= 0");

  const int T = cfg.n_tasks, M = cfg.n_llms, K = cfg.classes_per_task;
  Rng vocab_rng(mix_seed(seed, "syn.vocab"));
  Rng affinity_rng(mix_seed(seed, "syn.affinity"));
  Rng champion_rng(mix_seed(seed, "syn.champion"));
  Rng class_rng(mix_seed(seed, "syn.class"));
  Rng noise_rng(mix_seed(seed, "syn.noise"));

  // One topic word per task plus one per (task, class), then 12 shared
  // filler words.
  const auto words =
      detail::make_words(vocab_rng, std::size_t(T) * (1 + K) + 12);
  auto task_word = [&](int t) -> const std::string& {
    return words[t * (1 + K)];
  };
  auto class_word = [&](int t, int c) -> const std::string& {
    return words[t * (1 + K) + 1 + c];
  };
  const int filler_base = T * (1 + K);

  SyntheticResult out;
  SyntheticTruth& truth = out.truth;
  truth.config = cfg;

  // LLM pool: ascending size ladder with price roughly tracking size.
  std::vector<double> rate(M);
  for (int m = 0; m < M; ++m) {
    const int size_b = M == 1 ? 70 : 7 + (103 * m) / (M - 1);
    rate[m] = 0.1 + 0.9 * double(size_b) / 110.0;
    LlmInfo info;
    info.llm_id = "llm" + detail::padded(m, 2);
    info.name = "Synthetic LLM " + detail::padded(m, 2);
    info.size_label = std::to_string(size_b) + "b";
    info.cost_per_mtoken = rate[m];
    out.log.llms.push_back(std::move(info));
  }

  // Planted affinities: non-champions sit at base + jitter, capped at 0.65
  // by construction; the champion of each (task, class) draws from a band
  // strictly above that, so it is always the performance leader.
  truth.perf0.resize(T);
  truth.cost0.resize(T);
  truth.champion.resize(T);
  for (int t = 0; t < T; ++t) {
    std::vector<double> base(M);
    for (int m = 0; m < M; ++m) base[m] = affinity_rng.uniform(0.2, 0.55);
    truth.perf0[t].assign(K, std::vector<double>(M));
    truth.cost0[t].assign(K, std::vector<double>(M));
    truth.champion[t].assign(K, 0);
    for (int c = 0; c < K; ++c) {
      const int champ = int(champion_rng.below(M));
      truth.champion[t][c] = champ;
      const double champ_perf = affinity_rng.uniform(0.72, 0.90);
      const double tokens = 100.0 + 15.0 * t + 30.0 * c;
      for (int m = 0; m < M; ++m) {
        truth.perf0[t][c][m] =
            m == champ ? champ_perf
                       : std::clamp(base[m] + affinity_rng.uniform(-0.05, 0.10),
                                    0.02, 0.98);
        truth.cost0[t][c][m] = rate[m] * tokens / 1000.0;
      }
    }
  }

  // Tasks, with descriptions naming their class vocabulary.
  for (int t = 0; t < T; ++t) {
    TaskInfo info;
    info.task_id = "task" + detail::padded(t, 2);
    info.name = "Synthetic Task " + detail::padded(t, 2);
    info.metric_name = "score";
    info.description = "Synthetic task about " + task_word(t) + " prompts";
    for (int c = 0; c < K; ++c)
      info.description +=
          std::string(c ? ", " : " covering ") + class_word(t, c);
    info.description += ".";
    out.log.tasks.push_back(std::move(info));
  }

  // LLM descriptions advertise the classes an LLM champions, the way a real
  // model card lists strengths.
  for (int m = 0; m < M; ++m) {
    LlmInfo& info = out.log.llms[m];
    std::string strengths;
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < K; ++c)
        if (truth.champion[t][c] == m)
          strengths += (strengths.empty() ? "" : " ") + class_word(t, c);
    info.description = info.name + ", a " + info.size_label +
                       " synthetic model." +
                       (strengths.empty() ? " Generalist with broad coverage."
                                          : " Strong at " + strengths + ".");
  }

  // Queries and records, task-major then query then LLM.
  for (int t = 0; t < T; ++t) {
    const std::string& task_id = out.log.tasks[t].task_id;
    for (int i = 0; i < cfg.queries_per_task; ++i) {
      const int c = int(class_rng.below(K));
      const std::string query_id = task_id + "_q" + detail::padded(i, 4);
      truth.query_class.emplace(query_id, c);
      std::string text = query_id + " " + task_word(t);
      for (int rep = 0; rep < 3; ++rep) text += " " + class_word(t, c);
      for (int f = 0; f < 2; ++f)
        text += " " + words[filler_base + int(class_rng.below(12))];
      for (int m = 0; m < M; ++m) {
        InteractionRecord r;
        r.task_id = task_id;
        r.query_id = query_id;
        r.query_text = text;
        r.llm_id = out.log.llms[m].llm_id;
        r.performance =
            std::clamp(truth.perf0[t][c][m] + cfg.noise * noise_rng.normal(),
                       0.0, 1.0);
        r.cost = truth.cost0[t][c][m];
        out.log.records.push_back(std::move(r));
      }
    }
  }
  return out;
}

}  // namespace graphrouter::data
