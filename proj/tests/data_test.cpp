#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "graphrouter/data/bundle.hpp"
#include "graphrouter/data/log_io.hpp"
#include "graphrouter/data/reward.hpp"
#include "graphrouter/data/split.hpp"
#include "graphrouter/data/stats.hpp"
#include "graphrouter/data/synthetic.hpp"
#include "graphrouter/data/types.hpp"
#include "support/published.hpp"

using namespace graphrouter::data;
using graphrouter::Error;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("graphrouter_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

InteractionLog tiny_log() {
  std::istringstream in(R"({"kind":"task","task_id":"t1","name":"Task","description":"desc","metric_name":"score"}
{"kind":"llm","llm_id":"m1","name":"M1","size_label":"7b","cost_per_mtoken":0.2,"description":"small"}
{"kind":"interaction","task_id":"t1","query_id":"q1","query_text":"hello","llm_id":"m1","performance":0.7,"cost":0.01}
)");
  return parse_log_stream(in, "tiny");
}

// Standard split over a hand-built log with the given per-query splits.
SplitAssignment fixed_split(std::initializer_list<std::pair<const char*, Split>> items) {
  SplitAssignment s;
  for (const auto& [q, sp] : items) s.by_query.emplace(q, sp);
  return s;
}

InteractionRecord rec(const std::string& q, const std::string& m, double perf,
                      double cost, const std::string& task = "t1") {
  InteractionRecord r;
  r.task_id = task;
  r.query_id = q;
  r.query_text = "text of " + q;
  r.llm_id = m;
  r.performance = perf;
  r.cost = cost;
  return r;
}

}  // namespace

TEST(IngestTest, ThreeLineFile) {
  InteractionLog log = tiny_log();
  EXPECT_EQ(log.tasks.size(), 1u);
  EXPECT_EQ(log.llms.size(), 1u);
  EXPECT_EQ(log.records.size(), 1u);
  EXPECT_EQ(log.records[0].query_text, "hello");
  EXPECT_DOUBLE_EQ(log.records[0].performance, 0.7);
}

TEST(IngestTest, MalformedLineReportsLineNumber) {
  std::istringstream in(
      "{\"kind\":\"task\",\"task_id\":\"t1\",\"name\":\"T\",\"description\":"
      "\"d\",\"metric_name\":\"s\"}\nnot json\n");
  try {
    parse_log_stream(in, "log.jsonl");
    FAIL() << "expected parse error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("log.jsonl:2"), std::string::npos)
        << e.what();
  }
}

TEST(IngestTest, DanglingLlmNamesOffender) {
  std::istringstream in(R"({"kind":"task","task_id":"t1","name":"T","description":"d","metric_name":"s"}
{"kind":"interaction","task_id":"t1","query_id":"q1","query_text":"x","llm_id":"X","performance":0.5,"cost":0.1}
)");
  try {
    parse_log_stream(in, "log.jsonl");
    FAIL() << "expected referential integrity error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), Error::Kind::Validation);
    EXPECT_NE(std::string(e.what()).find("'X'"), std::string::npos) << e.what();
  }
}

TEST(IngestTest, DuplicatePairRejected) {
  std::istringstream in(R"({"kind":"task","task_id":"t1","name":"T","description":"d","metric_name":"s"}
{"kind":"llm","llm_id":"m1","name":"M","size_label":"7b","cost_per_mtoken":0.2,"description":"d"}
{"kind":"interaction","task_id":"t1","query_id":"q1","query_text":"x","llm_id":"m1","performance":0.5,"cost":0.1}
{"kind":"interaction","task_id":"t1","query_id":"q1","query_text":"x","llm_id":"m1","performance":0.6,"cost":0.1}
)");
  EXPECT_THROW(parse_log_stream(in, "log.jsonl"), Error);
}

TEST(IngestTest, InconsistentQueryTextRejected) {
  std::istringstream in(R"({"kind":"task","task_id":"t1","name":"T","description":"d","metric_name":"s"}
{"kind":"llm","llm_id":"m1","name":"M","size_label":"7b","cost_per_mtoken":0.2,"description":"d"}
{"kind":"llm","llm_id":"m2","name":"N","size_label":"8b","cost_per_mtoken":0.3,"description":"d"}
{"kind":"interaction","task_id":"t1","query_id":"q1","query_text":"x","llm_id":"m1","performance":0.5,"cost":0.1}
{"kind":"interaction","task_id":"t1","query_id":"q1","query_text":"y","llm_id":"m2","performance":0.6,"cost":0.1}
)");
  EXPECT_THROW(parse_log_stream(in, "log.jsonl"), Error);
}

TEST(IngestTest, UnknownKindRejected) {
  std::istringstream in("{\"kind\":\"mystery\"}\n");
  EXPECT_THROW(parse_log_stream(in, "log.jsonl"), Error);
}

TEST(IngestTest, WriteReadWriteIsByteIdentical) {
  const fs::path dir = temp_dir("log_roundtrip");
  SyntheticConfig cfg;
  cfg.n_tasks = 2;
  cfg.queries_per_task = 10;
  InteractionLog log = generate_synthetic(cfg, 7).log;
  write_log(dir / "a.jsonl", log);
  InteractionLog back = ingest_log(dir / "a.jsonl");
  write_log(dir / "b.jsonl", back);
  EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
  EXPECT_EQ(back.records.size(), log.records.size());
}

TEST(NormalizationTest, MinMaxExamples) {
  InteractionLog log;
  log.tasks.push_back({"t1", "T", "d", "s"});
  log.llms.push_back({"m1", "M", "7b", 0.2, "d"});
  log.llms.push_back({"m2", "M2", "8b", 0.3, "d"});
  log.llms.push_back({"m3", "M3", "9b", 0.4, "d"});
  log.records = {rec("q1", "m1", 2, 5), rec("q1", "m2", 4, 5),
                 rec("q1", "m3", 6, 5)};
  auto split = fixed_split({{"q1", Split::Train}});
  NormalizationParams p = fit_normalization(log, split);
  EXPECT_DOUBLE_EQ(normalize(2, MetricKind::Performance, p), 0.0);
  EXPECT_DOUBLE_EQ(normalize(4, MetricKind::Performance, p), 0.5);
  EXPECT_DOUBLE_EQ(normalize(6, MetricKind::Performance, p), 1.0);
  // Degenerate cost column maps to 0.5 everywhere.
  EXPECT_DOUBLE_EQ(normalize(5, MetricKind::Cost, p), 0.5);
  EXPECT_DOUBLE_EQ(normalize(99, MetricKind::Cost, p), 0.5);
  // Out-of-range values clamp.
  EXPECT_DOUBLE_EQ(normalize(7, MetricKind::Performance, p), 1.0);
  EXPECT_DOUBLE_EQ(normalize(-1, MetricKind::Performance, p), 0.0);
}

TEST(NormalizationTest, FitsOnTrainOnly) {
  InteractionLog log;
  log.tasks.push_back({"t1", "T", "d", "s"});
  log.llms.push_back({"m1", "M", "7b", 0.2, "d"});
  log.llms.push_back({"m2", "M2", "8b", 0.3, "d"});
  log.records = {rec("q1", "m1", 1, 1), rec("q1", "m2", 3, 2),
                 rec("q2", "m1", -50, 0.1), rec("q2", "m2", 50, 99)};
  auto split = fixed_split({{"q1", Split::Train}, {"q2", Split::Test}});
  NormalizationParams p = fit_normalization(log, split);
  EXPECT_DOUBLE_EQ(p.perf_min, 1.0);
  EXPECT_DOUBLE_EQ(p.perf_max, 3.0);
  EXPECT_DOUBLE_EQ(p.cost_min, 1.0);
  EXPECT_DOUBLE_EQ(p.cost_max, 2.0);
}

TEST(NormalizationTest, EmptyTrainSplitFails) {
  InteractionLog log;
  log.tasks.push_back({"t1", "T", "d", "s"});
  log.llms.push_back({"m1", "M", "7b", 0.2, "d"});
  log.records = {rec("q1", "m1", 1, 1)};
  auto split = fixed_split({{"q1", Split::Test}});
  EXPECT_THROW(fit_normalization(log, split), Error);
}

TEST(RewardTest, Formula) {
  EXPECT_NEAR(compute_reward(0.431, 0.871, ScenarioWeights::balance()), -0.220,
              5e-4);
  EXPECT_NEAR(compute_reward(0.411, 0.031, ScenarioWeights::cost_first()),
              0.057, 5e-4);
  EXPECT_DOUBLE_EQ(compute_reward(0.3, 0.3, ScenarioWeights::balance()), 0.0);
  EXPECT_DOUBLE_EQ(
      compute_reward(0.9, 0.4, ScenarioWeights::performance_first()), 0.9);
}

// Published-table audit: every row marked consistent reproduces its printed
// reward from its printed performance/cost; the three marked inconsistent
// genuinely miss the tolerance, so excluding them is not papering over a
// formula bug on our side.
TEST(RewardTest, PublishedCellAudit) {
  int consistent = 0, inconsistent = 0;
  for (const auto& cell : grtest::kPublishedCells) {
    const double computed = compute_reward(cell.performance, cell.cost,
                                           grtest::published_scenario(cell));
    const double residual = std::abs(computed - cell.reward);
    if (cell.consistent) {
      ++consistent;
      EXPECT_LE(residual, grtest::kPublishedTolerance)
          << cell.policy << " / " << cell.scenario;
    } else {
      ++inconsistent;
      EXPECT_GT(residual, grtest::kPublishedTolerance)
          << cell.policy << " / " << cell.scenario
          << " was listed as inconsistent but reproduces fine";
    }
  }
  EXPECT_EQ(consistent, 21);
  EXPECT_EQ(inconsistent, 3);
}

TEST(LabelTest, ArgmaxTieBreaksAndScenarios) {
  NormalizationParams norm{0.0, 1.0, 0.0, 1.0};
  {
    std::vector<InteractionRecord> rs = {rec("q1", "A", 0.9, 0.5),
                                         rec("q1", "B", 0.5, 0.5)};
    auto labels = best_llm_labels(rs, ScenarioWeights::performance_first(), norm);
    EXPECT_EQ(labels.at("q1"), "A");
  }
  {
    // Equal reward, lower raw cost wins.
    std::vector<InteractionRecord> rs = {rec("q1", "A", 0.7, 0.5),
                                         rec("q1", "B", 0.7, 0.1)};
    auto labels = best_llm_labels(rs, ScenarioWeights::performance_first(), norm);
    EXPECT_EQ(labels.at("q1"), "B");
  }
  {
    // Equal reward and cost, lexicographic id wins.
    std::vector<InteractionRecord> rs = {rec("q1", "B", 0.7, 0.2),
                                         rec("q1", "A", 0.7, 0.2)};
    auto labels = best_llm_labels(rs, ScenarioWeights::performance_first(), norm);
    EXPECT_EQ(labels.at("q1"), "A");
  }
}

TEST(LabelTest, PerformanceFirstIgnoresCost) {
  NormalizationParams norm{0.0, 1.0, 0.0, 1.0};
  std::vector<InteractionRecord> rs = {rec("q1", "A", 0.9, 0.99),
                                       rec("q1", "B", 0.8, 0.0),
                                       rec("q2", "A", 0.2, 0.5),
                                       rec("q2", "B", 0.3, 0.9)};
  auto labels = best_llm_labels(rs, ScenarioWeights::performance_first(), norm);
  EXPECT_EQ(labels.at("q1"), "A");
  EXPECT_EQ(labels.at("q2"), "B");
}

TEST(LabelTest, InvariantUnderRewardRescaling) {
  // Doubling (alpha, beta) scales every reward by 2; labels must not move.
  NormalizationParams norm{0.0, 1.0, 0.0, 1.0};
  std::vector<InteractionRecord> rs;
  graphrouter::Rng rng(graphrouter::mix_seed(11, "label.affine"));
  for (int q = 0; q < 20; ++q)
    for (int m = 0; m < 5; ++m)
      rs.push_back(rec("q" + std::to_string(q), "m" + std::to_string(m),
                       rng.uniform(), rng.uniform()));
  auto a = best_llm_labels(rs, ScenarioWeights::custom(0.5, 0.5), norm);
  auto b = best_llm_labels(rs, ScenarioWeights::custom(1.0, 1.0), norm);
  EXPECT_EQ(a, b);
}

TEST(SplitTest, StandardCountsAndDeterminism) {
  SyntheticConfig cfg;  // 4 tasks x 600 queries
  InteractionLog log = generate_synthetic(cfg, 3).log;
  SplitAssignment s = split_standard(log, {0.7, 0.1, 0.2}, 42);
  std::map<Split, int> counts;
  for (const auto& [q, sp] : s.by_query) counts[sp]++;
  EXPECT_EQ(counts[Split::Train], 1680);
  EXPECT_EQ(counts[Split::Val], 240);
  EXPECT_EQ(counts[Split::Test], 480);
  EXPECT_EQ(s.by_query.size(), 2400u);

  SplitAssignment again = split_standard(log, {0.7, 0.1, 0.2}, 42);
  EXPECT_EQ(s.by_query, again.by_query);
  SplitAssignment other = split_standard(log, {0.7, 0.1, 0.2}, 43);
  EXPECT_NE(s.by_query, other.by_query);

  // Query-wise split: with full coverage every LLM shows up in every split.
  std::map<Split, std::set<std::string>> llms_by_split;
  for (const auto& r : log.records)
    llms_by_split[s.of(r.query_id)].insert(r.llm_id);
  for (const auto& [sp, ids] : llms_by_split) EXPECT_EQ(ids.size(), 10u);
}

TEST(SplitTest, RejectsBadInput) {
  InteractionLog log = tiny_log();
  EXPECT_THROW(split_standard(log, {0.7, 0.1, 0.2}, 1), Error);  // 1 query
  SyntheticConfig cfg;
  cfg.n_tasks = 1;
  cfg.queries_per_task = 10;
  InteractionLog ok = generate_synthetic(cfg, 1).log;
  EXPECT_THROW(split_standard(ok, {0.7, 0.1, 0.1}, 1), Error);
  EXPECT_THROW(split_standard(ok, {1.2, -0.1, -0.1}, 1), Error);
}

TEST(SplitTest, NewLlmSetting) {
  SyntheticConfig cfg;
  InteractionLog log = generate_synthetic(cfg, 3).log;
  const std::vector<std::string> held{"llm06", "llm07", "llm08", "llm09"};
  SplitAssignment s = split_new_llm(log, held, 80, {0.7, 0.1, 0.2}, 42);
  SplitAssignment base = split_standard(log, {0.7, 0.1, 0.2}, 42);
  EXPECT_EQ(s.by_query, base.by_query);  // test split identical
  EXPECT_EQ(s.aux_query_ids.size(), 80u);
  EXPECT_TRUE(s.is_new_llm_setting());
  for (const auto& q : s.aux_query_ids) EXPECT_EQ(s.of(q), Split::Train);

  // Auxiliary records: one per held-out LLM per aux query, never test.
  for (const auto& m : held) {
    auto aux = aux_records_for(log, s, m);
    EXPECT_EQ(aux.size(), 80u);
    for (const auto& r : aux) {
      EXPECT_EQ(r.llm_id, m);
      EXPECT_NE(s.of(r.query_id), Split::Test);
    }
  }

  // Training visibility: held-out train/val records disappear, test stays.
  std::size_t visible = 0, held_test = 0;
  for (const auto& r : log.records) {
    if (visible_in_training(r, s)) ++visible;
    if (s.is_held_out(r.llm_id) && s.of(r.query_id) == Split::Test)
      ++held_test;
  }
  EXPECT_EQ(visible, 6u * 2400u + held_test);
  EXPECT_EQ(held_test, 4u * 480u);
}

TEST(SplitTest, NewLlmRejectsBadInput) {
  SyntheticConfig cfg;
  cfg.n_tasks = 1;
  cfg.queries_per_task = 20;
  cfg.n_llms = 3;
  InteractionLog log = generate_synthetic(cfg, 1).log;
  EXPECT_THROW(split_new_llm(log, {"nope"}, 5, {0.7, 0.1, 0.2}, 1), Error);
  EXPECT_THROW(split_new_llm(log, {}, 5, {0.7, 0.1, 0.2}, 1), Error);
  EXPECT_THROW(
      split_new_llm(log, {"llm00", "llm01", "llm02"}, 5, {0.7, 0.1, 0.2}, 1),
      Error);
  // 14 train queries at 70%, so 15 aux queries cannot be sampled.
  EXPECT_THROW(split_new_llm(log, {"llm02"}, 15, {0.7, 0.1, 0.2}, 1), Error);
}

TEST(SyntheticTest, DefaultCounts) {
  SyntheticConfig cfg;
  SyntheticResult out = generate_synthetic(cfg, 5);
  EXPECT_EQ(out.log.tasks.size(), 4u);
  EXPECT_EQ(out.log.llms.size(), 10u);
  EXPECT_EQ(out.log.records.size(), 24000u);
  EXPECT_EQ(out.truth.query_class.size(), 2400u);
}

TEST(SyntheticTest, ByteIdenticalRegeneration) {
  const fs::path dir = temp_dir("syn_regen");
  SyntheticConfig cfg;
  cfg.n_tasks = 2;
  cfg.queries_per_task = 30;
  write_log(dir / "a.jsonl", generate_synthetic(cfg, 9).log);
  write_log(dir / "b.jsonl", generate_synthetic(cfg, 9).log);
  EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
  write_log(dir / "c.jsonl", generate_synthetic(cfg, 10).log);
  EXPECT_NE(slurp(dir / "a.jsonl"), slurp(dir / "c.jsonl"));
}

TEST(SyntheticTest, NoiselessBestIsConstantPerClass) {
  SyntheticConfig cfg;
  cfg.noise = 0.0;
  cfg.queries_per_task = 60;
  SyntheticResult out = generate_synthetic(cfg, 21);
  // Group observed per-query argmax-performance by (task, class) and check
  // it never varies and matches the planted argmax.
  std::map<std::string, std::pair<double, std::string>> best_seen;
  for (const auto& r : out.log.records) {
    auto& b = best_seen[r.query_id];
    if (b.second.empty() || r.performance > b.first)
      b = {r.performance, r.llm_id};
  }
  for (const auto& [q, b] : best_seen) {
    int t = -1;
    for (std::size_t i = 0; i < out.log.tasks.size(); ++i)
      if (q.rfind(out.log.tasks[i].task_id + "_", 0) == 0)
        t = static_cast<int>(i);
    ASSERT_GE(t, 0);
    const int c = out.truth.class_of(q);
    const auto& p0 = out.truth.perf0[t][c];
    const int planted =
        int(std::max_element(p0.begin(), p0.end()) - p0.begin());
    EXPECT_EQ(b.second, out.log.llms[planted].llm_id) << q;
  }
}

TEST(SyntheticTest, ChampionHasTopPlantedPerformance) {
  SyntheticConfig cfg;
  SyntheticResult out = generate_synthetic(cfg, 33);
  for (int t = 0; t < cfg.n_tasks; ++t)
    for (int c = 0; c < cfg.classes_per_task; ++c) {
      const auto& p0 = out.truth.perf0[t][c];
      const int champ = out.truth.champion[t][c];
      for (int m = 0; m < cfg.n_llms; ++m)
        if (m != champ) EXPECT_GT(p0[champ], p0[m]);
    }
}

TEST(StatsTest, HistogramShapeAndStepCurve) {
  const fs::path dir = temp_dir("stats");
  SyntheticConfig cfg;
  cfg.n_tasks = 2;
  cfg.n_llms = 3;
  cfg.queries_per_task = 40;
  InteractionLog log = generate_synthetic(cfg, 2).log;
  StatsOptions opts;
  opts.superiority_pair = {{"llm00", "llm00"}};  // identical pair
  write_distribution_stats(log, dir, opts);

  // Header plus bins x tasks x llms rows.
  std::ifstream hist(dir / "histograms.csv");
  int lines = 0;
  std::string line;
  while (std::getline(hist, line)) ++lines;
  EXPECT_EQ(lines, 1 + 20 * 2 * 3);

  // perf_a - perf_b is identically zero: step function at t = 0.
  std::ifstream sup(dir / "superiority.csv");
  std::getline(sup, line);  // header
  while (std::getline(sup, line)) {
    const auto comma = line.find(',');
    const double t = std::stod(line.substr(0, comma));
    const double p = std::stod(line.substr(comma + 1));
    EXPECT_DOUBLE_EQ(p, t <= 0.0 ? 1.0 : 0.0) << line;
  }
}

TEST(StatsTest, NoiselessHistogramMassAtPlantedAffinities) {
  const fs::path dir = temp_dir("stats_planted");
  SyntheticConfig cfg;
  cfg.n_tasks = 1;
  cfg.n_llms = 2;
  cfg.queries_per_task = 50;
  cfg.noise = 0.0;
  SyntheticResult out = generate_synthetic(cfg, 4);
  write_distribution_stats(out.log, dir, {});

  // Every nonzero bin must contain at least one planted perf0 value.
  std::ifstream hist(dir / "histograms.csv");
  std::string line;
  std::getline(hist, line);
  while (std::getline(hist, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    ASSERT_EQ(f.size(), 6u);
    if (std::stol(f[5]) == 0) continue;
    const int m = f[1] == "llm00" ? 0 : 1;
    const double lo = std::stod(f[3]), hi = std::stod(f[4]);
    bool contains_planted = false;
    for (int c = 0; c < cfg.classes_per_task; ++c) {
      const double p0 = out.truth.perf0[0][c][m];
      if (p0 >= lo - 1e-9 && p0 <= hi + 1e-9) contains_planted = true;
    }
    EXPECT_TRUE(contains_planted) << line;
  }
}

TEST(StatsTest, UnknownPairRejected) {
  InteractionLog log = tiny_log();
  StatsOptions opts;
  opts.superiority_pair = {{"m1", "ghost"}};
  EXPECT_THROW(write_distribution_stats(log, temp_dir("stats_bad"), opts),
               Error);
}

TEST(VocabTest, OrderingAndExclusion) {
  SyntheticConfig cfg;
  cfg.n_tasks = 2;
  cfg.n_llms = 4;
  cfg.queries_per_task = 5;
  InteractionLog log = generate_synthetic(cfg, 6).log;
  LogVocab v = LogVocab::from_log(log);
  EXPECT_EQ(v.task_ids.size(), 2u);
  EXPECT_EQ(v.llm_ids.size(), 4u);
  EXPECT_EQ(v.query_ids.size(), 10u);
  EXPECT_EQ(v.query_task[0], 0);
  EXPECT_EQ(v.query_task[9], 1);

  LogVocab w = LogVocab::from_log(log, {"llm01", "llm03"});
  EXPECT_EQ(w.llm_ids.size(), 2u);
  EXPECT_EQ(w.llm_ids[0], "llm00");
  EXPECT_EQ(w.llm_ids[1], "llm02");
  EXPECT_EQ(w.llm_index.at("llm02"), 1);
  EXPECT_EQ(w.query_ids, v.query_ids);
}

TEST(BundleTest, RoundTripAndByteStability) {
  SyntheticConfig cfg;
  cfg.n_tasks = 2;
  cfg.n_llms = 4;
  cfg.queries_per_task = 20;
  InteractionLog log = generate_synthetic(cfg, 13).log;
  SplitAssignment split =
      split_new_llm(log, {"llm03"}, 5, {0.7, 0.1, 0.2}, 13);
  NormalizationParams norm = fit_normalization(log, split);

  const fs::path a = temp_dir("bundle_a");
  write_bundle(a, log, split, norm, {{"seed", 13}});
  for (const char* name :
       {"manifest.json", "log.jsonl", "splits.json", "normalization.json"})
    EXPECT_TRUE(fs::exists(a / name)) << name;

  DatasetBundle b = load_bundle(a);
  EXPECT_EQ(b.log.records.size(), log.records.size());
  EXPECT_EQ(b.split.by_query, split.by_query);
  EXPECT_EQ(b.split.held_out_llms, split.held_out_llms);
  EXPECT_EQ(b.split.aux_query_ids, split.aux_query_ids);
  EXPECT_EQ(b.norm.perf_min, norm.perf_min);
  EXPECT_EQ(b.norm.perf_max, norm.perf_max);
  EXPECT_EQ(b.norm.cost_min, norm.cost_min);
  EXPECT_EQ(b.norm.cost_max, norm.cost_max);
  EXPECT_EQ(b.meta.at("seed").get<int>(), 13);

  // Re-writing the loaded bundle reproduces every file byte for byte.
  const fs::path c = temp_dir("bundle_b");
  write_bundle(c, b.log, b.split, b.norm, b.meta);
  for (const char* name :
       {"manifest.json", "log.jsonl", "splits.json", "normalization.json"})
    EXPECT_EQ(slurp(a / name), slurp(c / name)) << name;
}

TEST(BundleTest, DetectsTamperingAndBadFormat) {
  SyntheticConfig cfg;
  cfg.n_tasks = 1;
  cfg.n_llms = 2;
  cfg.queries_per_task = 6;
  InteractionLog log = generate_synthetic(cfg, 3).log;
  SplitAssignment split = split_standard(log, {0.7, 0.1, 0.2}, 3);
  NormalizationParams norm = fit_normalization(log, split);

  const fs::path dir = temp_dir("bundle_tamper");
  write_bundle(dir, log, split, norm);

  // Flip one performance digit in the log without changing the file size.
  std::string bytes = slurp(dir / "log.jsonl");
  const auto at = bytes.find("\"performance\":0.");
  ASSERT_NE(at, std::string::npos);
  char& digit = bytes[at + 16];
  digit = digit == '9' ? '8' : '9';
  {
    std::ofstream out(dir / "log.jsonl", std::ios::binary | std::ios::trunc);
    out << bytes;
  }
  try {
    load_bundle(dir);
    FAIL() << "expected checksum error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
  }

  EXPECT_THROW(load_bundle(temp_dir("bundle_absent")), Error);

  const fs::path bad = temp_dir("bundle_badfmt");
  write_bundle(bad, log, split, norm);
  {
    std::ofstream out(bad / "manifest.json",
                      std::ios::binary | std::ios::trunc);
    out << R"({"format":"something-else","version":1})" << "\n";
  }
  EXPECT_THROW(load_bundle(bad), Error);
}

TEST(BundleTest, RejectsLogSplitMismatch) {
  SyntheticConfig cfg;
  cfg.n_tasks = 1;
  cfg.n_llms = 2;
  cfg.queries_per_task = 6;
  InteractionLog log = generate_synthetic(cfg, 4).log;
  SplitAssignment split = split_standard(log, {0.7, 0.1, 0.2}, 4);
  NormalizationParams norm = fit_normalization(log, split);
  const fs::path dir = temp_dir("bundle_mismatch");

  SplitAssignment missing = split;
  missing.by_query.erase(missing.by_query.begin());
  EXPECT_THROW(write_bundle(dir, log, missing, norm), Error);

  SplitAssignment stray = split;
  stray.by_query.emplace("ghost_q", Split::Train);
  EXPECT_THROW(write_bundle(dir, log, stray, norm), Error);

  SplitAssignment bad_aux = split;
  for (const auto& [q, s] : split.by_query)
    if (s == Split::Val) {
      bad_aux.aux_query_ids.push_back(q);
      break;
    }
  ASSERT_EQ(bad_aux.aux_query_ids.size(), 1u);
  EXPECT_THROW(write_bundle(dir, log, bad_aux, norm), Error);
}
