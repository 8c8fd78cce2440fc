// Release gate for the library. Nine independent checks cover the claims the
// project makes: reward arithmetic against the published benchmark rows,
// gradient correctness, planted-structure recovery at full desk scale,
// few-shot LLM insertion, oracle dominance, masking soundness, end-to-end
// determinism, serving behavior under concurrency, and trainability across
// the configuration sweep. Every test prints one line
//
//   [ACCEPTANCE] criterion N: PASS|FAIL
//
// followed by the reasons when it fails. The full-scale bundle and its
// trained router build once and are shared; the tests are declared in
// numeric order so the expensive fixture is paid for by criterion 3.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "graphrouter/common/http.hpp"
#include "graphrouter/common/rng.hpp"
#include "graphrouter/data/reward.hpp"
#include "graphrouter/data/split.hpp"
#include "graphrouter/data/synthetic.hpp"
#include "graphrouter/data/types.hpp"
#include "graphrouter/eval/evaluate.hpp"
#include "graphrouter/eval/policies.hpp"
#include "graphrouter/features/embedder.hpp"
#include "graphrouter/features/feature_table.hpp"
#include "graphrouter/graph/hetero_graph.hpp"
#include "graphrouter/model/network.hpp"
#include "graphrouter/serve/router.hpp"
#include "graphrouter/serve/service.hpp"
#include "graphrouter/train/trainer.hpp"

#include "support/published.hpp"

namespace {

namespace fs = std::filesystem;
using namespace graphrouter;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Collects failure reasons, prints the verdict line, and reports the result
// to the test. The line prints whether or not the test passes, so a log of a
// run always carries all nine verdicts.
class Criterion {
public:
  explicit Criterion(int n) : n_(n) {}

  void check(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }

  bool finish() {
    std::printf("[ACCEPTANCE] criterion %d: %s\n", n_,
                failures_.empty() ? "PASS" : "FAIL");
    for (const auto& f : failures_) std::printf("  - %s\n", f.c_str());
    std::fflush(stdout);
    return failures_.empty();
  }

private:
  int n_;
  std::vector<std::string> failures_;
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared full-scale fixture: the 4-task, 10-LLM, 600-queries-per-task bundle
// and a router trained on it under the balance scenario. The training
// schedule keeps the §-scale architecture (hidden 32, two layers) but uses a
// large batch and a fixed 80-epoch horizon so the whole build stays within a
// few minutes on one core.

train::TrainConfig scale_config() {
  train::TrainConfig cfg;
  cfg.hidden = 32;
  cfg.layers = 2;
  cfg.batch_size = 256;
  cfg.max_epochs = 80;
  cfg.base_lr = 3e-3;
  cfg.patience = 80;
  cfg.seed = 1;
  return cfg;
}

struct ScaleFixture {
  data::InteractionLog log;
  data::SplitAssignment split;
  data::NormalizationParams norm;
  data::LogVocab vocab;
  std::shared_ptr<const features::Embedder> embedder;
  graph::HeteroGraph g;
  model::ModelParams params;  // trained on all ten LLMs
  double train_seconds = 0.0;
  double reward_router = 0.0;
  double reward_oracle = 0.0;
  double reward_largest = 0.0;
  double reward_smallest = 0.0;
};

const ScaleFixture& scale() {
  static const ScaleFixture fixture = [] {
    ScaleFixture f;
    data::SyntheticConfig cfg;
    cfg.n_tasks = 4;
    cfg.n_llms = 10;
    cfg.queries_per_task = 600;
    f.log = data::generate_synthetic(cfg, 0).log;
    f.split = data::split_standard(f.log, {0.7, 0.1, 0.2}, 0);
    f.norm = data::fit_normalization(f.log, f.split);
    f.vocab = data::LogVocab::from_log(f.log);
    f.embedder = std::make_shared<features::HashEmbedder>(64, 0);
    const auto table = features::build_feature_table(f.log, f.vocab, f.norm,
                                                     *f.embedder, {});
    f.g = graph::build_graph(f.vocab, table, f.split,
                             data::ScenarioWeights::balance());

    const auto t0 = Clock::now();
    f.params = train::train(f.g, scale_config()).params;
    f.train_seconds = seconds_since(t0);

    const eval::LargestLlmPolicy largest(f.log);
    const eval::SmallestLlmPolicy smallest(f.log);
    const eval::RouterPolicy router(f.params);
    const eval::OraclePolicy oracle;
    const auto results = eval::evaluate_policies(
        f.g, {&largest, &smallest, &router, &oracle}, data::Split::Test);
    f.reward_largest = results[0].reward;
    f.reward_smallest = results[1].reward;
    f.reward_router = results[2].reward;
    f.reward_oracle = results[3].reward;
    return f;
  }();
  return fixture;
}

// ---------------------------------------------------------------------------
// Criterion 1: published reward arithmetic

TEST(Acceptance, Criterion1PublishedRewardArithmetic) {
  Criterion c(1);
  int consistent = 0;
  std::set<std::pair<std::string, std::string>> excluded;
  for (const auto& cell : grtest::kPublishedCells) {
    const auto w = grtest::published_scenario(cell);
    const double computed =
        data::compute_reward(cell.performance, cell.cost, w);
    const double residual = std::abs(computed - cell.reward);
    if (cell.consistent) {
      ++consistent;
      c.check(residual <= grtest::kPublishedTolerance,
              std::string(cell.policy) + " / " + cell.scenario +
                  ": printed " + fmt("%.3f", cell.reward) + ", computed " +
                  fmt("%.4f", computed) + ", residual " +
                  fmt("%.4f", residual));
    } else {
      excluded.insert({cell.policy, cell.scenario});
      std::printf(
          "  excluded cell %s / %s: printed %.3f, computed %.4f, "
          "residual %.4f\n",
          cell.policy, cell.scenario, cell.reward, computed, residual);
      c.check(residual > grtest::kPublishedTolerance,
              std::string("cell ") + cell.policy + " / " + cell.scenario +
                  " is marked inconsistent but matches the arithmetic");
    }
  }
  c.check(consistent == 21, "expected 21 consistent cells, found " +
                                std::to_string(consistent));
  const std::set<std::pair<std::string, std::string>> expected_excluded{
      {"Largest LLM", "cost-first"},
      {"Smallest LLM", "cost-first"},
      {"Oracle", "balance"}};
  c.check(excluded == expected_excluded,
          "the excluded-cell set changed; the documentation is stale");
  EXPECT_TRUE(c.finish());
}

// ---------------------------------------------------------------------------
// Criterion 2: end-to-end gradients vs central finite differences

double toy_loss(const model::ModelParams& p, const graph::CompiledGraph& c,
                const std::vector<int>& batch,
                const std::vector<int>& labels) {
  numerics::Tape tape;
  model::ModelIds ids = model::register_params(tape, p, false);
  return tape
      .value(model::batch_forward(tape, p.dims, ids, c, batch, labels).loss)
      .value();
}

TEST(Acceptance, Criterion2GradientsMatchFiniteDifferences) {
  Criterion c(2);
  try {
    data::InteractionLog log;
    log.tasks = {{"t1", "Task", "a toy task", "acc"}};
    log.llms = {{"A", "A", "70b", 4.0, "the large model"},
                {"B", "B", "7b", 0.5, "the small model"}};
    log.records = {
        {"t1", "q1", "first toy query", "A", 0.9, 0.8, ""},
        {"t1", "q1", "first toy query", "B", 0.5, 0.1, ""},
        {"t1", "q2", "second toy query", "A", 0.7, 0.9, ""},
        {"t1", "q2", "second toy query", "B", 0.6, 0.2, ""},
        {"t1", "q3", "third toy query", "A", 0.8, 0.7, ""},
        {"t1", "q3", "third toy query", "B", 0.3, 0.3, ""},
    };
    data::SplitAssignment split;
    for (const char* q : {"q1", "q2", "q3"})
      split.by_query[q] = data::Split::Train;
    const auto norm = data::fit_normalization(log, split);
    const auto vocab = data::LogVocab::from_log(log);
    const features::HashEmbedder emb(6, 0);
    const auto table =
        features::build_feature_table(log, vocab, norm, emb, {});
    const auto g = graph::build_graph(vocab, table, split,
                                      data::ScenarioWeights::balance());

    const std::vector<int> batch = {0};
    const std::vector<int> labels = {g.best_llm(0)};
    const auto compiled = graph::GraphView::training_view(g, batch).compile();

    const double h = 1e-5;
    const double tol = 1e-3;
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
      model::ModelParams p = model::ModelParams::init({6, 4, 2}, seed);
      numerics::Tape tape;
      model::ModelIds ids = model::register_params(tape, p);
      const auto fwd =
          model::batch_forward(tape, p.dims, ids, compiled, batch, labels);
      const auto grads = tape.backward(fwd.loss);

      const auto tensors = p.tensors();
      double worst = 0.0;
      for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
        for (std::int64_t i = 0; i < tensors[ti]->numel(); ++i) {
          const double saved = tensors[ti]->at(i);
          tensors[ti]->at(i) = saved + h;
          const double up = toy_loss(p, compiled, batch, labels);
          tensors[ti]->at(i) = saved - h;
          const double down = toy_loss(p, compiled, batch, labels);
          tensors[ti]->at(i) = saved;
          const double fd = (up - down) / (2 * h);
          const double an = grads.param_grads[ti].at(i);
          const double err = std::abs(fd - an) /
                             std::max({std::abs(fd), std::abs(an), 1e-2});
          worst = std::max(worst, err);
        }
      }
      c.check(worst < tol, "seed " + std::to_string(seed) +
                               ": max relative error " + fmt("%.2e", worst));
    }
  } catch (const std::exception& e) {
    c.check(false, std::string("exception: ") + e.what());
  }
  EXPECT_TRUE(c.finish());
}

// ---------------------------------------------------------------------------
// Criterion 3: planted structure recovered at full scale

TEST(Acceptance, Criterion3PlantedStructureEndToEnd) {
  Criterion c(3);
  try {
    const auto t0 = Clock::now();
    const ScaleFixture& f = scale();
    const double elapsed = seconds_since(t0);
    std::printf(
        "  rewards: router %.4f, oracle %.4f, largest %.4f, smallest %.4f "
        "(train %.1fs, total %.1fs)\n",
        f.reward_router, f.reward_oracle, f.reward_largest, f.reward_smallest,
        f.train_seconds, elapsed);
    c.check(f.reward_router >= 0.90 * f.reward_oracle,
            "router reward " + fmt("%.4f", f.reward_router) +
                " is below 0.90 * oracle " +
                fmt("%.4f", 0.90 * f.reward_oracle));
    c.check(f.reward_router > f.reward_largest,
            "router does not beat the largest-LLM baseline");
    c.check(f.reward_router > f.reward_smallest,
            "router does not beat the smallest-LLM baseline");
    c.check(elapsed < 300.0,
            "fixture took " + fmt("%.1f", elapsed) + "s, budget is 300s");
  } catch (const std::exception& e) {
    c.check(false, std::string("exception: ") + e.what());
  }
  EXPECT_TRUE(c.finish());
}

// ---------------------------------------------------------------------------
// Criterion 4: few-shot insertion of held-out LLMs

TEST(Acceptance, Criterion4FewShotInsertion) {
  Criterion c(4);
  try {
    const ScaleFixture& f = scale();
    const std::vector<std::string> held{"llm06", "llm07", "llm08", "llm09"};
    const auto split_held =
        data::split_new_llm(f.log, held, 80, {0.7, 0.1, 0.2}, 0);
    const auto norm_held = data::fit_normalization(f.log, split_held);
    const auto vocab_held = data::LogVocab::from_log(f.log, held);
    const auto table_held = features::build_feature_table(
        f.log, vocab_held, norm_held, *f.embedder, {});
    const auto g_held = graph::build_graph(vocab_held, table_held, split_held,
                                           data::ScenarioWeights::balance());

    const auto t0 = Clock::now();
    const auto trained = train::train(g_held, scale_config());
    const double train_secs = seconds_since(t0);

    // Insert the four held-out LLMs from their descriptions plus the 80
    // auxiliary observations each; no gradient steps happen here.
    auto view = graph::GraphView::inference_view(g_held);
    const auto t1 = Clock::now();
    for (const auto& id : held) {
      const data::LlmInfo* info = f.log.find_llm(id);
      c.check(info != nullptr, "llm '" + id + "' missing from the log");
      if (!info) continue;
      const auto aux = data::aux_records_for(f.log, split_held, id);
      c.check(aux.size() == 80, "llm '" + id + "' has " +
                                    std::to_string(aux.size()) +
                                    " aux records, expected 80");
      std::vector<graph::GraphView::ExtraEdge> edges;
      for (const auto& r : aux)
        edges.push_back(
            {vocab_held.query_index.at(r.query_id),
             data::normalize(r.performance, data::MetricKind::Performance,
                             norm_held),
             data::normalize(r.cost, data::MetricKind::Cost, norm_held)});
      view.attach_llm(id,
                      f.embedder->embed(features::llm_embedding_text(*info, {})),
                      std::move(edges));
    }
    const auto compiled = view.compile();
    const double attach_secs = seconds_since(t1);

    // Score the few-shot router's choices on the same reward scale as the
    // all-ten model so the two numbers are comparable.
    std::unordered_map<std::string, double> reward_by_pair;
    for (const auto& e : f.g.edges)
      reward_by_pair[f.g.vocab.query_ids[e.query] + '\x1f' +
                     f.g.vocab.llm_ids[e.llm]] = e.reward;
    const auto test_q = g_held.queries_in(data::Split::Test);
    const auto preds = model::predict(trained.params, compiled, test_q);
    double few_shot = 0.0;
    for (std::size_t i = 0; i < test_q.size(); ++i) {
      const std::string key =
          vocab_held.query_ids[test_q[i]] + '\x1f' +
          compiled.llm_ids[static_cast<std::size_t>(preds[i].llm)];
      const auto it = reward_by_pair.find(key);
      c.check(it != reward_by_pair.end(), "no logged outcome for " + key);
      if (it != reward_by_pair.end()) few_shot += it->second;
    }
    few_shot /= static_cast<double>(test_q.size());

    int routed_to_new = 0;
    for (const auto& p : preds)
      if (p.llm >= g_held.n_llms()) ++routed_to_new;
    std::printf(
        "  few-shot reward %.4f vs all-ten %.4f; insertion %.3fs vs "
        "training %.1fs; %d/%zu queries routed to inserted LLMs\n",
        few_shot, f.reward_router, attach_secs, f.train_seconds,
        routed_to_new, preds.size());

    c.check(few_shot >= 0.90 * f.reward_router,
            "few-shot reward " + fmt("%.4f", few_shot) +
                " is below 0.90 * all-ten reward " +
                fmt("%.4f", 0.90 * f.reward_router));
    c.check(attach_secs < 0.01 * f.train_seconds,
            "insertion took " + fmt("%.3f", attach_secs) +
                "s, not under 1% of training time " +
                fmt("%.1f", f.train_seconds) + "s");
    c.check(train_secs < 300.0, "held-out training took " +
                                    fmt("%.1f", train_secs) +
                                    "s, budget is 300s");
  } catch (const std::exception& e) {
    c.check(false, std::string("exception: ") + e.what());
  }
  EXPECT_TRUE(c.finish());
}

// ---------------------------------------------------------------------------
// Criterion 5: oracle dominance over every policy

TEST(Acceptance, Criterion5OracleDominance) {
  Criterion c(5);

  struct FixedPolicy final : eval::Policy {
    int llm;
    explicit FixedPolicy(int m) : llm(m) {}
    std::string name() const override {
      return "fixed-" + std::to_string(llm);
    }
    std::vector<int> choose(const graph::HeteroGraph&,
                            const std::vector<int>& queries) const override {
      return std::vector<int>(queries.size(), llm);
    }
  };

  try {
    for (std::uint64_t s = 0; s < 20; ++s) {
      data::SyntheticConfig cfg;
      cfg.n_tasks = 1 + static_cast<int>(s % 3);
      cfg.n_llms = 2 + static_cast<int>(s % 4);
      cfg.queries_per_task = 12 + static_cast<int>(s % 5);
      cfg.classes_per_task = 1 + static_cast<int>(s % 3);
      cfg.noise = 0.05;
      const auto log = data::generate_synthetic(cfg, s).log;
      const auto split = data::split_standard(log, {0.7, 0.1, 0.2}, s);
      const auto norm = data::fit_normalization(log, split);
      const auto vocab = data::LogVocab::from_log(log);
      const features::HashEmbedder emb(16, s);
      const auto table =
          features::build_feature_table(log, vocab, norm, emb, {});
      for (const auto& w : {data::ScenarioWeights::performance_first(),
                            data::ScenarioWeights::balance(),
                            data::ScenarioWeights::cost_first()}) {
        const auto g = graph::build_graph(vocab, table, split, w);
        const auto queries = g.queries_in(data::Split::Test);
        const eval::OraclePolicy oracle;
        const double best = eval::score_policy(g, oracle, queries).reward;

        std::vector<std::unique_ptr<eval::Policy>> policies;
        for (int m = 0; m < g.n_llms(); ++m)
          policies.push_back(std::make_unique<FixedPolicy>(m));
        policies.push_back(std::make_unique<eval::RouterPolicy>(
            model::ModelParams::init({16, 8, 2}, s), "untrained"));
        for (const auto& p : policies) {
          const double r = eval::score_policy(g, *p, queries).reward;
          c.check(best >= r, "bundle seed " + std::to_string(s) + ", " +
                                 w.label() + ": policy " + p->name() +
                                 " reward " + fmt("%.4f", r) +
                                 " exceeds oracle " + fmt("%.4f", best));
        }
      }
    }
  } catch (const std::exception& e) {
    c.check(false, std::string("exception: ") + e.what());
  }
  EXPECT_TRUE(c.finish());
}

// ---------------------------------------------------------------------------
// Criterion 6: masked edges cannot influence loss or test predictions

TEST(Acceptance, Criterion6MaskSoundness) {
  Criterion c(6);
  try {
    data::SyntheticConfig cfg;
    cfg.n_tasks = 2;
    cfg.n_llms = 4;
    cfg.queries_per_task = 30;
    const auto log = data::generate_synthetic(cfg, 11).log;
    const auto split = data::split_standard(log, {0.7, 0.1, 0.2}, 11);
    const auto norm = data::fit_normalization(log, split);
    const auto vocab = data::LogVocab::from_log(log);
    const features::HashEmbedder emb(16, 0);
    const auto table =
        features::build_feature_table(log, vocab, norm, emb, {});
    const auto g = graph::build_graph(vocab, table, split,
                                      data::ScenarioWeights::balance());
    const model::ModelParams params = model::ModelParams::init({16, 8, 2}, 3);

    const auto train_q = g.queries_in(data::Split::Train);
    const std::vector<int> batch(train_q.begin(), train_q.begin() + 6);
    std::vector<int> labels;
    for (int q : batch) labels.push_back(g.best_llm(q));
    const std::set<int> in_batch(batch.begin(), batch.end());

    const auto base_train =
        graph::GraphView::training_view(g, batch).compile();
    const double base_loss = toy_loss(params, base_train, batch, labels);
    const auto test_q = g.queries_in(data::Split::Test);
    const auto base_preds = model::predict(
        params, graph::GraphView::inference_view(g).compile(), test_q);

    // Pool of edges masked for this batch's training step. The non-train
    // ones are also invisible at inference time.
    std::vector<int> masked;
    for (std::size_t e = 0; e < g.edges.size(); ++e)
      if (g.query_split[g.edges[e].query] != data::Split::Train ||
          in_batch.count(g.edges[e].query))
        masked.push_back(static_cast<int>(e));
    c.check(!masked.empty(), "no masked edges to perturb");

    Rng rng(mix_seed(2024, "mask-probe"));
    int loss_checks = 0, pred_checks = 0;
    for (int trial = 0; trial < 50 && !masked.empty(); ++trial) {
      const int e = masked[rng.below(masked.size())];
      graph::HeteroGraph perturbed = g;
      perturbed.edges[e].perf_norm = rng.uniform(-100.0, 100.0);
      perturbed.edges[e].cost_norm = rng.uniform(-100.0, 100.0);

      const auto c_train =
          graph::GraphView::training_view(perturbed, batch).compile();
      const double loss = toy_loss(params, c_train, batch, labels);
      c.check(std::memcmp(&loss, &base_loss, sizeof loss) == 0,
              "trial " + std::to_string(trial) +
                  ": batch loss changed after perturbing masked edge " +
                  std::to_string(e));
      ++loss_checks;

      if (perturbed.query_split[perturbed.edges[e].query] !=
          data::Split::Train) {
        const auto preds = model::predict(
            params, graph::GraphView::inference_view(perturbed).compile(),
            test_q);
        bool same = preds.size() == base_preds.size();
        for (std::size_t i = 0; same && i < preds.size(); ++i)
          same = preds[i].llm == base_preds[i].llm &&
                 std::memcmp(preds[i].logits.data(),
                             base_preds[i].logits.data(),
                             preds[i].logits.size() * sizeof(double)) == 0;
        c.check(same, "trial " + std::to_string(trial) +
                          ": test predictions changed after perturbing "
                          "non-train edge " +
                          std::to_string(e));
        ++pred_checks;
      }
    }
    c.check(loss_checks == 50, "expected 50 loss checks, ran " +
                                   std::to_string(loss_checks));
    c.check(pred_checks > 0, "no perturbation hit a non-train edge");
  } catch (const std::exception& e) {
    c.check(false, std::string("exception: ") + e.what());
  }
  EXPECT_TRUE(c.finish());
}

// ---------------------------------------------------------------------------
// Criterion 7: byte-identical artifacts across repeated runs

struct CmdResult {
  int status = -1;
  std::string out;
};

CmdResult run_cli(const std::string& args) {
  const std::string cmd = std::string(GR_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  CmdResult r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int rc = pclose(pipe);
  r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Acceptance, Criterion7Determinism) {
  Criterion c(7);
  try {
    const fs::path root = fs::temp_directory_path() / "graphrouter_accept_det";
    fs::remove_all(root);
    std::array<std::string, 2> eval_out;
    for (int run = 0; run < 2; ++run) {
      const fs::path dir = root / ("run" + std::to_string(run));
      fs::create_directories(dir);
      const std::string bundle = (dir / "bundle").string();
      const std::string ckpt = (dir / "model.ckpt").string();
      auto prep = run_cli(
          "prepare --out " + bundle +
          " --synthetic --tasks 4 --llms 10 --queries-per-task 600 --seed 0");
      c.check(prep.status == 0, "prepare failed: " + prep.out);
      auto train = run_cli("train --data " + bundle + " --out " + ckpt +
                           " --scenario balance --epochs 80 --patience 80"
                           " --batch-size 256 --lr 3e-3 --seed 1 --quiet");
      c.check(train.status == 0, "train failed: " + train.out);
      auto ev = run_cli("eval --data " + bundle + " --checkpoint " + ckpt +
                        " --out-csv " + (dir / "results.csv").string());
      c.check(ev.status == 0, "eval failed: " + ev.out);
      eval_out[run] = ev.out;
    }
    for (const char* f : {"bundle/manifest.json", "bundle/log.jsonl",
                          "bundle/splits.json", "bundle/normalization.json",
                          "model.ckpt", "results.csv"}) {
      const std::string a = slurp(root / "run0" / f);
      const std::string b = slurp(root / "run1" / f);
      c.check(!a.empty(), std::string(f) + " is empty or unreadable");
      c.check(a == b, std::string(f) + " differs between identical runs");
    }
    c.check(eval_out[0] == eval_out[1],
            "eval report text differs between identical runs");
    fs::remove_all(root);
  } catch (const std::exception& e) {
    c.check(false, std::string("exception: ") + e.what());
  }
  EXPECT_TRUE(c.finish());
}

// ---------------------------------------------------------------------------
// Criterion 8: serving under concurrency

TEST(Acceptance, Criterion8ServingConcurrency) {
  Criterion c(8);
  try {
    data::SyntheticConfig cfg;
    cfg.n_tasks = 2;
    cfg.n_llms = 4;
    cfg.queries_per_task = 40;
    const auto log = data::generate_synthetic(cfg, 7).log;
    const auto split = data::split_standard(log, {0.7, 0.1, 0.2}, 7);
    const auto norm = data::fit_normalization(log, split);
    const auto vocab = data::LogVocab::from_log(log);
    auto embedder = std::make_shared<features::HashEmbedder>(32, 0);
    const auto table =
        features::build_feature_table(log, vocab, norm, *embedder, {});
    auto graph = std::make_shared<const graph::HeteroGraph>(
        graph::build_graph(vocab, table, split,
                           data::ScenarioWeights::balance()));
    auto snapshot = std::make_shared<const serve::RouterSnapshot>(
        model::ModelParams::init({32, 16, 2}, 5), graph, norm, embedder);

    serve::RoutingService service(snapshot);
    const int port = service.bind_any_port("127.0.0.1");
    std::thread server([&] { service.listen_after_bind(); });
    service.wait_until_ready();

    const json route_body = {{"task_id", vocab.task_ids[0]},
                             {"query_text", "a brand new request"}};
    const std::string payload = route_body.dump();

    // Part one: 100 concurrent identical requests, one distinct body.
    {
      std::vector<std::thread> threads;
      std::vector<int> status(100, 0);
      std::vector<std::string> body(100);
      for (int i = 0; i < 100; ++i)
        threads.emplace_back([&, i] {
          httplib::Client client("127.0.0.1", port);
          if (auto res = client.Post("/route", payload, "application/json")) {
            status[i] = res->status;
            body[i] = res->body;
          }
        });
      for (auto& t : threads) t.join();
      const std::set<std::string> distinct(body.begin(), body.end());
      c.check(std::all_of(status.begin(), status.end(),
                          [](int s) { return s == 200; }),
              "not every concurrent /route request returned 200");
      c.check(distinct.size() == 1,
              "identical requests produced " +
                  std::to_string(distinct.size()) + " distinct bodies");
    }

    // Part two: a read storm across an /llms snapshot swap. Every response
    // must belong entirely to the old snapshot or entirely to the new one.
    {
      const std::string id_before = snapshot->id();
      const std::size_t llms_before = vocab.llm_ids.size();
      json records = json::array();
      for (int q : graph->queries_in(data::Split::Train)) {
        if (records.size() == 3) break;
        records.push_back({{"query_id", vocab.query_ids[q]},
                           {"performance", 0.9},
                           {"cost", 0.04}});
      }
      const json add_body = {{"llm_id", "storm-llm"},
                             {"cost_per_mtoken", 0.5},
                             {"size_label", "13b"},
                             {"description", "inserted mid-storm"},
                             {"records", records}};

      constexpr int kThreads = 8;
      constexpr int kPerThread = 125;
      std::vector<std::thread> readers;
      std::vector<std::vector<std::string>> bodies(kThreads);
      std::vector<int> bad_status(kThreads, 0);
      for (int t = 0; t < kThreads; ++t)
        readers.emplace_back([&, t] {
          httplib::Client client("127.0.0.1", port);
          for (int i = 0; i < kPerThread; ++i) {
            auto res = client.Post("/route", payload, "application/json");
            if (!res || res->status != 200) {
              ++bad_status[t];
              continue;
            }
            bodies[t].push_back(res->body);
          }
        });
      std::this_thread::sleep_for(std::chrono::milliseconds(30));
      httplib::Client admin("127.0.0.1", port);
      const auto attach =
          admin.Post("/llms", add_body.dump(), "application/json");
      c.check(attach && attach->status == 200,
              "the /llms attachment did not succeed");
      const std::string id_after =
          attach ? json::parse(attach->body)["snapshot_id"].get<std::string>()
                 : "";
      for (auto& t : readers) t.join();

      int total = 0, mixed = 0;
      for (int t = 0; t < kThreads; ++t) {
        c.check(bad_status[t] == 0, "reader thread " + std::to_string(t) +
                                        " saw " +
                                        std::to_string(bad_status[t]) +
                                        " failed requests");
        for (const auto& b : bodies[t]) {
          ++total;
          const json d = json::parse(b);
          const std::string sid = d["snapshot_id"].get<std::string>();
          const std::size_t n_logits = d["logits"].size();
          const bool old_snap = sid == id_before && n_logits == llms_before;
          const bool new_snap = sid == id_after && n_logits == llms_before + 1;
          if (!old_snap && !new_snap) ++mixed;
        }
      }
      c.check(total == kThreads * kPerThread,
              "expected " + std::to_string(kThreads * kPerThread) +
                  " responses, saw " + std::to_string(total));
      c.check(mixed == 0, std::to_string(mixed) +
                              " responses mixed state across the swap");
    }

    service.stop();
    server.join();
  } catch (const std::exception& e) {
    c.check(false, std::string("exception: ") + e.what());
  }
  EXPECT_TRUE(c.finish());
}

// ---------------------------------------------------------------------------
// Criterion 9: the configuration sweep trains without numeric failure

TEST(Acceptance, Criterion9SweepTrainability) {
  Criterion c(9);
  try {
    const ScaleFixture& f = scale();
    for (int hidden : {16, 32, 48, 64, 80}) {
      for (int layers = 1; layers <= 5; ++layers) {
        train::TrainConfig cfg;
        cfg.hidden = hidden;
        cfg.layers = layers;
        cfg.batch_size = 256;
        cfg.max_epochs = 2;  // trainability probe, not a convergence run
        cfg.base_lr = 3e-3;
        cfg.patience = 2;
        cfg.seed = 0;
        const std::string tag = "hidden " + std::to_string(hidden) +
                                ", layers " + std::to_string(layers);
        try {
          const auto result = train::train(f.g, cfg);
          for (const auto& s : result.history) {
            c.check(std::isfinite(s.train_loss) && std::isfinite(s.val_reward),
                    tag + ": non-finite loss or reward at epoch " +
                        std::to_string(s.epoch));
          }
          c.check(result.epochs_run == 2,
                  tag + ": expected 2 epochs, ran " +
                      std::to_string(result.epochs_run));
        } catch (const std::exception& e) {
          c.check(false, tag + ": " + e.what());
        }
      }
    }
  } catch (const std::exception& e) {
    c.check(false, std::string("exception: ") + e.what());
  }
  EXPECT_TRUE(c.finish());
}

}  // namespace
