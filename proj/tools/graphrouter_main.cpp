// Command line front end for the routing library.
//
//   prepare   build a dataset bundle from a log file or the synthetic generator
//   train     fit a router on a bundle and write a checkpoint
//   eval      score the trained router against the baseline policies
//   route     answer a single routing request from a checkpoint
//   add-llm   attach a new LLM to a trained router without retraining
//   stats     dump distribution summaries of an interaction log
//   serve     expose the router over HTTP
//
// Every value that shapes an artifact is an explicit flag with a deterministic
// default, so a command line is a complete record of how an artifact was made.
// Checkpoints carry the scenario, the embedder configuration and the bundle's
// log checksum in their metadata; downstream commands rebuild the embedder
// from that record and refuse data that does not match unless --force is
// given. Exit codes: 0 on success, 2 for validation and usage errors, 3 for
// anything else.

#include <CLI11.hpp>

#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphrouter/common/error.hpp"
#include "graphrouter/data/bundle.hpp"
#include "graphrouter/data/log_io.hpp"
#include "graphrouter/data/reward.hpp"
#include "graphrouter/data/split.hpp"
#include "graphrouter/data/stats.hpp"
#include "graphrouter/data/synthetic.hpp"
#include "graphrouter/data/types.hpp"
#include "graphrouter/eval/evaluate.hpp"
#include "graphrouter/eval/policies.hpp"
#include "graphrouter/features/embedder.hpp"
#include "graphrouter/features/external_embedder.hpp"
#include "graphrouter/features/feature_table.hpp"
#include "graphrouter/graph/hetero_graph.hpp"
#include "graphrouter/model/network.hpp"
#include "graphrouter/serve/router.hpp"
#include "graphrouter/serve/service.hpp"
#include "graphrouter/train/checkpoint.hpp"
#include "graphrouter/train/trainer.hpp"

namespace {

namespace gr = graphrouter;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Shared option bundles

struct EmbedderOptions {
  std::string kind = "hash";
  int dim = 64;
  std::uint64_t seed = 0;
  std::string url;
  std::string cache_dir = "embed-cache";
};

void add_embedder_flags(CLI::App* cmd, EmbedderOptions& o) {
  cmd->add_option("--embedder", o.kind, "Text embedder: hash or external")
      ->check(CLI::IsMember({"hash", "external"}))
      ->capture_default_str();
  cmd->add_option("--embed-dim", o.dim, "Embedding dimension")
      ->capture_default_str();
  cmd->add_option("--embed-seed", o.seed,
                  "Seed of the hash embedder's projection")
      ->capture_default_str();
  cmd->add_option("--embed-url", o.url,
                  "Endpoint of the external embedding service");
  cmd->add_option("--embed-cache", o.cache_dir,
                  "Cache directory for external embeddings")
      ->capture_default_str();
}

std::shared_ptr<const gr::features::Embedder> make_embedder(
    const EmbedderOptions& o) {
  if (o.kind == "hash")
    return std::make_shared<gr::features::HashEmbedder>(o.dim, o.seed);
  if (o.kind == "external") {
    if (o.url.empty())
      throw gr::validation_error(
          "--embed-url is required with --embedder external");
    return std::make_shared<gr::features::ExternalEmbedder>(o.url, o.dim,
                                                            o.cache_dir);
  }
  throw gr::validation_error("unknown embedder '" + o.kind +
                             "' (expected hash or external)");
}

json embedder_to_meta(const EmbedderOptions& o,
                      const gr::features::Embedder& emb) {
  return {{"identity", emb.identity()}, {"kind", o.kind},     {"dim", o.dim},
          {"seed", o.seed},             {"url", o.url},       {"cache_dir", o.cache_dir}};
}

EmbedderOptions embedder_from_meta(const json& meta) {
  if (!meta.contains("embedder"))
    throw gr::validation_error("checkpoint metadata has no embedder record");
  const json& e = meta["embedder"];
  EmbedderOptions o;
  o.kind = e.value("kind", "hash");
  o.dim = e.value("dim", 64);
  o.seed = e.value("seed", std::uint64_t{0});
  o.url = e.value("url", "");
  o.cache_dir = e.value("cache_dir", "embed-cache");
  return o;
}

struct ScenarioOptions {
  std::string name;             // empty means "use the command's default"
  std::vector<double> weights;  // two values override the named preset
};

void add_scenario_flags(CLI::App* cmd, ScenarioOptions& o,
                        const char* fallback_hint) {
  cmd->add_option("--scenario", o.name,
                  std::string("Tradeoff preset: performance-first, balance or "
                              "cost-first (default: ") +
                      fallback_hint + ")");
  cmd->add_option("--weights", o.weights,
                  "Custom performance and cost weights, overriding --scenario")
      ->expected(2);
}

gr::data::ScenarioWeights resolve_scenario(const ScenarioOptions& o,
                                           const std::string& fallback) {
  if (!o.weights.empty())
    return gr::data::ScenarioWeights::custom(o.weights[0], o.weights[1]);
  return gr::data::ScenarioWeights::parse(o.name.empty() ? fallback : o.name);
}

// ---------------------------------------------------------------------------
// Checkpoint metadata helpers

gr::data::ScenarioWeights scenario_from_meta(const json& meta) {
  if (!meta.contains("scenario"))
    throw gr::validation_error("checkpoint metadata has no scenario record");
  const json& s = meta["scenario"];
  const double alpha = gr::data::require_number(s, "alpha", "checkpoint meta");
  const double beta = gr::data::require_number(s, "beta", "checkpoint meta");
  const std::string label = s.value("label", "");
  for (const char* name : {"performance-first", "balance", "cost-first"})
    if (label == name) return gr::data::ScenarioWeights::parse(label);
  return gr::data::ScenarioWeights::custom(alpha, beta);
}

void check_checkpoint_data(const json& meta, const std::filesystem::path& dir,
                           bool force) {
  if (force) return;
  const std::string want =
      meta.value("data", json::object()).value("log_fnv1a64", "");
  if (want.empty()) return;
  const std::string got = gr::data::bundle_log_checksum(dir);
  if (got != want)
    throw gr::validation_error(
        "checkpoint was trained on a log with checksum " + want +
        " but this bundle's log has " + got + "; pass --force to use it anyway");
}

// ---------------------------------------------------------------------------
// Graph assembly shared by train, eval, route, add-llm and serve

gr::graph::HeteroGraph build_graph_from_bundle(
    const gr::data::DatasetBundle& b, const gr::features::Embedder& embedder,
    const gr::features::DescriptionStore& store,
    const gr::data::ScenarioWeights& weights) {
  const auto vocab = gr::data::LogVocab::from_log(b.log, b.split.held_out_llms);
  const auto table =
      gr::features::build_feature_table(b.log, vocab, b.norm, embedder, store);
  return gr::graph::build_graph(vocab, table, b.split, weights);
}

// Everything route, add-llm and serve need to answer requests.
struct LoadedRouter {
  gr::data::DatasetBundle bundle;
  gr::train::Checkpoint checkpoint;
  std::shared_ptr<const gr::features::Embedder> embedder;
  std::shared_ptr<const gr::serve::RouterSnapshot> snapshot;
};

LoadedRouter load_router(const std::string& data_dir,
                         const std::string& checkpoint_path, bool force) {
  LoadedRouter r;
  r.bundle = gr::data::load_bundle(data_dir);
  r.checkpoint = gr::train::load_checkpoint(checkpoint_path);
  check_checkpoint_data(r.checkpoint.meta, data_dir, force);
  r.embedder = make_embedder(embedder_from_meta(r.checkpoint.meta));
  const auto weights = scenario_from_meta(r.checkpoint.meta);
  gr::features::DescriptionStore store(
      r.checkpoint.meta.value("descriptions", ""));
  auto graph = std::make_shared<const gr::graph::HeteroGraph>(
      build_graph_from_bundle(r.bundle, *r.embedder, store, weights));
  r.snapshot = std::make_shared<const gr::serve::RouterSnapshot>(
      r.checkpoint.params, std::move(graph), r.bundle.norm, r.embedder,
      std::move(store));
  return r;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareArgs {
  std::string out;
  std::string log_path;
  bool synthetic = false;
  gr::data::SyntheticConfig synth;
  std::vector<double> ratios{0.7, 0.1, 0.2};
  std::vector<std::string> hold_out;
  std::size_t aux_queries = 5;
  std::uint64_t seed = 0;
};

int run_prepare(const PrepareArgs& a) {
  if (a.synthetic == !a.log_path.empty())
    throw gr::validation_error(
        "prepare needs exactly one input: --log FILE or --synthetic");

  gr::data::InteractionLog log;
  json source;
  if (a.synthetic) {
    log = gr::data::generate_synthetic(a.synth, a.seed).log;
    source = {{"kind", "synthetic"},
              {"tasks", a.synth.n_tasks},
              {"llms", a.synth.n_llms},
              {"queries_per_task", a.synth.queries_per_task},
              {"classes_per_task", a.synth.classes_per_task},
              {"noise", a.synth.noise}};
  } else {
    log = gr::data::ingest_log(a.log_path);
    source = {{"kind", "log"},
              {"path", std::filesystem::path(a.log_path).filename().string()}};
  }

  const std::array<double, 3> ratios{a.ratios[0], a.ratios[1], a.ratios[2]};
  const auto split =
      a.hold_out.empty()
          ? gr::data::split_standard(log, ratios, a.seed)
          : gr::data::split_new_llm(log, a.hold_out, a.aux_queries, ratios,
                                    a.seed);
  const auto norm = gr::data::fit_normalization(log, split);

  const json meta = {
      {"seed", a.seed}, {"ratios", a.ratios}, {"source", std::move(source)}};
  gr::data::write_bundle(a.out, log, split, norm, meta);

  std::set<std::string> queries;
  for (const auto& r : log.records) queries.insert(r.query_id);
  std::cout << "wrote " << a.out << ": " << log.tasks.size() << " tasks, "
            << log.llms.size() << " llms, " << queries.size() << " queries, "
            << log.records.size() << " records\n";
  if (!split.held_out_llms.empty()) {
    std::cout << "held out for few-shot attachment:";
    for (const auto& id : split.held_out_llms) std::cout << ' ' << id;
    std::cout << " (" << split.aux_query_ids.size() << " aux queries)\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data;
  std::string out;
  ScenarioOptions scenario;
  EmbedderOptions embed;
  std::string descriptions;
  gr::train::TrainConfig cfg;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  const auto bundle = gr::data::load_bundle(a.data);
  const auto weights = resolve_scenario(a.scenario, "balance");
  const auto embedder = make_embedder(a.embed);
  const gr::features::DescriptionStore store(a.descriptions);
  const auto g = build_graph_from_bundle(bundle, *embedder, store, weights);

  const auto on_epoch = [&](const gr::train::EpochStats& s) {
    if (a.quiet) return;
    char line[128];
    std::snprintf(line, sizeof line,
                  "epoch %3d  loss %.4f  val reward %.4f  lr %.3g", s.epoch,
                  s.train_loss, s.val_reward, s.lr);
    std::cout << line << '\n';
  };
  const auto result = gr::train::train(g, a.cfg, on_epoch);

  const json meta = {
      {"scenario",
       {{"label", weights.label()},
        {"alpha", weights.alpha},
        {"beta", weights.beta}}},
      {"seed", a.cfg.seed},
      {"embedder", embedder_to_meta(a.embed, *embedder)},
      {"descriptions", a.descriptions},
      {"data", {{"log_fnv1a64", gr::data::bundle_log_checksum(a.data)}}},
      {"training",
       {{"hidden", a.cfg.hidden},
        {"layers", a.cfg.layers},
        {"batch_size", a.cfg.batch_size},
        {"max_epochs", a.cfg.max_epochs},
        {"base_lr", a.cfg.base_lr},
        {"patience", a.cfg.patience},
        {"best_epoch", result.best_epoch},
        {"best_val_reward", result.best_val_reward},
        {"epochs_run", result.epochs_run}}}};
  gr::train::save_checkpoint(a.out, result.params, meta);

  std::cout << "saved " << a.out << ": best epoch " << result.best_epoch
            << " of " << result.epochs_run << ", val reward "
            << fmt("%.4f", result.best_val_reward) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  std::string split = "test";
  ScenarioOptions scenario;
  std::string out_csv;
  std::string timings;
  std::string published;
  bool force = false;
};

int run_eval(const EvalArgs& a) {
  const auto bundle = gr::data::load_bundle(a.data);
  const auto ckpt = gr::train::load_checkpoint(a.checkpoint);
  check_checkpoint_data(ckpt.meta, a.data, a.force);

  // Scenario flags override the one recorded at training time; changing the
  // scenario re-labels the graph's reward targets but keeps the same weights.
  const auto weights =
      (!a.scenario.weights.empty() || !a.scenario.name.empty())
          ? resolve_scenario(a.scenario, "balance")
          : scenario_from_meta(ckpt.meta);

  const auto embedder = make_embedder(embedder_from_meta(ckpt.meta));
  const gr::features::DescriptionStore store(
      ckpt.meta.value("descriptions", ""));
  const auto g = build_graph_from_bundle(bundle, *embedder, store, weights);
  const auto split = gr::data::split_from_name(a.split);

  const gr::eval::LargestLlmPolicy largest(bundle.log);
  const gr::eval::SmallestLlmPolicy smallest(bundle.log);
  const gr::eval::RouterPolicy router(ckpt.params);
  const gr::eval::OraclePolicy oracle;
  const std::vector<const gr::eval::Policy*> policies{&largest, &smallest,
                                                      &router, &oracle};

  std::vector<gr::eval::PolicyResult> results;
  std::vector<double> millis;
  for (const auto* p : policies) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = gr::eval::evaluate_policies(g, {p}, split);
    const auto t1 = std::chrono::steady_clock::now();
    results.push_back(std::move(r.front()));
    millis.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }

  std::cout << gr::eval::format_report(results, weights.label(), a.split);

  if (!a.out_csv.empty())
    gr::eval::write_results_csv(a.out_csv, results, weights.label());

  if (!a.timings.empty()) {
    // Kept apart from the results CSV, which stays byte-reproducible.
    std::ofstream out(a.timings, std::ios::binary);
    if (!out)
      throw gr::io_error("cannot write timings file '" + a.timings + "'");
    out << "policy,millis\n";
    for (std::size_t i = 0; i < results.size(); ++i)
      out << results[i].policy << ',' << fmt("%.3f", millis[i]) << '\n';
  }

  if (!a.published.empty()) {
    const auto rows = gr::eval::load_published_csv(a.published);
    std::cout << "\nPublished results, scenario '" << weights.label()
              << "':\n";
    bool any = false;
    for (const auto& r : rows) {
      if (r.scenario != weights.label()) continue;
      char line[160];
      std::snprintf(line, sizeof line, "%16s %11.3f %10.4f %10.3f",
                    r.policy.c_str(), r.performance, r.cost, r.reward);
      std::cout << line << '\n';
      any = true;
    }
    if (!any) std::cout << "  (no rows for this scenario)\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// route

struct RouteArgs {
  std::string data;
  std::string checkpoint;
  std::string task;
  std::string query;
  bool force = false;
};

int run_route(const RouteArgs& a) {
  const auto r = load_router(a.data, a.checkpoint, a.force);
  const auto decision = r.snapshot->route(a.task, a.query);
  std::cout << decision.to_json().dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// add-llm

struct AddLlmArgs {
  std::string data;
  std::string checkpoint;
  std::string llm_id;
  bool from_bundle = false;
  std::string records;
  std::string name;
  std::string size_label = "unknown";
  double cost_per_mtoken = 0.0;
  std::string description;
  std::string task;
  std::string query;
  bool force = false;
};

std::vector<gr::data::InteractionRecord> read_aux_records(
    const std::filesystem::path& path, const std::string& llm_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw gr::io_error("cannot open records file '" + path.string() + "'");
  std::vector<gr::data::InteractionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where =
        path.string() + " line " + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw gr::validation_error(where + ": " + e.what());
    }
    gr::data::InteractionRecord r;
    r.query_id = gr::data::require_string(j, "query_id", where);
    r.performance = gr::data::require_number(j, "performance", where);
    r.cost = gr::data::require_number(j, "cost", where);
    r.llm_id = llm_id;
    out.push_back(std::move(r));
  }
  return out;
}

int run_add_llm(const AddLlmArgs& a) {
  const auto r = load_router(a.data, a.checkpoint, a.force);

  gr::data::LlmInfo info;
  std::vector<gr::data::InteractionRecord> records;
  if (a.from_bundle) {
    // The bundle already holds the LLM's log rows; replay the aux subset the
    // split reserved for exactly this few-shot attachment.
    const auto* known = r.bundle.log.find_llm(a.llm_id);
    if (!known)
      throw gr::validation_error("--from-bundle: the bundle's log has no llm '" +
                                 a.llm_id + "'");
    info = *known;
    records = gr::data::aux_records_for(r.bundle.log, r.bundle.split, a.llm_id);
  } else {
    if (a.records.empty())
      throw gr::validation_error(
          "add-llm needs observations: --records FILE or --from-bundle");
    info.llm_id = a.llm_id;
    info.name = a.name.empty() ? a.llm_id : a.name;
    info.size_label = a.size_label;
    info.cost_per_mtoken = a.cost_per_mtoken;
    info.description = a.description;
    records = read_aux_records(a.records, a.llm_id);
  }

  const auto next = r.snapshot->with_llm(info, records);
  json out = {{"llm_id", info.llm_id},
              {"aux_edges", records.size()},
              {"snapshot_id", next->id()},
              {"routable", next->llm_ids()}};
  if (!a.task.empty() || !a.query.empty()) {
    if (a.task.empty() || a.query.empty())
      throw gr::validation_error(
          "--task and --query must be given together");
    out["decision"] = next->route(a.task, a.query).to_json();
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// stats

struct StatsArgs {
  std::string log_path;
  std::string data;
  std::string out;
  gr::data::StatsOptions opts;
  std::vector<std::string> pair;
};

int run_stats(const StatsArgs& a) {
  if (a.log_path.empty() == a.data.empty())
    throw gr::validation_error(
        "stats needs exactly one input: --log FILE or --data DIR");
  const auto log = a.data.empty()
                       ? gr::data::ingest_log(a.log_path)
                       : gr::data::load_bundle(a.data).log;
  gr::data::StatsOptions opts = a.opts;
  if (!a.pair.empty()) opts.superiority_pair = {a.pair[0], a.pair[1]};
  gr::data::write_distribution_stats(log, a.out, opts);
  std::cout << "wrote distribution stats to " << a.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// serve

struct ServeArgs {
  std::string data;
  std::string checkpoint;
  std::string host = "127.0.0.1";
  int port = 8080;
  bool force = false;
};

int run_serve(const ServeArgs& a) {
  const auto r = load_router(a.data, a.checkpoint, a.force);
  gr::serve::RoutingService service(r.snapshot);
  std::cout << "serving snapshot " << r.snapshot->id() << " on http://"
            << a.host << ':' << a.port << std::endl;
  service.listen(a.host, a.port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-based router for picking the right LLM per query"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read option defaults from a TOML file");

  int rc = 0;

  PrepareArgs pa;
  auto* prepare = app.add_subcommand(
      "prepare", "Build a dataset bundle from a log or the synthetic generator");
  prepare->add_option("--out", pa.out, "Bundle directory to create")
      ->required();
  auto* log_opt =
      prepare->add_option("--log", pa.log_path, "Interaction log to ingest");
  auto* syn_opt = prepare->add_flag("--synthetic", pa.synthetic,
                                    "Generate a synthetic log instead");
  log_opt->excludes(syn_opt);
  prepare->add_option("--tasks", pa.synth.n_tasks, "Synthetic task count")
      ->needs(syn_opt)
      ->capture_default_str();
  prepare->add_option("--llms", pa.synth.n_llms, "Synthetic LLM count")
      ->needs(syn_opt)
      ->capture_default_str();
  prepare
      ->add_option("--queries-per-task", pa.synth.queries_per_task,
                   "Synthetic queries per task")
      ->needs(syn_opt)
      ->capture_default_str();
  prepare
      ->add_option("--classes", pa.synth.classes_per_task,
                   "Synthetic query classes per task")
      ->needs(syn_opt)
      ->capture_default_str();
  prepare
      ->add_option("--noise", pa.synth.noise,
                   "Synthetic performance noise stddev")
      ->needs(syn_opt)
      ->capture_default_str();
  prepare
      ->add_option("--ratios", pa.ratios,
                   "Train, val and test fractions (must sum to 1)")
      ->expected(3);
  prepare
      ->add_option("--hold-out", pa.hold_out,
                   "LLM id to withhold from training for the new-LLM setting "
                   "(repeatable)");
  prepare
      ->add_option("--aux-queries", pa.aux_queries,
                   "Training queries revealed for each held-out LLM")
      ->capture_default_str();
  prepare->add_option("--seed", pa.seed, "Split and generator seed")
      ->capture_default_str();
  prepare->callback([&] { rc = run_prepare(pa); });

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Fit a router and write a checkpoint");
  train->add_option("--data", ta.data, "Dataset bundle directory")->required();
  train->add_option("--out", ta.out, "Checkpoint file to write")->required();
  add_scenario_flags(train, ta.scenario, "balance");
  train->add_option("--hidden", ta.cfg.hidden, "Hidden width")
      ->capture_default_str();
  train->add_option("--layers", ta.cfg.layers, "Message passing rounds")
      ->capture_default_str();
  train->add_option("--batch-size", ta.cfg.batch_size, "Queries per batch")
      ->capture_default_str();
  train->add_option("--epochs", ta.cfg.max_epochs, "Epoch budget")
      ->capture_default_str();
  train->add_option("--lr", ta.cfg.base_lr, "Base learning rate")
      ->capture_default_str();
  train
      ->add_option("--patience", ta.cfg.patience,
                   "Epochs without val improvement before stopping")
      ->capture_default_str();
  train->add_option("--seed", ta.cfg.seed, "Initialization and batching seed")
      ->capture_default_str();
  add_embedder_flags(train, ta.embed);
  train->add_option("--descriptions", ta.descriptions,
                    "Directory of task and LLM description files");
  train->add_flag("--quiet", ta.quiet, "Suppress per-epoch progress lines");
  train->callback([&] { rc = run_train(ta); });

  EvalArgs ea;
  auto* eval = app.add_subcommand(
      "eval", "Score the router and baseline policies on a split");
  eval->add_option("--data", ea.data, "Dataset bundle directory")->required();
  eval->add_option("--checkpoint", ea.checkpoint, "Trained checkpoint")
      ->required();
  eval->add_option("--split", ea.split, "Split to score: train, val or test")
      ->capture_default_str();
  add_scenario_flags(eval, ea.scenario, "recorded in the checkpoint");
  eval->add_option("--out-csv", ea.out_csv, "Write results as CSV");
  eval->add_option("--timings", ea.timings,
                   "Write per-policy wall times as CSV");
  eval->add_option("--published", ea.published,
                   "Reference results CSV to print alongside");
  eval->add_flag("--force", ea.force, "Skip the data checksum check");
  eval->callback([&] { rc = run_eval(ea); });

  RouteArgs ra;
  auto* route =
      app.add_subcommand("route", "Answer one routing request from a checkpoint");
  route->add_option("--data", ra.data, "Dataset bundle directory")->required();
  route->add_option("--checkpoint", ra.checkpoint, "Trained checkpoint")
      ->required();
  route->add_option("--task", ra.task, "Task id of the query")->required();
  route->add_option("--query", ra.query, "Query text to route")->required();
  route->add_flag("--force", ra.force, "Skip the data checksum check");
  route->callback([&] { rc = run_route(ra); });

  AddLlmArgs aa;
  auto* add_llm = app.add_subcommand(
      "add-llm", "Attach a new LLM to a trained router without retraining");
  add_llm->add_option("--data", aa.data, "Dataset bundle directory")
      ->required();
  add_llm->add_option("--checkpoint", aa.checkpoint, "Trained checkpoint")
      ->required();
  add_llm->add_option("--llm-id", aa.llm_id, "Id of the LLM to attach")
      ->required();
  auto* from_bundle = add_llm->add_flag(
      "--from-bundle", aa.from_bundle,
      "Take the LLM's profile and aux observations from the bundle's "
      "held-out split");
  auto* records_opt = add_llm->add_option(
      "--records", aa.records,
      "JSONL file of observations {query_id, performance, cost}");
  records_opt->excludes(from_bundle);
  add_llm->add_option("--name", aa.name, "Display name (defaults to the id)")
      ->excludes(from_bundle);
  add_llm
      ->add_option("--size-label", aa.size_label,
                   "Parameter count label such as 7b or 8x7b")
      ->excludes(from_bundle)
      ->capture_default_str();
  add_llm
      ->add_option("--cost-per-mtoken", aa.cost_per_mtoken,
                   "Price per million tokens")
      ->excludes(from_bundle)
      ->capture_default_str();
  add_llm->add_option("--description", aa.description, "Free-text description")
      ->excludes(from_bundle);
  add_llm->add_option("--task", aa.task,
                      "Also route this task's query after attaching");
  add_llm->add_option("--query", aa.query, "Query text for the test route");
  add_llm->add_flag("--force", aa.force, "Skip the data checksum check");
  add_llm->callback([&] { rc = run_add_llm(aa); });

  StatsArgs sa;
  auto* stats = app.add_subcommand(
      "stats", "Write distribution summaries of an interaction log");
  auto* stats_log =
      stats->add_option("--log", sa.log_path, "Interaction log to analyze");
  stats->add_option("--data", sa.data, "Dataset bundle to analyze instead")
      ->excludes(stats_log);
  stats->add_option("--out", sa.out, "Directory for the CSV files")
      ->required();
  stats->add_option("--bins", sa.opts.histogram_bins, "Histogram bin count")
      ->capture_default_str();
  stats
      ->add_option("--superiority", sa.pair,
                   "Two LLM ids to compare win rates for")
      ->expected(2);
  stats->callback([&] { rc = run_stats(sa); });

  ServeArgs va;
  auto* serve = app.add_subcommand("serve", "Serve the router over HTTP");
  serve->add_option("--data", va.data, "Dataset bundle directory")->required();
  serve->add_option("--checkpoint", va.checkpoint, "Trained checkpoint")
      ->required();
  serve->add_option("--host", va.host, "Bind address")->capture_default_str();
  serve->add_option("--port", va.port, "Port to listen on")
      ->capture_default_str();
  serve->add_flag("--force", va.force, "Skip the data checksum check");
  serve->callback([&] { rc = run_serve(va); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // CLI11 exits 0 for --help and friends; fold real parse failures into
    // the validation exit code.
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const graphrouter::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == graphrouter::Error::Kind::Validation ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return rc;
}
