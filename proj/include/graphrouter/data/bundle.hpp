#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "graphrouter/common/error.hpp"
#include "graphrouter/common/rng.hpp"
#include "graphrouter/data/log_io.hpp"
#include "graphrouter/data/types.hpp"

// Prepared dataset directories. A bundle freezes an interaction log together
// with its query split and the normalization ranges fitted on the training
// split, so that later train, eval and serve runs all see exactly the same
// data:
//
//   <dir>/manifest.json       format marker, counts, per-file checksums
//   <dir>/log.jsonl           the interaction log in canonical line order
//   <dir>/splits.json         query -> train/val/test plus new-LLM extras
//   <dir>/normalization.json  min-max ranges from the training split
//
// All writers emit canonical JSON (sorted keys, fixed indentation), so
// preparing the same inputs twice yields byte-identical directories.
namespace graphrouter::data {

struct DatasetBundle {
  InteractionLog log;
  SplitAssignment split;
  NormalizationParams norm;
  nlohmann::json meta;  // caller-supplied block carried in the manifest
};

namespace detail {

constexpr const char* kBundleFormat = "graphrouter-dataset";
constexpr int kBundleVersion = 1;

inline std::string slurp_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw io_error("cannot open '" + p.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline std::string checksum_hex(const std::string& bytes) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

inline void write_json_file(const std::filesystem::path& p,
                            const nlohmann::json& j) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw io_error("cannot write '" + p.string() + "'");
  out << j.dump(2) << "\n";
  if (!out) throw io_error("failed writing '" + p.string() + "'");
}

inline nlohmann::json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in)
    throw io_error("cannot open '" + p.string() +
                   "' (not a prepared dataset directory?)");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(p.filename().string() +
                           ": malformed JSON: " + e.what());
  }
}

// The consistency rules between a log and its split, shared by the writer
// (fail before touching the disk) and the loader (distrust the disk).
inline void check_bundle_consistency(const InteractionLog& log,
                                     const SplitAssignment& split,
                                     const std::string& source) {
  std::set<std::string> queries;
  for (const auto& r : log.records) queries.insert(r.query_id);
  for (const auto& q : queries)
    if (!split.by_query.count(q))
      throw validation_error(source + ": query '" + q +
                             "' has no split assignment");
  for (const auto& [q, s] : split.by_query)
    if (!queries.count(q))
      throw validation_error(source + ": split assigns unknown query '" + q +
                             "'");
  for (const auto& id : split.held_out_llms)
    if (!log.find_llm(id))
      throw validation_error(source + ": held-out llm '" + id +
                             "' is not in the log");
  for (const auto& q : split.aux_query_ids) {
    if (!queries.count(q))
      throw validation_error(source + ": aux query '" + q +
                             "' is not in the log");
    if (split.of(q) != Split::Train)
      throw validation_error(source + ": aux query '" + q +
                             "' is not in the training split");
  }
}

}  // namespace detail

inline nlohmann::json split_to_json(const SplitAssignment& split) {
  nlohmann::json queries = nlohmann::json::object();
  for (const auto& [q, s] : split.by_query) queries[q] = split_name(s);
  nlohmann::json j = {{"queries", std::move(queries)}};
  j["held_out_llms"] = split.held_out_llms;
  j["aux_query_ids"] = split.aux_query_ids;
  return j;
}

inline SplitAssignment split_from_json(const nlohmann::json& j,
                                       const std::string& source) {
  if (!j.is_object() || !j.contains("queries") || !j["queries"].is_object())
    throw validation_error(source + ": expected an object with 'queries'");
  SplitAssignment split;
  for (const auto& [q, v] : j["queries"].items()) {
    if (!v.is_string())
      throw validation_error(source + ": split for query '" + q +
                             "' must be a string");
    split.by_query.emplace(q, split_from_name(v.get<std::string>()));
  }
  if (auto it = j.find("held_out_llms"); it != j.end())
    split.held_out_llms = it->get<std::vector<std::string>>();
  if (auto it = j.find("aux_query_ids"); it != j.end())
    split.aux_query_ids = it->get<std::vector<std::string>>();
  return split;
}

inline nlohmann::json normalization_to_json(const NormalizationParams& n) {
  return {{"perf_min", n.perf_min},
          {"perf_max", n.perf_max},
          {"cost_min", n.cost_min},
          {"cost_max", n.cost_max}};
}

inline NormalizationParams normalization_from_json(const nlohmann::json& j,
                                                   const std::string& source) {
  NormalizationParams n;
  n.perf_min = require_number(j, "perf_min", source);
  n.perf_max = require_number(j, "perf_max", source);
  n.cost_min = require_number(j, "cost_min", source);
  n.cost_max = require_number(j, "cost_max", source);
  if (n.perf_max < n.perf_min || n.cost_max < n.cost_min)
    throw validation_error(source + ": max below min");
  return n;
}

inline void write_bundle(const std::filesystem::path& dir,
                         const InteractionLog& log,
                         const SplitAssignment& split,
                         const NormalizationParams& norm,
                         nlohmann::json meta = nlohmann::json::object()) {
  validate_log(log, "write_bundle");
  detail::check_bundle_consistency(log, split, "write_bundle");

  std::filesystem::create_directories(dir);
  write_log(dir / "log.jsonl", log);
  detail::write_json_file(dir / "splits.json", split_to_json(split));
  detail::write_json_file(dir / "normalization.json",
                          normalization_to_json(norm));

  std::set<std::string> queries;
  for (const auto& r : log.records) queries.insert(r.query_id);
  nlohmann::json files = nlohmann::json::object();
  for (const char* name : {"log.jsonl", "splits.json", "normalization.json"}) {
    const std::string bytes = detail::slurp_file(dir / name);
    files[name] = {{"bytes", bytes.size()},
                   {"fnv1a64", detail::checksum_hex(bytes)}};
  }
  const nlohmann::json manifest = {
      {"format", detail::kBundleFormat},
      {"version", detail::kBundleVersion},
      {"counts",
       {{"tasks", log.tasks.size()},
        {"llms", log.llms.size()},
        {"queries", queries.size()},
        {"records", log.records.size()}}},
      {"files", std::move(files)},
      {"meta", std::move(meta)}};
  detail::write_json_file(dir / "manifest.json", manifest);
}

inline DatasetBundle load_bundle(const std::filesystem::path& dir) {
  const nlohmann::json manifest =
      detail::read_json_file(dir / "manifest.json");
  if (!manifest.is_object() || manifest.value("format", "") !=
                                   detail::kBundleFormat)
    throw validation_error("manifest.json: not a " +
                           std::string(detail::kBundleFormat) + " manifest");
  if (manifest.value("version", 0) != detail::kBundleVersion)
    throw validation_error(
        "manifest.json: unsupported version " +
        manifest.value("version", nlohmann::json()).dump());

  if (manifest.contains("files"))
    for (const auto& [name, entry] : manifest["files"].items()) {
      const std::string bytes = detail::slurp_file(dir / name);
      const std::string want = entry.value("fnv1a64", "");
      if (detail::checksum_hex(bytes) != want)
        throw validation_error("'" + name +
                               "' does not match its manifest checksum");
    }

  DatasetBundle b;
  b.log = ingest_log(dir / "log.jsonl");
  b.split = split_from_json(detail::read_json_file(dir / "splits.json"),
                            "splits.json");
  b.norm = normalization_from_json(
      detail::read_json_file(dir / "normalization.json"),
      "normalization.json");
  b.meta = manifest.value("meta", nlohmann::json::object());
  detail::check_bundle_consistency(b.log, b.split, dir.string());
  return b;
}

// The log checksum recorded in a bundle's manifest. Training stores this in
// checkpoint metadata so later commands can tell when a checkpoint is being
// applied to a different dataset than it was fitted on.
inline std::string bundle_log_checksum(const std::filesystem::path& dir) {
  const nlohmann::json manifest = detail::read_json_file(dir / "manifest.json");
  if (!manifest.contains("files") || !manifest["files"].contains("log.jsonl"))
    throw validation_error("manifest.json: no checksum entry for log.jsonl");
  const std::string sum = manifest["files"]["log.jsonl"].value("fnv1a64", "");
  if (sum.empty())
    throw validation_error("manifest.json: empty checksum for log.jsonl");
  return sum;
}

}  // namespace graphrouter::data
