#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "graphrouter/common/http.hpp"
#include <nlohmann/json.hpp>

#include "graphrouter/common/error.hpp"
#include "graphrouter/data/log_io.hpp"
#include "graphrouter/data/types.hpp"
#include "graphrouter/serve/router.hpp"

namespace graphrouter::serve {

// HTTP front end over a RouterSnapshot.
//
//   GET  /health  ->  {"status": "ok", "snapshot_id": ...}
//   POST /route   {"task_id", "query_text"}      -> RouteDecision JSON
//   POST /llms    {"llm_id", "cost_per_mtoken", "description", ...,
//                  "records": [{"query_id", "performance", "cost"}, ...]}
//                 -> {"llm_id", "aux_edges", "snapshot_id"}
//
// Errors come back as {"error_code", "message"}: validation problems with
// status 400, everything else with status 500. POST /llms swaps in a new
// snapshot atomically; requests already running keep the old one.
class RoutingService {
public:
  explicit RoutingService(std::shared_ptr<const RouterSnapshot> snapshot)
      : snapshot_(std::move(snapshot)) {
    if (!snapshot_) throw validation_error("RoutingService: null snapshot");
    setup_routes();
  }

  std::shared_ptr<const RouterSnapshot> snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return snapshot_;
  }

  // Blocking; serves until stop().
  bool listen(const std::string& host, int port) {
    return server_.listen(host, port);
  }

  // Two-phase variant for tests: grab an ephemeral port first, then serve.
  int bind_any_port(const std::string& host) {
    const int port = server_.bind_to_any_port(host);
    if (port < 0)
      throw io_error("RoutingService: cannot bind to a port on " + host);
    return port;
  }
  bool listen_after_bind() { return server_.listen_after_bind(); }

  void stop() { server_.stop(); }
  bool is_running() const { return server_.is_running(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

private:
  void replace_snapshot(std::shared_ptr<const RouterSnapshot> next) {
    std::lock_guard<std::mutex> lock(mu_);
    snapshot_ = std::move(next);
  }

  static void write_json(httplib::Response& res, int status,
                         const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void write_error(httplib::Response& res, int status,
                          const std::string& code,
                          const std::string& message) {
    write_json(res, status,
               {{"error_code", code}, {"message", message}});
  }

  // Runs a handler body and maps thrown errors onto the wire format.
  template <typename Fn>
  static void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      switch (e.kind()) {
        case Error::Kind::Validation:
          write_error(res, 400, "validation", e.what());
          break;
        case Error::Kind::Numeric:
          write_error(res, 500, "numeric", e.what());
          break;
        case Error::Kind::Io:
          write_error(res, 500, "io", e.what());
          break;
      }
    } catch (const std::exception& e) {
      write_error(res, 500, "internal", e.what());
    }
  }

  static nlohmann::json parse_body(const httplib::Request& req) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
      throw validation_error(std::string("malformed JSON body: ") + e.what());
    }
    if (!j.is_object())
      throw validation_error("request body must be a JSON object");
    return j;
  }

  void setup_routes() {
    server_.Get("/health", [this](const httplib::Request&,
                                  httplib::Response& res) {
      guarded(res, [&] {
        write_json(res, 200,
                   {{"status", "ok"}, {"snapshot_id", snapshot()->id()}});
      });
    });

    server_.Post("/route", [this](const httplib::Request& req,
                                  httplib::Response& res) {
      guarded(res, [&] {
        const nlohmann::json j = parse_body(req);
        const std::string task =
            data::require_string(j, "task_id", "/route");
        const std::string text =
            data::require_string(j, "query_text", "/route");
        const RouteDecision d = snapshot()->route(task, text);
        write_json(res, 200, d.to_json());
      });
    });

    server_.Post("/llms", [this](const httplib::Request& req,
                                 httplib::Response& res) {
      guarded(res, [&] {
        const nlohmann::json j = parse_body(req);
        data::LlmInfo info;
        info.llm_id = data::require_string(j, "llm_id", "/llms");
        info.cost_per_mtoken =
            data::require_number(j, "cost_per_mtoken", "/llms");
        if (info.cost_per_mtoken < 0.0)
          throw validation_error("/llms: cost_per_mtoken must be >= 0");
        info.name = j.value("name", info.llm_id);
        info.size_label = j.value("size_label", "unknown");
        info.description = j.value("description", "");

        std::vector<data::InteractionRecord> records;
        if (auto it = j.find("records"); it != j.end()) {
          if (!it->is_array())
            throw validation_error("/llms: 'records' must be an array");
          for (const auto& rj : *it) {
            data::InteractionRecord r;
            r.llm_id = info.llm_id;
            r.query_id =
                data::require_string(rj, "query_id", "/llms record");
            r.performance =
                data::require_number(rj, "performance", "/llms record");
            r.cost = data::require_number(rj, "cost", "/llms record");
            records.push_back(std::move(r));
          }
        }

        // Serialize attachments so concurrent adds cannot base themselves
        // on the same snapshot and silently drop one another.
        std::lock_guard<std::mutex> attach_lock(attach_mu_);
        auto next = snapshot()->with_llm(info, records);
        replace_snapshot(next);
        write_json(res, 200,
                   {{"llm_id", info.llm_id},
                    {"aux_edges", records.size()},
                    {"snapshot_id", next->id()}});
      });
    });
  }

  mutable std::mutex mu_;
  std::mutex attach_mu_;
  std::shared_ptr<const RouterSnapshot> snapshot_;
  httplib::Server server_;
};

}  // namespace graphrouter::serve
