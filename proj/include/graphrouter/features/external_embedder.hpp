#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "graphrouter/common/http.hpp"
#include <nlohmann/json.hpp>

#include "graphrouter/common/error.hpp"
#include "graphrouter/common/rng.hpp"
#include "graphrouter/features/embedder.hpp"
#include "graphrouter/numerics/tensor.hpp"

namespace graphrouter::features {

// Embedder backed by an HTTP service: POST {"text": ...} to the endpoint,
// expect a JSON array of dim numbers, L2-normalize locally. Responses are
// cached on disk keyed by the text's content hash, so repeated runs (and
// repeated texts within a run) never re-contact the service.
class ExternalEmbedder final : public Embedder {
public:
  ExternalEmbedder(std::string endpoint_url, int dim,
                   std::filesystem::path cache_dir, int max_retries = 3,
                   int timeout_seconds = 10)
      : url_(std::move(endpoint_url)),
        dim_(dim),
        cache_dir_(std::move(cache_dir)),
        max_retries_(max_retries),
        timeout_seconds_(timeout_seconds) {
    if (dim_ <= 0)
      throw validation_error("ExternalEmbedder: dim must be positive");
    if (max_retries_ < 1)
      throw validation_error("ExternalEmbedder: max_retries must be >= 1");
    parse_url();
    std::filesystem::create_directories(cache_dir_);
  }

  int dim() const override { return dim_; }

  std::string identity() const override {
    return "external:dim=" + std::to_string(dim_) + ":endpoint=" + url_;
  }

  numerics::Tensor embed(const std::string& text) const override {
    if (text.empty())
      throw validation_error("ExternalEmbedder: empty text");
    const std::filesystem::path path = cache_path(text);
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (auto cached = read_cache(path)) return normalized(*cached, "cache");
    }
    const std::vector<double> raw = fetch(text);
    numerics::Tensor out = normalized(raw, "service");
    std::lock_guard<std::mutex> lock(mu_);
    write_cache_atomic(path, raw);
    return out;
  }

private:
  void parse_url() {
    const std::string scheme = "http://";
    if (url_.rfind(scheme, 0) != 0)
      throw validation_error("ExternalEmbedder: endpoint must start with " +
                             scheme + ", got '" + url_ + "'");
    std::string rest = url_.substr(scheme.size());
    const auto slash = rest.find('/');
    path_ = slash == std::string::npos ? "/" : rest.substr(slash);
    std::string hostport =
        slash == std::string::npos ? rest : rest.substr(0, slash);
    const auto colon = hostport.rfind(':');
    if (colon == std::string::npos) {
      host_ = hostport;
      port_ = 80;
    } else {
      host_ = hostport.substr(0, colon);
      try {
        port_ = std::stoi(hostport.substr(colon + 1));
      } catch (const std::exception&) {
        throw validation_error("ExternalEmbedder: bad port in '" + url_ + "'");
      }
    }
    if (host_.empty())
      throw validation_error("ExternalEmbedder: no host in '" + url_ + "'");
  }

  std::filesystem::path cache_path(const std::string& text) const {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%016llx_%zu.json",
                  static_cast<unsigned long long>(fnv1a64(text)), text.size());
    return cache_dir_ / buf;
  }

  std::optional<std::vector<double>> read_cache(
      const std::filesystem::path& path) const {
    if (!std::filesystem::exists(path)) return std::nullopt;
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception&) {
      return std::nullopt;  // corrupt cache entry; refetch
    }
    if (!j.is_array() || int(j.size()) != dim_) return std::nullopt;
    std::vector<double> v;
    v.reserve(j.size());
    for (const auto& x : j) {
      if (!x.is_number()) return std::nullopt;
      v.push_back(x.get<double>());
    }
    return v;
  }

  void write_cache_atomic(const std::filesystem::path& path,
                          const std::vector<double>& v) const {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      if (!out)
        throw io_error("ExternalEmbedder: cannot write cache file '" +
                       tmp.string() + "'");
      out << nlohmann::json(v).dump();
    }
    std::filesystem::rename(tmp, path);
  }

  std::vector<double> fetch(const std::string& text) const {
    std::string last_error;
    for (int attempt = 1; attempt <= max_retries_; ++attempt) {
      if (attempt > 1)
        std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
      httplib::Client client(host_, port_);
      client.set_connection_timeout(timeout_seconds_, 0);
      client.set_read_timeout(timeout_seconds_, 0);
      auto res = client.Post(path_.c_str(),
                             nlohmann::json{{"text", text}}.dump(),
                             "application/json");
      if (!res) {
        last_error = "no response (" + httplib::to_string(res.error()) + ")";
        continue;
      }
      if (res->status != 200) {
        last_error = "HTTP status " + std::to_string(res->status);
        continue;
      }
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw numeric_error("ExternalEmbedder: bad JSON from " + url_ + ": " +
                            e.what());
      }
      if (!j.is_array() || int(j.size()) != dim_)
        throw numeric_error("ExternalEmbedder: expected an array of " +
                            std::to_string(dim_) + " numbers from " + url_ +
                            ", got " +
                            (j.is_array()
                                 ? std::to_string(j.size()) + " elements"
                                 : std::string("a non-array")));
      std::vector<double> v;
      v.reserve(j.size());
      for (const auto& x : j) {
        if (!x.is_number())
          throw numeric_error("ExternalEmbedder: non-numeric element from " +
                              url_);
        v.push_back(x.get<double>());
      }
      return v;
    }
    throw io_error("ExternalEmbedder: POST " + url_ + " failed after " +
                   std::to_string(max_retries_) + " attempts: " + last_error);
  }

  numerics::Tensor normalized(const std::vector<double>& v,
                              const char* origin) const {
    double norm = 0.0;
    for (double x : v) {
      if (!std::isfinite(x))
        throw numeric_error(std::string("ExternalEmbedder: non-finite value "
                                        "in embedding from ") +
                            origin);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm <= 0.0)
      throw numeric_error(std::string("ExternalEmbedder: zero vector from ") +
                          origin);
    numerics::Tensor out = numerics::Tensor::zeros({std::int64_t(v.size())});
    for (std::size_t i = 0; i < v.size(); ++i) out.at(std::int64_t(i)) = v[i] / norm;
    return out;
  }

  std::string url_, host_, path_;
  int dim_;
  std::filesystem::path cache_dir_;
  int max_retries_;
  int timeout_seconds_;
  int port_ = 80;
  mutable std::mutex mu_;
};

}  // namespace graphrouter::features
