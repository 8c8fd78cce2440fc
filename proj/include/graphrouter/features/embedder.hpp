#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "graphrouter/common/error.hpp"
#include "graphrouter/common/rng.hpp"
#include "graphrouter/numerics/tensor.hpp"

namespace graphrouter::features {

// Text to fixed-dimension vector. Implementations must be deterministic and
// safe for concurrent embed() calls; identity() names the implementation and
// its settings so checkpoints can verify they are being served with the
// embedder they were trained with.
class Embedder {
public:
  virtual ~Embedder() = default;
  virtual int dim() const = 0;
  virtual numerics::Tensor embed(const std::string& text) const = 0;
  virtual std::string identity() const = 0;
};

// Feature hashing over lowercase alphanumeric tokens: each token flips one
// of dim buckets by +-1, bucket sums are averaged over tokens (the mean
// pooling matters: token order cannot affect the result) and the vector is
// L2-normalized.
inline numerics::Tensor hash_embed(const std::string& text, int dim,
                                   std::uint64_t seed) {
  if (dim <= 0)
    throw validation_error("hash_embed: dim must be positive, got " +
                           std::to_string(dim));
  if (text.empty()) throw validation_error("hash_embed: empty text");

  numerics::Tensor out = numerics::Tensor::zeros({dim});
  const std::uint64_t salt = splitmix64(seed ^ 0x5865454d42454444ULL);
  std::size_t tokens = 0;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    const std::uint64_t h = fnv1a64(token, salt ^ 0xcbf29ce484222325ULL);
    const std::int64_t bucket = std::int64_t(h % std::uint64_t(dim));
    out.at(bucket) += (h >> 63) ? 1.0 : -1.0;
    ++tokens;
    token.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c))
      token += char(std::tolower(c));
    else
      flush();
  }
  flush();
  if (tokens == 0)
    throw validation_error("hash_embed: no alphanumeric tokens in text");

  double norm = 0.0;
  for (std::int64_t i = 0; i < dim; ++i) {
    out.at(i) /= double(tokens);
    norm += out.at(i) * out.at(i);
  }
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (std::int64_t i = 0; i < dim; ++i) out.at(i) /= norm;
  } else {
    // All token signs cancelled. Deposit unit mass in a text-determined
    // bucket so the result is still a valid unit vector.
    out.at(std::int64_t(fnv1a64(text, salt) % std::uint64_t(dim))) = 1.0;
  }
  return out;
}

class HashEmbedder final : public Embedder {
public:
  explicit HashEmbedder(int dim = 64, std::uint64_t seed = 0)
      : dim_(dim), seed_(seed) {
    if (dim <= 0)
      throw validation_error("HashEmbedder: dim must be positive");
  }

  int dim() const override { return dim_; }

  numerics::Tensor embed(const std::string& text) const override {
    return hash_embed(text, dim_, seed_);
  }

  std::string identity() const override {
    return "hash64:dim=" + std::to_string(dim_) +
           ":seed=" + std::to_string(seed_);
  }

private:
  int dim_;
  std::uint64_t seed_;
};

}  // namespace graphrouter::features
