#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "graphrouter/common/error.hpp"
#include "graphrouter/common/rng.hpp"
#include "graphrouter/numerics/tensor.hpp"

namespace graphrouter::model {

using numerics::Tensor;

// Network shape. feat_dim is the width of the node feature vectors coming
// out of the embedder; hidden is the embedding width carried through every
// message-passing layer and the scorer.
struct ModelDims {
  int feat_dim = 64;
  int hidden = 32;
  int layers = 2;

  static constexpr int edge_dim = 2;  // [perf_norm, cost_norm]

  int layer_input_dim(int layer) const {
    return layer == 0 ? feat_dim : hidden;
  }

  void validate() const {
    if (feat_dim <= 0 || hidden <= 0 || layers <= 0)
      throw validation_error("ModelDims: feat_dim, hidden and layers must be "
                             "positive, got " +
                             std::to_string(feat_dim) + "/" +
                             std::to_string(hidden) + "/" +
                             std::to_string(layers));
  }
};

// One message-passing layer. w_xy maps the state of an x-type neighbor into
// a message for a y-type node (t=task, q=query, m=LLM); g_* lift the 2-dim
// edge features into multiplicative gates on the LLM-query messages; u_*/b_*
// apply the update to [state, aggregate].
struct LayerParams {
  Tensor w_qt, w_tq, w_mq, w_qm;
  Tensor g_mq, g_qm;
  Tensor u_t, u_q, u_m;
  Tensor b_t, b_q, b_m;

  // Canonical field order. Registration, checkpoints and the optimizer all
  // iterate parameters through this; keep it in sync with ModelIds.
  template <typename Self, typename F>
  static void for_each_impl(Self& self, const std::string& prefix, F&& f) {
    f(prefix + ".w_qt", self.w_qt);
    f(prefix + ".w_tq", self.w_tq);
    f(prefix + ".w_mq", self.w_mq);
    f(prefix + ".w_qm", self.w_qm);
    f(prefix + ".g_mq", self.g_mq);
    f(prefix + ".g_qm", self.g_qm);
    f(prefix + ".u_t", self.u_t);
    f(prefix + ".u_q", self.u_q);
    f(prefix + ".u_m", self.u_m);
    f(prefix + ".b_t", self.b_t);
    f(prefix + ".b_q", self.b_q);
    f(prefix + ".b_m", self.b_m);
  }
};

struct ModelParams {
  ModelDims dims;
  std::vector<LayerParams> layers;
  // Two-layer MLP that fuses the final task and query embeddings into the
  // routing-side vector scored against each LLM embedding.
  Tensor combine_w1, combine_b1, combine_w2, combine_b2;

  template <typename F>
  void for_each(F&& f) {
    for (std::size_t l = 0; l < layers.size(); ++l)
      LayerParams::for_each_impl(layers[l], "layer" + std::to_string(l), f);
    f("combine.w1", combine_w1);
    f("combine.b1", combine_b1);
    f("combine.w2", combine_w2);
    f("combine.b2", combine_b2);
  }

  template <typename F>
  void for_each(F&& f) const {
    for (std::size_t l = 0; l < layers.size(); ++l)
      LayerParams::for_each_impl(layers[l], "layer" + std::to_string(l), f);
    f("combine.w1", combine_w1);
    f("combine.b1", combine_b1);
    f("combine.w2", combine_w2);
    f("combine.b2", combine_b2);
  }

  std::vector<std::pair<std::string, Tensor*>> named_tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for_each([&](const std::string& name, Tensor& t) {
      out.emplace_back(name, &t);
    });
    return out;
  }

  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const {
    std::vector<std::pair<std::string, const Tensor*>> out;
    for_each([&](const std::string& name, const Tensor& t) {
      out.emplace_back(name, &t);
    });
    return out;
  }

  std::vector<Tensor*> tensors() {
    std::vector<Tensor*> out;
    for_each([&](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
  }

  // Weights start uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases at
  // zero. Every tensor draws from its own named stream, so the values of one
  // tensor never depend on how many others exist.
  static ModelParams init(const ModelDims& dims, std::uint64_t seed) {
    dims.validate();
    ModelParams p;
    p.dims = dims;
    const int h = dims.hidden;
    p.layers.resize(static_cast<std::size_t>(dims.layers));
    for (int l = 0; l < dims.layers; ++l) {
      const int d = dims.layer_input_dim(l);
      LayerParams& L = p.layers[static_cast<std::size_t>(l)];
      L.w_qt = Tensor::zeros({d, h});
      L.w_tq = Tensor::zeros({d, h});
      L.w_mq = Tensor::zeros({d, h});
      L.w_qm = Tensor::zeros({d, h});
      L.g_mq = Tensor::zeros({ModelDims::edge_dim, h});
      L.g_qm = Tensor::zeros({ModelDims::edge_dim, h});
      L.u_t = Tensor::zeros({d + h, h});
      L.u_q = Tensor::zeros({d + h, h});
      L.u_m = Tensor::zeros({d + h, h});
      L.b_t = Tensor::zeros({h});
      L.b_q = Tensor::zeros({h});
      L.b_m = Tensor::zeros({h});
    }
    p.combine_w1 = Tensor::zeros({2 * h, h});
    p.combine_b1 = Tensor::zeros({h});
    p.combine_w2 = Tensor::zeros({h, h});
    p.combine_b2 = Tensor::zeros({h});

    p.for_each([&](const std::string& name, Tensor& t) {
      if (t.rank() != 2) return;  // biases stay zero
      Rng rng(mix_seed(seed, "init." + name));
      const double bound = 1.0 / std::sqrt(static_cast<double>(t.dim(0)));
      for (std::int64_t i = 0; i < t.numel(); ++i)
        t.at(i) = rng.uniform(-bound, bound);
    });
    return p;
  }

  // Fingerprint of the dims plus every parameter byte; used to tell
  // checkpoints apart and to assert byte-level reproducibility.
  std::uint64_t content_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix_u64 = [&h](std::uint64_t v) {
      for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 1099511628211ull;
      }
    };
    mix_u64(static_cast<std::uint64_t>(dims.feat_dim));
    mix_u64(static_cast<std::uint64_t>(dims.hidden));
    mix_u64(static_cast<std::uint64_t>(dims.layers));
    for_each([&](const std::string& name, const Tensor& t) {
      h = fnv1a64(name, h);
      for (std::int64_t d : t.shape()) mix_u64(static_cast<std::uint64_t>(d));
      for (std::int64_t i = 0; i < t.numel(); ++i) {
        std::uint64_t bits;
        const double x = t.at(i);
        std::memcpy(&bits, &x, sizeof bits);
        mix_u64(bits);
      }
    });
    return h;
  }
};

}  // namespace graphrouter::model
