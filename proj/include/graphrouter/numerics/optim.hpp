#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "graphrouter/common/error.hpp"
#include "graphrouter/numerics/tensor.hpp"

namespace graphrouter::numerics {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moment buffers are laid out to mirror the
// parameter list passed at construction; step() expects the same list (and
// gradient order) every call.
class AdamState {
public:
  AdamState() = default;

  explicit AdamState(const std::vector<Tensor*>& params, AdamConfig cfg = {})
      : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Tensor* p : params) {
      m_.push_back(Tensor::zeros(p->shape()));
      v_.push_back(Tensor::zeros(p->shape()));
    }
  }

  // Applies one update in place. Rejects non-finite gradients before touching
  // any state, so a failed step leaves parameters and moments untouched.
  void step(const std::vector<Tensor*>& params,
            const std::vector<Tensor>& grads, double learning_rate) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw numeric_error("AdamState: got " + std::to_string(params.size()) +
                          " params and " + std::to_string(grads.size()) +
                          " grads for " + std::to_string(m_.size()) +
                          " moment buffers");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!params[i]->same_shape(grads[i]))
        throw numeric_error("AdamState: param " + std::to_string(i) +
                            " has shape " + params[i]->shape_string() +
                            " but gradient has shape " +
                            grads[i].shape_string());
      if (!grads[i].all_finite())
        throw numeric_error("AdamState: non-finite gradient for param " +
                            std::to_string(i) + "; step aborted");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& p = *params[i];
      const Tensor& g = grads[i];
      Tensor& m = m_[i];
      Tensor& v = v_[i];
      for (std::int64_t j = 0; j < p.numel(); ++j) {
        m.at(j) = cfg_.beta1 * m.at(j) + (1.0 - cfg_.beta1) * g.at(j);
        v.at(j) = cfg_.beta2 * v.at(j) + (1.0 - cfg_.beta2) * g.at(j) * g.at(j);
        const double mhat = m.at(j) / bc1;
        const double vhat = v.at(j) / bc2;
        p.at(j) -= learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
      }
    }
  }

  std::int64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

private:
  AdamConfig cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t t_ = 0;
};

// Linear decay from base_lr at step 0 to zero at total_steps. Steps past the
// schedule clamp to zero and report through warn (training that resumes past
// its budget should be loud about it).
inline double lr_at(std::int64_t step, std::int64_t total_steps, double base_lr,
                    const std::function<void(const std::string&)>& warn = {}) {
  if (total_steps <= 0)
    throw validation_error("lr_at: total_steps must be positive, got " +
                           std::to_string(total_steps));
  if (step < 0)
    throw validation_error("lr_at: negative step " + std::to_string(step));
  if (step > total_steps) {
    if (warn)
      warn("lr_at: step " + std::to_string(step) + " past schedule end " +
           std::to_string(total_steps) + "; learning rate clamped to 0");
    return 0.0;
  }
  return base_lr * (1.0 - double(step) / double(total_steps));
}

}  // namespace graphrouter::numerics
