#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "graphrouter/common/error.hpp"
#include "graphrouter/numerics/tensor.hpp"

namespace graphrouter::numerics {

using ValueId = std::int32_t;

// Gradients for every registered parameter, aligned with registration order.
// unused_params lists parameters with no path to the loss; their gradient
// entries are zero tensors of the right shape.
struct BackwardResult {
  std::vector<Tensor> param_grads;
  std::vector<std::string> unused_params;
};

// Reverse-mode tape. Operations record their inputs and a backward closure;
// backward() replays the closures from the loss down to the leaves. Values are
// immutable once recorded, so a tape can be evaluated and differentiated any
// number of times.
class Tape {
public:
  // Leaf that never receives gradients (features, masks, targets).
  ValueId constant(Tensor value) {
    return push_leaf(std::move(value), false, "constant");
  }

  // Leaf that participates in backward(). Name is reported when the
  // parameter has no path to the loss.
  ValueId parameter(Tensor value, std::string name) {
    ValueId id = push_leaf(std::move(value), true, "parameter");
    params_.emplace_back(id, std::move(name));
    return id;
  }

  const Tensor& value(ValueId id) const { return node(id).value; }

  std::size_t node_count() const { return nodes_.size(); }

  std::size_t parameter_count() const { return params_.size(); }

  // ---- elementwise ----

  ValueId add(ValueId a, ValueId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_same_shape("add", ta, tb);
    Tensor out = ta;
    for (std::int64_t i = 0; i < out.numel(); ++i) out.at(i) += tb.at(i);
    return push(std::move(out), {a, b},
                [a, b](const Tape&, const Tensor& g, Accum& acc) {
                  if (Tensor* ga = acc.slot(a))
                    for (std::int64_t i = 0; i < g.numel(); ++i)
                      ga->at(i) += g.at(i);
                  if (Tensor* gb = acc.slot(b))
                    for (std::int64_t i = 0; i < g.numel(); ++i)
                      gb->at(i) += g.at(i);
                },
                "add");
  }

  ValueId mul(ValueId a, ValueId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_same_shape("mul", ta, tb);
    Tensor out = ta;
    for (std::int64_t i = 0; i < out.numel(); ++i) out.at(i) *= tb.at(i);
    return push(std::move(out), {a, b},
                [a, b](const Tape& t, const Tensor& g, Accum& acc) {
                  const Tensor& ta = t.value(a);
                  const Tensor& tb = t.value(b);
                  if (Tensor* ga = acc.slot(a))
                    for (std::int64_t i = 0; i < g.numel(); ++i)
                      ga->at(i) += g.at(i) * tb.at(i);
                  if (Tensor* gb = acc.slot(b))
                    for (std::int64_t i = 0; i < g.numel(); ++i)
                      gb->at(i) += g.at(i) * ta.at(i);
                },
                "mul");
  }

  ValueId scale(ValueId x, double c) {
    Tensor out = value(x);
    for (std::int64_t i = 0; i < out.numel(); ++i) out.at(i) *= c;
    return push(std::move(out), {x},
                [x, c](const Tape&, const Tensor& g, Accum& acc) {
                  if (Tensor* gx = acc.slot(x))
                    for (std::int64_t i = 0; i < g.numel(); ++i)
                      gx->at(i) += g.at(i) * c;
                },
                "scale");
  }

  // Subgradient at zero is zero.
  ValueId relu(ValueId x) {
    Tensor out = value(x);
    for (std::int64_t i = 0; i < out.numel(); ++i)
      if (out.at(i) < 0.0) out.at(i) = 0.0;
    return push(std::move(out), {x},
                [x](const Tape& t, const Tensor& g, Accum& acc) {
                  if (Tensor* gx = acc.slot(x)) {
                    const Tensor& in = t.value(x);
                    for (std::int64_t i = 0; i < g.numel(); ++i)
                      if (in.at(i) > 0.0) gx->at(i) += g.at(i);
                  }
                },
                "relu");
  }

  ValueId sigmoid(ValueId x) {
    Tensor out = value(x);
    for (std::int64_t i = 0; i < out.numel(); ++i)
      out.at(i) = stable_sigmoid(out.at(i));
    ValueId id = push(std::move(out), {x}, nullptr, "sigmoid");
    // The backward rule reads the forward output, so the closure is installed
    // after the node exists and can reference its own id.
    if (nodes_.back().needs_grad)
      nodes_.back().backward = [x, id](const Tape& t, const Tensor& g,
                                       Accum& acc) {
        if (Tensor* gx = acc.slot(x)) {
          const Tensor& s = t.value(id);
          for (std::int64_t i = 0; i < g.numel(); ++i)
            gx->at(i) += g.at(i) * s.at(i) * (1.0 - s.at(i));
        }
      };
    return id;
  }

  // ---- linear algebra ----

  // (m,k)x(k,n)->(m,n); (m,k)x(k)->(m); (k)x(k,n)->(n). Use dot() for two
  // rank-1 operands.
  ValueId matmul(ValueId a, ValueId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.rank() == 1 && tb.rank() == 1)
      throw numeric_error("matmul: both operands are rank 1 " +
                          ta.shape_string() + " and " + tb.shape_string() +
                          "; use dot");
    const std::int64_t m = ta.rank() == 2 ? ta.dim(0) : 1;
    const std::int64_t k = ta.rank() == 2 ? ta.dim(1) : ta.dim(0);
    const std::int64_t kb = tb.rank() == 2 ? tb.dim(0) : tb.dim(0);
    const std::int64_t n = tb.rank() == 2 ? tb.dim(1) : 1;
    if (k != kb)
      throw numeric_error("matmul: incompatible shapes " + ta.shape_string() +
                          " and " + tb.shape_string());
    Tensor out = (ta.rank() == 2 && tb.rank() == 2) ? Tensor::zeros({m, n})
                 : ta.rank() == 1                   ? Tensor::zeros({n})
                                                    : Tensor::zeros({m});
    // Rank-1 operands alias (1,k) or (k,1) without copying.
    mat_view(out, m, n).noalias() =
        mat_cview(ta, m, k) * mat_cview(tb, k, n);
    return push(std::move(out), {a, b},
                [a, b, m, k, n](const Tape& t, const Tensor& g, Accum& acc) {
                  const Tensor& ta = t.value(a);
                  const Tensor& tb = t.value(b);
                  auto gm = mat_cview(g, m, n);
                  if (Tensor* ga = acc.slot(a))
                    mat_view(*ga, m, k).noalias() +=
                        gm * mat_cview(tb, k, n).transpose();
                  if (Tensor* gb = acc.slot(b))
                    mat_view(*gb, k, n).noalias() +=
                        mat_cview(ta, m, k).transpose() * gm;
                },
                "matmul");
  }

  ValueId transpose(ValueId x) {
    const Tensor& tx = value(x);
    require_rank("transpose", tx, 2);
    const std::int64_t r = tx.dim(0), c = tx.dim(1);
    Tensor out = Tensor::zeros({c, r});
    for (std::int64_t i = 0; i < r; ++i)
      for (std::int64_t j = 0; j < c; ++j) out.at(j, i) = tx.at(i, j);
    return push(std::move(out), {x},
                [x, r, c](const Tape&, const Tensor& g, Accum& acc) {
                  if (Tensor* gx = acc.slot(x))
                    for (std::int64_t i = 0; i < r; ++i)
                      for (std::int64_t j = 0; j < c; ++j)
                        gx->at(i, j) += g.at(j, i);
                },
                "transpose");
  }

  // X (n,d) + bias (d), broadcast over rows.
  ValueId add_row_bias(ValueId x, ValueId bias) {
    const Tensor& tx = value(x);
    const Tensor& tb = value(bias);
    require_rank("add_row_bias", tx, 2);
    require_rank("add_row_bias", tb, 1);
    if (tx.dim(1) != tb.dim(0))
      throw numeric_error("add_row_bias: incompatible shapes " +
                          tx.shape_string() + " and " + tb.shape_string());
    Tensor out = tx;
    const std::int64_t n = tx.dim(0), d = tx.dim(1);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < d; ++j) out.at(i, j) += tb.at(j);
    return push(std::move(out), {x, bias},
                [x, bias, n, d](const Tape&, const Tensor& g, Accum& acc) {
                  if (Tensor* gx = acc.slot(x))
                    for (std::int64_t i = 0; i < g.numel(); ++i)
                      gx->at(i) += g.at(i);
                  if (Tensor* gb = acc.slot(bias))
                    for (std::int64_t i = 0; i < n; ++i)
                      for (std::int64_t j = 0; j < d; ++j)
                        gb->at(j) += g.at(i, j);
                },
                "add_row_bias");
  }

  // ---- shape ops ----

  // axis 0 stacks rank-1 inputs end to end or rank-2 inputs by rows;
  // axis 1 joins rank-2 inputs side by side.
  ValueId concat(const std::vector<ValueId>& xs, int axis) {
    if (xs.empty()) throw numeric_error("concat: no inputs");
    const int rank = value(xs[0]).rank();
    for (ValueId x : xs)
      if (value(x).rank() != rank)
        throw numeric_error("concat: mixed ranks " +
                            value(xs[0]).shape_string() + " and " +
                            value(x).shape_string());
    if (rank == 1) {
      if (axis != 0) throw numeric_error("concat: rank-1 inputs need axis 0");
      std::int64_t total = 0;
      for (ValueId x : xs) total += value(x).dim(0);
      Tensor out = Tensor::zeros({total});
      std::int64_t off = 0;
      std::vector<std::int64_t> offsets;
      for (ValueId x : xs) {
        offsets.push_back(off);
        const Tensor& t = value(x);
        for (std::int64_t i = 0; i < t.dim(0); ++i) out.at(off + i) = t.at(i);
        off += t.dim(0);
      }
      return push(std::move(out), xs,
                  [xs, offsets](const Tape& t, const Tensor& g, Accum& acc) {
                    for (std::size_t p = 0; p < xs.size(); ++p)
                      if (Tensor* gx = acc.slot(xs[p])) {
                        const std::int64_t len = t.value(xs[p]).dim(0);
                        for (std::int64_t i = 0; i < len; ++i)
                          gx->at(i) += g.at(offsets[p] + i);
                      }
                  },
                  "concat");
    }
    if (axis == 0) {
      const std::int64_t cols = value(xs[0]).dim(1);
      std::int64_t rows = 0;
      for (ValueId x : xs) {
        if (value(x).dim(1) != cols)
          throw numeric_error("concat: column mismatch " +
                              value(xs[0]).shape_string() + " and " +
                              value(x).shape_string());
        rows += value(x).dim(0);
      }
      Tensor out = Tensor::zeros({rows, cols});
      std::int64_t off = 0;
      std::vector<std::int64_t> offsets;
      for (ValueId x : xs) {
        offsets.push_back(off);
        const Tensor& t = value(x);
        for (std::int64_t i = 0; i < t.numel(); ++i)
          out.at(off * cols + i) = t.at(i);
        off += t.dim(0);
      }
      return push(std::move(out), xs,
                  [xs, offsets, cols](const Tape& t, const Tensor& g,
                                      Accum& acc) {
                    for (std::size_t p = 0; p < xs.size(); ++p)
                      if (Tensor* gx = acc.slot(xs[p])) {
                        const std::int64_t n = t.value(xs[p]).numel();
                        for (std::int64_t i = 0; i < n; ++i)
                          gx->at(i) += g.at(offsets[p] * cols + i);
                      }
                  },
                  "concat");
    }
    if (axis != 1) throw numeric_error("concat: axis must be 0 or 1");
    const std::int64_t rows = value(xs[0]).dim(0);
    std::int64_t cols = 0;
    for (ValueId x : xs) {
      if (value(x).dim(0) != rows)
        throw numeric_error("concat: row mismatch " +
                            value(xs[0]).shape_string() + " and " +
                            value(x).shape_string());
      cols += value(x).dim(1);
    }
    Tensor out = Tensor::zeros({rows, cols});
    std::int64_t off = 0;
    std::vector<std::int64_t> offsets;
    for (ValueId x : xs) {
      offsets.push_back(off);
      const Tensor& t = value(x);
      for (std::int64_t i = 0; i < rows; ++i)
        for (std::int64_t j = 0; j < t.dim(1); ++j)
          out.at(i, off + j) = t.at(i, j);
      off += t.dim(1);
    }
    return push(std::move(out), xs,
                [xs, offsets, rows](const Tape& t, const Tensor& g,
                                    Accum& acc) {
                  for (std::size_t p = 0; p < xs.size(); ++p)
                    if (Tensor* gx = acc.slot(xs[p])) {
                      const std::int64_t w = t.value(xs[p]).dim(1);
                      for (std::int64_t i = 0; i < rows; ++i)
                        for (std::int64_t j = 0; j < w; ++j)
                          gx->at(i, j) += g.at(i, offsets[p] + j);
                    }
                },
                "concat");
  }

  ValueId stack_rows(const std::vector<ValueId>& xs) {
    if (xs.empty()) throw numeric_error("stack_rows: no inputs");
    const std::int64_t d = value(xs[0]).dim(0);
    for (ValueId x : xs) {
      require_rank("stack_rows", value(x), 1);
      if (value(x).dim(0) != d)
        throw numeric_error("stack_rows: length mismatch " +
                            value(xs[0]).shape_string() + " and " +
                            value(x).shape_string());
    }
    Tensor out = Tensor::zeros({static_cast<std::int64_t>(xs.size()), d});
    for (std::size_t r = 0; r < xs.size(); ++r)
      for (std::int64_t j = 0; j < d; ++j)
        out.at(static_cast<std::int64_t>(r), j) = value(xs[r]).at(j);
    return push(std::move(out), xs,
                [xs, d](const Tape&, const Tensor& g, Accum& acc) {
                  for (std::size_t r = 0; r < xs.size(); ++r)
                    if (Tensor* gx = acc.slot(xs[r]))
                      for (std::int64_t j = 0; j < d; ++j)
                        gx->at(j) += g.at(static_cast<std::int64_t>(r), j);
                },
                "stack_rows");
  }

  // ---- reductions ----

  ValueId mean_rows(ValueId x) {
    const Tensor& tx = value(x);
    require_rank("mean_rows", tx, 2);
    const std::int64_t n = tx.dim(0), d = tx.dim(1);
    if (n == 0)
      throw numeric_error(
          "mean_rows: empty input (0," + std::to_string(d) +
          "); use segment_mean for possibly empty neighbor sets");
    Tensor out = Tensor::zeros({d});
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < d; ++j) out.at(j) += tx.at(i, j);
    for (std::int64_t j = 0; j < d; ++j) out.at(j) /= double(n);
    return push(std::move(out), {x},
                [x, n, d](const Tape&, const Tensor& g, Accum& acc) {
                  if (Tensor* gx = acc.slot(x))
                    for (std::int64_t i = 0; i < n; ++i)
                      for (std::int64_t j = 0; j < d; ++j)
                        gx->at(i, j) += g.at(j) / double(n);
                },
                "mean_rows");
  }

  ValueId mean_all(ValueId x) {
    const Tensor& tx = value(x);
    const std::int64_t n = tx.numel();
    if (n == 0) throw numeric_error("mean_all: empty input");
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i) s += tx.at(i);
    return push(Tensor::scalar(s / double(n)), {x},
                [x, n](const Tape&, const Tensor& g, Accum& acc) {
                  if (Tensor* gx = acc.slot(x))
                    for (std::int64_t i = 0; i < n; ++i)
                      gx->at(i) += g.at(0) / double(n);
                },
                "mean_all");
  }

  ValueId dot(ValueId a, ValueId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_rank("dot", ta, 1);
    require_rank("dot", tb, 1);
    if (ta.dim(0) != tb.dim(0))
      throw numeric_error("dot: incompatible shapes " + ta.shape_string() +
                          " and " + tb.shape_string());
    double s = 0.0;
    for (std::int64_t i = 0; i < ta.dim(0); ++i) s += ta.at(i) * tb.at(i);
    return push(Tensor::scalar(s), {a, b},
                [a, b](const Tape& t, const Tensor& g, Accum& acc) {
                  const Tensor& ta = t.value(a);
                  const Tensor& tb = t.value(b);
                  if (Tensor* ga = acc.slot(a))
                    for (std::int64_t i = 0; i < ta.dim(0); ++i)
                      ga->at(i) += g.at(0) * tb.at(i);
                  if (Tensor* gb = acc.slot(b))
                    for (std::int64_t i = 0; i < tb.dim(0); ++i)
                      gb->at(i) += g.at(0) * ta.at(i);
                },
                "dot");
  }

  // ---- softmax family ----

  // Rank 1: softmax over the vector. Rank 2: softmax per row.
  ValueId softmax_row(ValueId x) {
    const Tensor& tx = value(x);
    Tensor out = tx;
    const std::int64_t rows = tx.rank() == 2 ? tx.dim(0) : 1;
    const std::int64_t cols = tx.rank() == 2 ? tx.dim(1) : tx.dim(0);
    if (cols == 0) throw numeric_error("softmax_row: empty rows");
    for (std::int64_t r = 0; r < rows; ++r)
      softmax_inplace(out.data() + r * cols, cols);
    ValueId id = push(std::move(out), {x}, nullptr, "softmax_row");
    if (nodes_.back().needs_grad)
      nodes_.back().backward = [x, id, rows, cols](const Tape& t,
                                                   const Tensor& g,
                                                   Accum& acc) {
        if (Tensor* gx = acc.slot(x)) {
          const Tensor& p = t.value(id);
          for (std::int64_t r = 0; r < rows; ++r) {
            double gp = 0.0;
            for (std::int64_t j = 0; j < cols; ++j)
              gp += g.at(r * cols + j) * p.at(r * cols + j);
            for (std::int64_t j = 0; j < cols; ++j)
              gx->at(r * cols + j) +=
                  p.at(r * cols + j) * (g.at(r * cols + j) - gp);
          }
        }
      };
    return id;
  }

  // Mean softmax cross-entropy over rows of logits; targets are column
  // indices. Fused for numerical stability.
  ValueId softmax_xent_rows(ValueId logits, std::vector<std::int64_t> targets) {
    const Tensor& tz = value(logits);
    require_rank("softmax_xent_rows", tz, 2);
    const std::int64_t rows = tz.dim(0), cols = tz.dim(1);
    if (static_cast<std::int64_t>(targets.size()) != rows)
      throw numeric_error("softmax_xent_rows: " + std::to_string(targets.size()) +
                          " targets for logits " + tz.shape_string());
    if (rows == 0) throw numeric_error("softmax_xent_rows: no rows");
    for (std::int64_t t : targets)
      if (t < 0 || t >= cols)
        throw numeric_error("softmax_xent_rows: target " + std::to_string(t) +
                            " out of range for logits " + tz.shape_string());
    double loss = 0.0;
    for (std::int64_t r = 0; r < rows; ++r) {
      double mx = tz.at(r, 0);
      for (std::int64_t j = 1; j < cols; ++j) mx = std::max(mx, tz.at(r, j));
      double lse = 0.0;
      for (std::int64_t j = 0; j < cols; ++j)
        lse += std::exp(tz.at(r, j) - mx);
      loss += mx + std::log(lse) - tz.at(r, targets[static_cast<std::size_t>(r)]);
    }
    loss /= double(rows);
    return push(Tensor::scalar(loss), {logits},
                [logits, targets = std::move(targets), rows, cols](
                    const Tape& t, const Tensor& g, Accum& acc) {
                  if (Tensor* gz = acc.slot(logits)) {
                    const Tensor& tz = t.value(logits);
                    const double s = g.at(0) / double(rows);
                    std::vector<double> p(static_cast<std::size_t>(cols));
                    for (std::int64_t r = 0; r < rows; ++r) {
                      for (std::int64_t j = 0; j < cols; ++j)
                        p[static_cast<std::size_t>(j)] = tz.at(r, j);
                      softmax_inplace(p.data(), cols);
                      for (std::int64_t j = 0; j < cols; ++j)
                        gz->at(r, j) += s * p[static_cast<std::size_t>(j)];
                      gz->at(r, targets[static_cast<std::size_t>(r)]) -= s;
                    }
                  }
                },
                "softmax_xent_rows");
  }

  // ---- indexed ops ----

  ValueId gather_rows(ValueId x, std::vector<std::int64_t> idx) {
    const Tensor& tx = value(x);
    require_rank("gather_rows", tx, 2);
    const std::int64_t n = tx.dim(0), d = tx.dim(1);
    for (std::int64_t i : idx)
      if (i < 0 || i >= n)
        throw numeric_error("gather_rows: index " + std::to_string(i) +
                            " out of range for " + tx.shape_string());
    Tensor out = Tensor::zeros({static_cast<std::int64_t>(idx.size()), d});
    for (std::size_t e = 0; e < idx.size(); ++e)
      for (std::int64_t j = 0; j < d; ++j)
        out.at(static_cast<std::int64_t>(e), j) = tx.at(idx[e], j);
    return push(std::move(out), {x},
                [x, idx = std::move(idx), d](const Tape&, const Tensor& g,
                                             Accum& acc) {
                  if (Tensor* gx = acc.slot(x))
                    for (std::size_t e = 0; e < idx.size(); ++e)
                      for (std::int64_t j = 0; j < d; ++j)
                        gx->at(idx[e], j) +=
                            g.at(static_cast<std::int64_t>(e), j);
                },
                "gather_rows");
  }

  // Mean of the rows of x grouped by segment id. Segments with no rows
  // produce a zero row, which is the convention for empty neighbor sets.
  ValueId segment_mean(ValueId x, std::vector<std::int64_t> segment,
                       std::int64_t n_segments) {
    const Tensor& tx = value(x);
    require_rank("segment_mean", tx, 2);
    const std::int64_t e_count = tx.dim(0), d = tx.dim(1);
    if (static_cast<std::int64_t>(segment.size()) != e_count)
      throw numeric_error("segment_mean: " + std::to_string(segment.size()) +
                          " segment ids for input " + tx.shape_string());
    if (n_segments < 0)
      throw numeric_error("segment_mean: negative segment count");
    for (std::int64_t s : segment)
      if (s < 0 || s >= n_segments)
        throw numeric_error("segment_mean: segment id " + std::to_string(s) +
                            " out of range [0," + std::to_string(n_segments) +
                            ")");
    std::vector<double> count(static_cast<std::size_t>(n_segments), 0.0);
    for (std::int64_t s : segment) count[static_cast<std::size_t>(s)] += 1.0;
    Tensor out = Tensor::zeros({n_segments, d});
    for (std::int64_t e = 0; e < e_count; ++e)
      for (std::int64_t j = 0; j < d; ++j)
        out.at(segment[static_cast<std::size_t>(e)], j) += tx.at(e, j);
    for (std::int64_t s = 0; s < n_segments; ++s)
      if (count[static_cast<std::size_t>(s)] > 0.0)
        for (std::int64_t j = 0; j < d; ++j)
          out.at(s, j) /= count[static_cast<std::size_t>(s)];
    return push(std::move(out), {x},
                [x, segment = std::move(segment), count = std::move(count), d](
                    const Tape&, const Tensor& g, Accum& acc) {
                  if (Tensor* gx = acc.slot(x))
                    for (std::size_t e = 0; e < segment.size(); ++e) {
                      const double c = count[static_cast<std::size_t>(segment[e])];
                      for (std::int64_t j = 0; j < d; ++j)
                        gx->at(static_cast<std::int64_t>(e), j) +=
                            g.at(segment[e], j) / c;
                    }
                },
                "segment_mean");
  }

  // ---- differentiation ----

  BackwardResult backward(ValueId loss) const {
    const Node& ln = node(loss);
    if (ln.value.numel() != 1)
      throw numeric_error("backward: loss must be a scalar, got shape " +
                          ln.value.shape_string());
    std::vector<Tensor> grads(nodes_.size());
    Accum acc{*this, grads};
    if (ln.needs_grad)
      grads[static_cast<std::size_t>(loss)] = Tensor::full(ln.value.shape(), 1.0);
    for (ValueId id = loss; id >= 0; --id) {
      const Node& n = nodes_[static_cast<std::size_t>(id)];
      Tensor& g = grads[static_cast<std::size_t>(id)];
      if (!n.needs_grad || !n.backward || g.numel() == 0) continue;
      n.backward(*this, g, acc);
    }
    BackwardResult result;
    result.param_grads.reserve(params_.size());
    for (const auto& [id, name] : params_) {
      Tensor& g = grads[static_cast<std::size_t>(id)];
      if (g.numel() == 0) {
        result.unused_params.push_back(name);
        result.param_grads.push_back(Tensor::zeros(node(id).value.shape()));
      } else {
        result.param_grads.push_back(std::move(g));
      }
    }
    return result;
  }

private:
  struct Accum;
  using BackFn = std::function<void(const Tape&, const Tensor&, Accum&)>;

  struct Node {
    Tensor value;
    std::vector<ValueId> parents;
    BackFn backward;
    bool needs_grad = false;
    const char* op = "";
  };

  struct Accum {
    const Tape& tape;
    std::vector<Tensor>& grads;

    // Gradient buffer for id, or nullptr if the node cannot influence any
    // parameter. Allocated lazily as zeros.
    Tensor* slot(ValueId id) {
      const Node& n = tape.node(id);
      if (!n.needs_grad) return nullptr;
      Tensor& g = grads[static_cast<std::size_t>(id)];
      if (g.numel() == 0) g = Tensor::zeros(n.value.shape());
      return &g;
    }
  };

  const Node& node(ValueId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
      throw numeric_error("Tape: invalid value id " + std::to_string(id));
    return nodes_[static_cast<std::size_t>(id)];
  }

  ValueId push_leaf(Tensor value, bool needs_grad, const char* op) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.op = op;
    nodes_.push_back(std::move(n));
    return static_cast<ValueId>(nodes_.size() - 1);
  }

  // needs_grad is inherited from the parents.
  ValueId push(Tensor value, std::vector<ValueId> parents, BackFn backward,
               const char* op) {
    bool needs_grad = false;
    for (ValueId p : parents) needs_grad = needs_grad || node(p).needs_grad;
    Node n;
    n.value = std::move(value);
    n.parents = std::move(parents);
    n.backward = needs_grad ? std::move(backward) : BackFn();
    n.needs_grad = needs_grad;
    n.op = op;
    nodes_.push_back(std::move(n));
    return static_cast<ValueId>(nodes_.size() - 1);
  }

  static void require_same_shape(const char* op, const Tensor& a,
                                 const Tensor& b) {
    if (!a.same_shape(b))
      throw numeric_error(std::string(op) + ": incompatible shapes " +
                          a.shape_string() + " and " + b.shape_string());
  }

  static void require_rank(const char* op, const Tensor& t, int rank) {
    if (t.rank() != rank)
      throw numeric_error(std::string(op) + ": expected rank " +
                          std::to_string(rank) + ", got shape " +
                          t.shape_string());
  }

  static double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  }

  static void softmax_inplace(double* p, std::int64_t n) {
    double mx = p[0];
    for (std::int64_t i = 1; i < n; ++i) mx = std::max(mx, p[i]);
    double sum = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      p[i] = std::exp(p[i] - mx);
      sum += p[i];
    }
    for (std::int64_t i = 0; i < n; ++i) p[i] /= sum;
  }

  using EigenRowMajor =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  static Eigen::Map<EigenRowMajor> mat_view(Tensor& t, std::int64_t r,
                                            std::int64_t c) {
    return Eigen::Map<EigenRowMajor>(t.data(), r, c);
  }

  static Eigen::Map<const EigenRowMajor> mat_cview(const Tensor& t,
                                                   std::int64_t r,
                                                   std::int64_t c) {
    return Eigen::Map<const EigenRowMajor>(t.data(), r, c);
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<ValueId, std::string>> params_;
};

}  // namespace graphrouter::numerics
