#pragma once

// Tensor-level reverse-mode automatic differentiation. Every op returns a new
// node that remembers its parents and how to push its gradient back to them.
// Recording can be switched off per thread with NoGradGuard for inference.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "setoie/errors.hpp"

namespace setoie::nn {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0)
      : shape(std::move(s)), data(element_count(shape), fill) {}
  Tensor(std::vector<std::size_t> s, std::vector<double> values)
      : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != element_count(shape)) throw ShapeError("tensor data does not match shape");
  }

  static std::size_t element_count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }
  std::size_t size() const noexcept { return data.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.size() > 1 ? shape.at(1) : 1; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
};

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  bool requires_grad = false;
  std::vector<Var> parents;
  // Reads this node's value.grad and accumulates into the parents.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const noexcept { return parents.empty(); }
  std::vector<double>& grad() {
    if (value.grad.size() != value.data.size()) value.grad.assign(value.data.size(), 0.0);
    return value.grad;
  }
};

namespace detail {
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline bool grad_enabled() { return detail::grad_mode(); }

inline Var parameter(Tensor t) {
  auto node = std::make_shared<Node>();
  node->value = std::move(t);
  node->requires_grad = true;
  return node;
}

inline Var constant(Tensor t) {
  auto node = std::make_shared<Node>();
  node->value = std::move(t);
  return node;
}

inline void zero_grad(std::span<const Var> params) {
  for (const auto& p : params) std::fill(p->grad().begin(), p->grad().end(), 0.0);
}

namespace detail {

// Wires a freshly computed value into the graph when any input needs a gradient.
inline Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (grad_enabled() &&
      std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v->requires_grad; })) {
    node->requires_grad = true;
    node->parents = std::move(inputs);
    node->backward_fn = std::move(fn);
  }
  return node;
}

inline void require_2d(const Var& v, const char* op) {
  if (!v || v->value.shape.size() != 2) throw ShapeError(std::string(op) + ": expected a 2-D tensor");
}

}  // namespace detail

// Runs reverse accumulation from root. Gradients of intermediate nodes are
// recomputed from scratch; gradients of leaves accumulate across calls.
inline void backward(const Var& root, std::span<const double> seed = {}) {
  if (!root) throw GraphError("backward on an empty variable");
  if (!root->requires_grad) throw GraphError("backward called before a graph was recorded");

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, bool>> stack{{root.get(), false}};
  while (!stack.empty()) {
    auto [node, expanded] = stack.back();
    stack.pop_back();
    if (expanded) {
      order.push_back(node);
      continue;
    }
    if (!seen.insert(node).second) continue;
    stack.push_back({node, true});
    for (const auto& p : node->parents)
      if (p->requires_grad && !seen.count(p.get())) stack.push_back({p.get(), false});
  }

  for (Node* n : order)
    if (!n->is_leaf()) std::fill(n->grad().begin(), n->grad().end(), 0.0);

  auto& g = root->grad();
  if (seed.empty()) {
    if (root->value.size() != 1)
      throw GraphError("backward from a non-scalar needs an explicit seed gradient");
    g[0] += 1.0;
  } else {
    if (seed.size() != g.size()) throw ShapeError("seed gradient does not match root shape");
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
  }

  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

// ---- elementwise ----------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  if (a->value.shape != b->value.shape) throw ShapeError("add: shape mismatch");
  Tensor out(a->value.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a->value.data[i] + b->value.data[i];
  return detail::make_result(std::move(out), {a, b}, [a, b](Node& self) {
    const auto& g = self.value.grad;
    if (a->requires_grad)
      for (std::size_t i = 0; i < g.size(); ++i) a->grad()[i] += g[i];
    if (b->requires_grad)
      for (std::size_t i = 0; i < g.size(); ++i) b->grad()[i] += g[i];
  });
}

inline Var mul(const Var& a, const Var& b) {
  if (a->value.shape != b->value.shape) throw ShapeError("mul: shape mismatch");
  Tensor out(a->value.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a->value.data[i] * b->value.data[i];
  return detail::make_result(std::move(out), {a, b}, [a, b](Node& self) {
    const auto& g = self.value.grad;
    if (a->requires_grad)
      for (std::size_t i = 0; i < g.size(); ++i) a->grad()[i] += g[i] * b->value.data[i];
    if (b->requires_grad)
      for (std::size_t i = 0; i < g.size(); ++i) b->grad()[i] += g[i] * a->value.data[i];
  });
}

inline Var scale(const Var& a, double s) {
  Tensor out(a->value.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a->value.data[i] * s;
  return detail::make_result(std::move(out), {a}, [a, s](Node& self) {
    const auto& g = self.value.grad;
    for (std::size_t i = 0; i < g.size(); ++i) a->grad()[i] += g[i] * s;
  });
}

inline Var relu(const Var& a) {
  Tensor out(a->value.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = std::max(0.0, a->value.data[i]);
  return detail::make_result(std::move(out), {a}, [a](Node& self) {
    const auto& g = self.value.grad;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (a->value.data[i] > 0.0) a->grad()[i] += g[i];
  });
}

inline Var sum(const Var& a) {
  Tensor out({1}, std::accumulate(a->value.data.begin(), a->value.data.end(), 0.0));
  return detail::make_result(std::move(out), {a}, [a](Node& self) {
    const double g = self.value.grad[0];
    for (auto& x : a->grad()) x += g;
  });
}

inline Var reshape(const Var& a, std::vector<std::size_t> shape) {
  if (Tensor::element_count(shape) != a->value.size()) throw ShapeError("reshape: size mismatch");
  Tensor out(std::move(shape), a->value.data);
  return detail::make_result(std::move(out), {a}, [a](Node& self) {
    const auto& g = self.value.grad;
    for (std::size_t i = 0; i < g.size(); ++i) a->grad()[i] += g[i];
  });
}

// ---- matrix ops -----------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  detail::require_2d(a, "matmul");
  detail::require_2d(b, "matmul");
  const std::size_t n = a->value.rows(), k = a->value.cols(), m = b->value.cols();
  if (b->value.rows() != k) throw ShapeError("matmul: inner dimensions differ");
  Tensor out({n, m});
  const double* A = a->value.data.data();
  const double* B = b->value.data.data();
  double* C = out.data.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) C[i * m + j] += av * B[p * m + j];
    }
  return detail::make_result(std::move(out), {a, b}, [a, b, n, k, m](Node& self) {
    const double* G = self.value.grad.data();
    if (a->requires_grad) {
      auto& ga = a->grad();
      const double* B = b->value.data.data();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < m; ++j) s += G[i * m + j] * B[p * m + j];
          ga[i * k + p] += s;
        }
    }
    if (b->requires_grad) {
      auto& gb = b->grad();
      const double* A = a->value.data.data();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < m; ++j) gb[p * m + j] += av * G[i * m + j];
        }
    }
  });
}

inline Var transpose(const Var& a) {
  detail::require_2d(a, "transpose");
  const std::size_t r = a->value.rows(), c = a->value.cols();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.data[j * r + i] = a->value.data[i * c + j];
  return detail::make_result(std::move(out), {a}, [a, r, c](Node& self) {
    const auto& g = self.value.grad;
    auto& ga = a->grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
}

// x (R x C) + bias (C) broadcast over rows.
inline Var add_row(const Var& x, const Var& bias) {
  detail::require_2d(x, "add_row");
  const std::size_t r = x->value.rows(), c = x->value.cols();
  if (bias->value.size() != c) throw ShapeError("add_row: bias width mismatch");
  Tensor out(x->value.shape);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] = x->value.data[i * c + j] + bias->value.data[j];
  return detail::make_result(std::move(out), {x, bias}, [x, bias, r, c](Node& self) {
    const auto& g = self.value.grad;
    if (x->requires_grad)
      for (std::size_t i = 0; i < g.size(); ++i) x->grad()[i] += g[i];
    if (bias->requires_grad) {
      auto& gb = bias->grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
    }
  });
}

// Softmax over the last axis of a 2-D tensor.
inline Var softmax_rows(const Var& a) {
  detail::require_2d(a, "softmax_rows");
  const std::size_t r = a->value.rows(), c = a->value.cols();
  Tensor out(a->value.shape);
  for (std::size_t i = 0; i < r; ++i) {
    const double* in = &a->value.data[i * c];
    double* o = &out.data[i * c];
    const double mx = *std::max_element(in, in + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      o[j] = std::exp(in[j] - mx);
      s += o[j];
    }
    for (std::size_t j = 0; j < c; ++j) o[j] /= s;
  }
  return detail::make_result(std::move(out), {a}, [a, r, c](Node& self) {
    const auto& y = self.value.data;
    const auto& g = self.value.grad;
    auto& ga = a->grad();
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
    }
  });
}

// Row-wise layer normalization with learned gain and bias.
inline Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5) {
  detail::require_2d(x, "layer_norm_rows");
  const std::size_t r = x->value.rows(), c = x->value.cols();
  if (gain->value.size() != c || bias->value.size() != c)
    throw ShapeError("layer_norm_rows: parameter width mismatch");
  Tensor out(x->value.shape);
  std::vector<double> xhat(r * c), inv_std(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double* in = &x->value.data[i * c];
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += in[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (in[j] - mean) * inv_std[i];
      out.data[i * c + j] = xhat[i * c + j] * gain->value.data[j] + bias->value.data[j];
    }
  }
  return detail::make_result(
      std::move(out), {x, gain, bias},
      [x, gain, bias, r, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        const auto& g = self.value.grad;
        if (gain->requires_grad || bias->requires_grad) {
          auto& gg = gain->grad();
          auto& gbias = bias->grad();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) {
              if (gain->requires_grad) gg[j] += g[i * c + j] * xhat[i * c + j];
              if (bias->requires_grad) gbias[j] += g[i * c + j];
            }
        }
        if (x->requires_grad) {
          auto& gx = x->grad();
          const double inv_c = 1.0 / static_cast<double>(c);
          for (std::size_t i = 0; i < r; ++i) {
            double sum_d = 0.0, sum_dx = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double d = g[i * c + j] * gain->value.data[j];
              sum_d += d;
              sum_dx += d * xhat[i * c + j];
            }
            for (std::size_t j = 0; j < c; ++j) {
              const double d = g[i * c + j] * gain->value.data[j];
              gx[i * c + j] += inv_std[i] * (d - inv_c * sum_d - xhat[i * c + j] * inv_c * sum_dx);
            }
          }
        }
      });
}

// Gathers rows of table (V x H) by id.
inline Var embedding(const Var& table, std::span<const std::size_t> ids) {
  detail::require_2d(table, "embedding");
  const std::size_t vocab = table->value.rows(), h = table->value.cols();
  Tensor out({ids.size(), h});
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= vocab) throw ShapeError("embedding: id out of range");
    std::copy_n(&table->value.data[rows[i] * h], h, &out.data[i * h]);
  }
  return detail::make_result(std::move(out), {table}, [table, rows = std::move(rows), h](Node& self) {
    const auto& g = self.value.grad;
    auto& gt = table->grad();
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < h; ++j) gt[rows[i] * h + j] += g[i * h + j];
  });
}

}  // namespace setoie::nn
