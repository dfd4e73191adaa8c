#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "l2x/error.hpp"

namespace l2x {

class Tensor;

namespace detail {

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

// Per-backward-call adjoint buffers. Gradients are propagated through this
// map and only merged into the persistent grad buffers at the end, so a
// second backward call adds exactly one more copy of the gradient.
using AdjointMap = std::unordered_map<const TensorNode*, std::vector<double>>;

struct TensorNode {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated on first use, same length as data
  bool requires_grad = false;
  const char* op = "";  // empty for leaves
  std::vector<NodePtr> parents;
  std::function<void(const std::vector<double>&, AdjointMap&)> backward;

  std::size_t numel() const { return data.size(); }
};

inline std::vector<double>& adjoint_slot(AdjointMap& adj, const TensorNode* n) {
  auto& v = adj[n];
  if (v.empty()) v.assign(n->data.size(), 0.0);
  return v;
}

inline std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

inline std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace detail

// Dense row-major 64-bit float tensor with a recorded operation graph for
// reverse-mode differentiation. Value-semantic handle onto a shared node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
    return from_data(std::move(shape), {}, requires_grad);
  }

  static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false) {
    auto node = std::make_shared<detail::TensorNode>();
    node->data.assign(detail::shape_numel(shape), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data,
                          bool requires_grad = false) {
    const std::size_t n = detail::shape_numel(shape);
    if (data.empty()) data.assign(n, 0.0);
    if (data.size() != n) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + detail::shape_str(shape));
    }
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return from_data({1}, {value}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->data.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::vector<double>& data() { return node_->data; }
  const std::vector<double>& data() const { return node_->data; }

  // Lazily allocated, zero-initialized gradient buffer.
  std::vector<double>& grad() {
    if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
    return node_->grad;
  }
  const std::vector<double>& grad() const {
    return const_cast<Tensor*>(this)->grad();
  }

  void zero_grad() {
    if (!node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
  }

  double item() const {
    if (numel() != 1) {
      throw ContractError("item() expects a scalar tensor, got shape " +
                          detail::shape_str(node_->shape));
    }
    return node_->data[0];
  }

  double at(std::size_t i) const { return node_->data[i]; }
  double at(std::size_t i, std::size_t j) const {
    return node_->data[i * node_->shape[1] + j];
  }
  double& at(std::size_t i, std::size_t j) {
    return node_->data[i * node_->shape[1] + j];
  }

  const detail::TensorNode* node() const { return node_.get(); }

  // Builds a tensor from an op result. Library extension point: gnn layers
  // register custom ops (e.g. per-edge inner products) through this.
  static Tensor make_op(std::vector<std::size_t> shape, std::vector<double> data,
                        std::vector<Tensor> parents, const char* op_name,
                        std::function<void(const std::vector<double>&, detail::AdjointMap&)> bw) {
    auto node = std::make_shared<detail::TensorNode>();
    const std::size_t n = detail::shape_numel(shape);
    if (data.size() != n) {
      throw DimensionError(std::string(op_name) + ": result data length mismatch");
    }
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->op = op_name;
    bool req = false;
    node->parents.reserve(parents.size());
    for (auto& p : parents) {
      req = req || p.node_->requires_grad;
      node->parents.push_back(p.node_);
    }
    node->requires_grad = req;
    if (req) node->backward = std::move(bw);
    return Tensor(std::move(node));
  }

 private:
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}

  detail::NodePtr node_;
};

namespace detail {

// Postorder DFS; parents appear before the nodes that use them, root last.
// The visited set guarantees each node is emitted exactly once, which is
// also what makes gradient accumulation over shared subexpressions correct.
inline std::vector<const TensorNode*> topo_order(const TensorNode* root) {
  std::vector<const TensorNode*> order;
  std::unordered_set<const TensorNode*> visited;
  std::vector<std::pair<const TensorNode*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const TensorNode* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace detail

// Runs the reverse traversal and returns the adjoint of every reachable
// requires_grad node without touching persistent grad buffers. Used by the
// training loop to keep per-graph gradient contributions separable.
inline detail::AdjointMap compute_adjoints(const Tensor& root) {
  if (root.numel() != 1) {
    throw ContractError("backward expects a scalar root, got shape " +
                        detail::shape_str(root.shape()));
  }
  detail::AdjointMap adj;
  if (!root.requires_grad()) return adj;
  const auto order = detail::topo_order(root.node());
  detail::adjoint_slot(adj, root.node())[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const detail::TensorNode* node = *it;
    if (!node->backward) continue;
    auto found = adj.find(node);
    if (found == adj.end()) continue;
    node->backward(found->second, adj);
  }
  return adj;
}

// Accumulates d(root)/d(ancestor) into every requires_grad ancestor's grad
// buffer. Repeated calls accumulate; callers zero grads between steps.
inline void backward(const Tensor& root) {
  detail::AdjointMap adj = compute_adjoints(root);
  for (auto& [node, g] : adj) {
    auto* mutable_node = const_cast<detail::TensorNode*>(node);
    if (!mutable_node->requires_grad) continue;
    if (mutable_node->grad.empty()) mutable_node->grad.assign(mutable_node->data.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) mutable_node->grad[i] += g[i];
  }
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw DimensionError("matmul: incompatible shapes " + detail::shape_str(sa) + " and " +
                         detail::shape_str(sb));
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  std::vector<double> out(m * n, 0.0);
  {
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = out.data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double av = pa[i * k + p];
        if (av == 0.0) continue;
        const double* brow = pb + p * n;
        double* crow = pc + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
  const detail::TensorNode* na = a.node();
  const detail::TensorNode* nb = b.node();
  return Tensor::make_op(
      {m, n}, std::move(out), {a, b}, "matmul",
      [na, nb, m, k, n](const std::vector<double>& g, detail::AdjointMap& adj) {
        if (na->requires_grad) {
          auto& ga = detail::adjoint_slot(adj, na);
          const double* pb = nb->data.data();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double s = 0.0;
              const double* grow = g.data() + i * n;
              const double* brow = pb + p * n;
              for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
              ga[i * k + p] += s;
            }
          }
        }
        if (nb->requires_grad) {
          auto& gb = detail::adjoint_slot(adj, nb);
          const double* pa = na->data.data();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const double av = pa[i * k + p];
              if (av == 0.0) continue;
              const double* grow = g.data() + i * n;
              double* brow = gb.data() + p * n;
              for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
            }
          }
        }
      });
}

namespace detail {

enum class EwKind { add, mul };

inline Tensor elementwise_impl(const Tensor& a, const Tensor& b, EwKind kind) {
  const char* name = kind == EwKind::add ? "add" : "mul";
  const bool same_shape = a.shape() == b.shape();
  const bool a_scalar = !same_shape && a.numel() == 1;
  const bool b_scalar = !same_shape && !a_scalar && b.numel() == 1;
  if (!same_shape && !a_scalar && !b_scalar) {
    throw DimensionError(std::string(name) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
  // A scalar operand broadcasts over the other tensor; anything richer is
  // out of contract.
  const Tensor& big = a_scalar ? b : a;
  std::vector<double> out(big.numel());
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  if (kind == EwKind::add) {
    if (a_scalar) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[0] + pb[i];
    } else if (b_scalar) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[0];
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[i];
    }
  } else {
    if (a_scalar) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[0] * pb[i];
    } else if (b_scalar) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pb[0];
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pb[i];
    }
  }
  const TensorNode* na = a.node();
  const TensorNode* nb = b.node();
  return Tensor::make_op(
      big.shape(), std::move(out), {a, b}, name,
      [na, nb, kind, a_scalar, b_scalar](const std::vector<double>& g, AdjointMap& adj) {
        auto deposit = [&](const TensorNode* target, const TensorNode* other, bool is_scalar) {
          if (!target->requires_grad) return;
          auto& gt = adjoint_slot(adj, target);
          if (kind == EwKind::add) {
            if (is_scalar) {
              double s = 0.0;
              for (double v : g) s += v;
              gt[0] += s;
            } else {
              for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
            }
          } else {
            const double* po = other->data.data();
            const bool other_scalar = other->data.size() == 1 && g.size() != 1;
            if (is_scalar) {
              double s = 0.0;
              for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * po[i];
              gt[0] += s;
            } else if (other_scalar) {
              for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i] * po[0];
            } else {
              for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i] * po[i];
            }
          }
        };
        deposit(na, nb, a_scalar);
        deposit(nb, na, b_scalar);
      });
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::elementwise_impl(a, b, detail::EwKind::add);
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::elementwise_impl(a, b, detail::EwKind::mul);
}

inline Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  const double* pa = a.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] > 0.0 ? pa[i] : 0.0;
  const detail::TensorNode* na = a.node();
  return Tensor::make_op(a.shape(), std::move(out), {a}, "relu",
                         [na](const std::vector<double>& g, detail::AdjointMap& adj) {
                           if (!na->requires_grad) return;
                           auto& ga = detail::adjoint_slot(adj, na);
                           const double* pa = na->data.data();
                           // subgradient at exactly 0 is 0
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             if (pa[i] > 0.0) ga[i] += g[i];
                           }
                         });
}

// Reduction over all elements (axis empty) or a single axis.
inline Tensor reduce(const Tensor& a, bool mean, std::optional<std::size_t> axis) {
  const auto& shape = a.shape();
  if (!axis.has_value()) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    const double denom = mean ? static_cast<double>(a.numel()) : 1.0;
    const detail::TensorNode* na = a.node();
    return Tensor::make_op({1}, {s / denom}, {a}, mean ? "mean" : "sum",
                           [na, denom](const std::vector<double>& g, detail::AdjointMap& adj) {
                             if (!na->requires_grad) return;
                             auto& ga = detail::adjoint_slot(adj, na);
                             const double u = g[0] / denom;
                             for (double& v : ga) v += u;
                           });
  }
  const std::size_t ax = *axis;
  if (ax >= shape.size()) {
    throw DimensionError("reduce: axis " + std::to_string(ax) + " out of range for shape " +
                         detail::shape_str(shape));
  }
  std::size_t pre = 1, post = 1;
  for (std::size_t i = 0; i < ax; ++i) pre *= shape[i];
  for (std::size_t i = ax + 1; i < shape.size(); ++i) post *= shape[i];
  const std::size_t extent = shape[ax];
  std::vector<std::size_t> out_shape;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != ax) out_shape.push_back(shape[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  std::vector<double> out(pre * post, 0.0);
  const double* pa = a.data().data();
  for (std::size_t p = 0; p < pre; ++p) {
    for (std::size_t e = 0; e < extent; ++e) {
      const double* src = pa + (p * extent + e) * post;
      double* dst = out.data() + p * post;
      for (std::size_t q = 0; q < post; ++q) dst[q] += src[q];
    }
  }
  const double denom = mean ? static_cast<double>(extent) : 1.0;
  if (mean) {
    for (double& v : out) v /= denom;
  }
  const detail::TensorNode* na = a.node();
  return Tensor::make_op(
      std::move(out_shape), std::move(out), {a}, mean ? "mean" : "sum",
      [na, pre, post, extent, denom](const std::vector<double>& g, detail::AdjointMap& adj) {
        if (!na->requires_grad) return;
        auto& ga = detail::adjoint_slot(adj, na);
        for (std::size_t p = 0; p < pre; ++p) {
          for (std::size_t e = 0; e < extent; ++e) {
            double* dst = ga.data() + (p * extent + e) * post;
            const double* src = g.data() + p * post;
            for (std::size_t q = 0; q < post; ++q) dst[q] += src[q] / denom;
          }
        }
      });
}

inline Tensor reduce_sum(const Tensor& a, std::optional<std::size_t> axis = std::nullopt) {
  return reduce(a, false, axis);
}

inline Tensor reduce_mean(const Tensor& a, std::optional<std::size_t> axis = std::nullopt) {
  return reduce(a, true, axis);
}

inline Tensor reshape(const Tensor& a, std::vector<std::size_t> new_shape) {
  if (detail::shape_numel(new_shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + detail::shape_str(a.shape()) + " as " +
                         detail::shape_str(new_shape));
  }
  const detail::TensorNode* na = a.node();
  return Tensor::make_op(std::move(new_shape), a.data(), {a}, "reshape",
                         [na](const std::vector<double>& g, detail::AdjointMap& adj) {
                           if (!na->requires_grad) return;
                           auto& ga = detail::adjoint_slot(adj, na);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                         });
}

// Stable log-sum-exp cross entropy for a single C-class example.
// loss = logsumexp(logits) - logits[label]; gradient is softmax - onehot.
inline Tensor softmax_cross_entropy(const Tensor& logits, std::size_t label) {
  const std::size_t c = logits.numel();
  if (label >= c) {
    throw ContractError("softmax_cross_entropy: label " + std::to_string(label) +
                        " out of range for " + std::to_string(c) + " classes");
  }
  const double* p = logits.data().data();
  double mx = p[0];
  for (std::size_t i = 0; i < c; ++i) {
    if (!std::isfinite(p[i])) throw NumericError("softmax_cross_entropy: non-finite logit");
    mx = std::max(mx, p[i]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < c; ++i) sum += std::exp(p[i] - mx);
  const double lse = mx + std::log(sum);
  const double loss = lse - p[label];
  const detail::TensorNode* nl = logits.node();
  return Tensor::make_op({1}, {loss}, {logits}, "softmax_cross_entropy",
                         [nl, label, lse](const std::vector<double>& g, detail::AdjointMap& adj) {
                           if (!nl->requires_grad) return;
                           auto& gl = detail::adjoint_slot(adj, nl);
                           const double* p = nl->data.data();
                           for (std::size_t i = 0; i < gl.size(); ++i) {
                             double grad = std::exp(p[i] - lse);
                             if (i == label) grad -= 1.0;
                             gl[i] += g[0] * grad;
                           }
                         });
}

}  // namespace l2x
