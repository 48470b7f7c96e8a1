#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "scgan/tensor.hpp"

namespace scgan {

// Reverse-mode autodiff over Tensor<S>. Each op records a closure that pulls
// the node's accumulated gradient and pushes contributions into its parents.
// Graphs are built per step and dropped when the last Var goes out of scope;
// leaves (parameters) keep their grad buffers across graph lifetimes.
template <typename S>
struct Node {
  Tensor<S> value;
  Tensor<S> grad;  // empty until first contribution
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<S>>> parents;
  std::function<void(Node<S>&)> backprop;

  Tensor<S>& ensure_grad() {
    if (grad.empty()) grad = Tensor<S>(value.shape());
    return grad;
  }
};

template <typename S>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<S>> n) : n_(std::move(n)) {}

  static Var constant(Tensor<S> v) {
    auto n = std::make_shared<Node<S>>();
    n->value = std::move(v);
    return Var(n);
  }

  static Var leaf(Tensor<S> v) {
    auto n = std::make_shared<Node<S>>();
    n->value = std::move(v);
    n->requires_grad = true;
    return Var(n);
  }

  const Tensor<S>& value() const { return n_->value; }
  Tensor<S>& value() { return n_->value; }
  const Tensor<S>& grad() const { return n_->grad; }
  bool requires_grad() const { return n_ && n_->requires_grad; }
  const Shape& shape() const { return n_->value.shape(); }
  bool defined() const { return static_cast<bool>(n_); }

  // scalar convenience
  S item() const {
    SCGAN_CHECK(n_->value.size() == 1, "item() on non-scalar ", shape_str(shape()));
    return n_->value[0];
  }

  void clear_grad() { n_->grad = Tensor<S>(); }

  std::shared_ptr<Node<S>> node() const { return n_; }

 private:
  std::shared_ptr<Node<S>> n_;
};

namespace detail {

template <typename S>
std::shared_ptr<Node<S>> make_op(Tensor<S> value, std::vector<std::shared_ptr<Node<S>>> parents,
                                 std::function<void(Node<S>&)> backprop) {
  auto n = std::make_shared<Node<S>>();
  n->value = std::move(value);
  for (const auto& p : parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return n;
}

template <typename S>
std::vector<Node<S>*> topo_order(Node<S>* root) {
  std::vector<Node<S>*> order;
  std::unordered_set<Node<S>*> seen;
  std::vector<std::pair<Node<S>*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<S>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents before children; walk in reverse to backprop
}

}  // namespace detail

// Backpropagate from a scalar root. Gradients accumulate into every reachable
// node that requires them; leaves keep theirs until explicitly cleared.
template <typename S>
void backward(const Var<S>& root) {
  Node<S>* r = root.node().get();
  SCGAN_CHECK(r->value.size() == 1, "backward() root must be scalar, got ", shape_str(r->value.shape()));
  if (!r->requires_grad) return;
  r->ensure_grad()[0] += S(1);
  auto order = detail::topo_order(r);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<S>* n = *it;
    if (n->backprop && !n->grad.empty()) n->backprop(*n);
  }
}

// ---- elementwise ----

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  SCGAN_CHECK(a.value().same_shape(b.value()), "add: shape mismatch");
  Tensor<S> out(a.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  auto pa = a.node(), pb = b.node();
  return Var<S>(detail::make_op<S>(std::move(out), {pa, pb}, [pa, pb](Node<S>& self) {
    if (pa->requires_grad) {
      auto& g = pa->ensure_grad();
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->ensure_grad();
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  }));
}

template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  SCGAN_CHECK(a.value().same_shape(b.value()), "sub: shape mismatch");
  Tensor<S> out(a.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  auto pa = a.node(), pb = b.node();
  return Var<S>(detail::make_op<S>(std::move(out), {pa, pb}, [pa, pb](Node<S>& self) {
    if (pa->requires_grad) {
      auto& g = pa->ensure_grad();
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->ensure_grad();
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  }));
}

template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  SCGAN_CHECK(a.value().same_shape(b.value()), "mul: shape mismatch");
  Tensor<S> out(a.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  auto pa = a.node(), pb = b.node();
  return Var<S>(detail::make_op<S>(std::move(out), {pa, pb}, [pa, pb](Node<S>& self) {
    if (pa->requires_grad) {
      auto& g = pa->ensure_grad();
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      auto& g = pb->ensure_grad();
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->value[i];
    }
  }));
}

// y = scale * x + shift
template <typename S>
Var<S> affine(const Var<S>& x, S scale, S shift) {
  Tensor<S> out(x.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = scale * x.value()[i] + shift;
  auto px = x.node();
  return Var<S>(detail::make_op<S>(std::move(out), {px}, [px, scale](Node<S>& self) {
    auto& g = px->ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += scale * self.grad[i];
  }));
}

template <typename S>
Var<S> neg(const Var<S>& x) {
  return affine(x, S(-1), S(0));
}

template <typename S>
Var<S> relu(const Var<S>& x) {
  Tensor<S> out(x.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] > S(0) ? x.value()[i] : S(0);
  auto px = x.node();
  return Var<S>(detail::make_op<S>(std::move(out), {px}, [px](Node<S>& self) {
    auto& g = px->ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i)
      if (px->value[i] > S(0)) g[i] += self.grad[i];
  }));
}

template <typename S>
Var<S> tanh_op(const Var<S>& x) {
  Tensor<S> out(x.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.value()[i]);
  auto px = x.node();
  return Var<S>(detail::make_op<S>(std::move(out), {px}, [px](Node<S>& self) {
    auto& g = px->ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i) {
      const S t = self.value[i];
      g[i] += self.grad[i] * (S(1) - t * t);
    }
  }));
}

// |x| with subgradient 0 at the kink
template <typename S>
Var<S> abs_op(const Var<S>& x) {
  Tensor<S> out(x.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::abs(x.value()[i]);
  auto px = x.node();
  return Var<S>(detail::make_op<S>(std::move(out), {px}, [px](Node<S>& self) {
    auto& g = px->ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i) {
      const S v = px->value[i];
      if (v > S(0))
        g[i] += self.grad[i];
      else if (v < S(0))
        g[i] -= self.grad[i];
    }
  }));
}

// ---- reductions / reshapes ----

template <typename S>
Var<S> sum_all(const Var<S>& x) {
  S acc = 0;
  for (std::int64_t i = 0; i < x.value().size(); ++i) acc += x.value()[i];
  Tensor<S> out(Shape{1});
  out[0] = acc;
  auto px = x.node();
  return Var<S>(detail::make_op<S>(std::move(out), {px}, [px](Node<S>& self) {
    auto& g = px->ensure_grad();
    const S up = self.grad[0];
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += up;
  }));
}

template <typename S>
Var<S> mean_all(const Var<S>& x) {
  SCGAN_CHECK(x.value().size() > 0, "mean_all: empty tensor");
  return affine(sum_all(x), S(1) / static_cast<S>(x.value().size()), S(0));
}

template <typename S>
Var<S> reshape(const Var<S>& x, Shape s) {
  Tensor<S> out = x.value().reshaped(std::move(s));
  auto px = x.node();
  return Var<S>(detail::make_op<S>(std::move(out), {px}, [px](Node<S>& self) {
    auto& g = px->ensure_grad();
    for (std::int64_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  }));
}

// scalar combination y = sum_i w_i * x_i; x_i scalar Vars
template <typename S>
Var<S> weighted_sum(const std::vector<Var<S>>& xs, const std::vector<S>& ws) {
  SCGAN_CHECK(!xs.empty() && xs.size() == ws.size(), "weighted_sum: arity mismatch");
  S acc = 0;
  std::vector<std::shared_ptr<Node<S>>> parents;
  parents.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    SCGAN_CHECK(xs[i].value().size() == 1, "weighted_sum: non-scalar term");
    acc += ws[i] * xs[i].item();
    parents.push_back(xs[i].node());
  }
  Tensor<S> out(Shape{1});
  out[0] = acc;
  auto ws_copy = ws;
  auto parents_copy = parents;
  return Var<S>(detail::make_op<S>(std::move(out), std::move(parents),
                                   [parents_copy, ws_copy](Node<S>& self) {
                                     for (std::size_t i = 0; i < parents_copy.size(); ++i) {
                                       auto& p = *parents_copy[i];
                                       if (p.requires_grad) p.ensure_grad()[0] += ws_copy[i] * self.grad[0];
                                     }
                                   }));
}

// concatenate along the channel axis (last dim); ranks 3 (HWC) or 4 (NHWC)
template <typename S>
Var<S> concat_channels(const Var<S>& a, const Var<S>& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  SCGAN_CHECK(sa.size() == sb.size() && (sa.size() == 3 || sa.size() == 4), "concat_channels: rank mismatch");
  for (std::size_t i = 0; i + 1 < sa.size(); ++i)
    SCGAN_CHECK(sa[i] == sb[i], "concat_channels: leading dims differ");
  const int ca = sa.back(), cb = sb.back();
  Shape so = sa;
  so.back() = ca + cb;
  Tensor<S> out(so);
  const std::int64_t rows = shape_size(sa) / ca;
  for (std::int64_t r = 0; r < rows; ++r) {
    for (int c = 0; c < ca; ++c) out[r * (ca + cb) + c] = a.value()[r * ca + c];
    for (int c = 0; c < cb; ++c) out[r * (ca + cb) + ca + c] = b.value()[r * cb + c];
  }
  auto pa = a.node(), pb = b.node();
  return Var<S>(detail::make_op<S>(std::move(out), {pa, pb}, [pa, pb, rows, ca, cb](Node<S>& self) {
    if (pa->requires_grad) {
      auto& g = pa->ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r)
        for (int c = 0; c < ca; ++c) g[r * ca + c] += self.grad[r * (ca + cb) + c];
    }
    if (pb->requires_grad) {
      auto& g = pb->ensure_grad();
      for (std::int64_t r = 0; r < rows; ++r)
        for (int c = 0; c < cb; ++c) g[r * cb + c] += self.grad[r * (ca + cb) + ca + c];
    }
  }));
}

// Cut the tape: value passes through, gradient does not.
template <typename S>
Var<S> detach(const Var<S>& x) {
  return Var<S>::constant(x.value());
}

}  // namespace scgan
