#include "sp3d/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

#include "sp3d/parallel.hpp"

namespace sp3d::ad {

namespace {
std::atomic<uint64_t> g_order{1};
bool g_grad_enabled = true;  // graph construction is single-threaded

void accumulate(Node& dst, const Tensor& g) {
  Tensor& grad = dst.ensure_grad();
  double* d = grad.data();
  const double* s = g.data();
  const int64_t n = grad.numel();
  for (int64_t i = 0; i < n; ++i) d[i] += s[i];
}
}  // namespace

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = false;
  n->order = g_order.fetch_add(1);
  return n;
}

Var parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->order = g_order.fetch_add(1);
  return n;
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

Var make_op(Tensor value, std::vector<Var> parents,
            std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->order = g_order.fetch_add(1);
  bool needs = false;
  if (g_grad_enabled)
    for (const Var& p : parents)
      if (p->requires_grad) {
        needs = true;
        break;
      }
  if (needs) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
    n->requires_grad = true;
  }
  return n;
}

void backward(const Var& root, const Tensor& seed) {
  check_same_shape(root->value, seed, "backward seed");
  std::vector<Node*> nodes;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    nodes.push_back(n);
    for (const Var& p : n->parents)
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
  }
  // Reverse creation order is a topological order: inputs precede their ops.
  std::sort(nodes.begin(), nodes.end(),
            [](const Node* a, const Node* b) { return a->order > b->order; });
  root->ensure_grad();
  accumulate(*root, seed);
  for (Node* n : nodes)
    if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
}

void backward(const Var& root) {
  if (root->value.numel() != 1)
    throw ShapeMismatch("backward() without seed needs a scalar root");
  backward(root, Tensor({1}, {1.0}));
}

// ---------------------------------------------------------------- elementwise

Var add(const Var& a, const Var& b) {
  check_same_shape(a->value, b->value, "add");
  Tensor out(a->value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a->value[i] + b->value[i];
  return make_op(std::move(out), {a, b}, [a, b](Node& self) {
    if (a->requires_grad) accumulate(*a, self.grad);
    if (b->requires_grad) accumulate(*b, self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a->value, b->value, "sub");
  Tensor out(a->value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a->value[i] - b->value[i];
  return make_op(std::move(out), {a, b}, [a, b](Node& self) {
    if (a->requires_grad) accumulate(*a, self.grad);
    if (b->requires_grad) {
      Tensor& g = b->ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a->value, b->value, "mul");
  Tensor out(a->value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a->value[i] * b->value[i];
  return make_op(std::move(out), {a, b}, [a, b](Node& self) {
    const int64_t m = self.grad.numel();
    if (a->requires_grad) {
      Tensor& g = a->ensure_grad();
      for (int64_t i = 0; i < m; ++i) g[i] += self.grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      Tensor& g = b->ensure_grad();
      for (int64_t i = 0; i < m; ++i) g[i] += self.grad[i] * a->value[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * s;
  return make_op(std::move(out), {a}, [a, s](Node& self) {
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * s;
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + s;
  return make_op(std::move(out), {a}, [a](Node& self) {
    if (a->requires_grad) accumulate(*a, self.grad);
  });
}

Var mul_const(const Var& a, const Tensor& m) {
  check_same_shape(a->value, m, "mul_const");
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * m[i];
  return make_op(std::move(out), {a}, [a, m](Node& self) {
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * m[i];
  });
}

Var square(const Var& a) {
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * a->value[i];
  return make_op(std::move(out), {a}, [a](Node& self) {
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += 2.0 * a->value[i] * self.grad[i];
  });
}

Var abs_val(const Var& a) {
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::abs(a->value[i]);
  return make_op(std::move(out), {a}, [a](Node& self) {
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) {
      const double v = a->value[i];
      g[i] += (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0)) * self.grad[i];
    }
  });
}

Var leaky_relu(const Var& a, double slope) {
  Tensor out(a->value.shape());
  const int64_t n = out.numel();
  const double* x = a->value.data();
  double* y = out.data();
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
  return make_op(std::move(out), {a}, [a, slope](Node& self) {
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    const double* x = a->value.data();
    for (int64_t i = 0; i < g.numel(); ++i)
      g[i] += (x[i] > 0.0 ? 1.0 : slope) * self.grad[i];
  });
}

Var sigmoid(const Var& a) {
  Tensor out(a->value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-a->value[i]));
  Tensor saved = out;
  return make_op(std::move(out), {a}, [a, saved](Node& self) {
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) {
      const double s = saved[i];
      g[i] += s * (1.0 - s) * self.grad[i];
    }
  });
}

Var sum_all(const Var& a) {
  Tensor out({1}, {a->value.sum()});
  return make_op(std::move(out), {a}, [a](Node& self) {
    if (!a->requires_grad) return;
    Tensor& g = a->ensure_grad();
    const double s = self.grad[0];
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += s;
  });
}

Var mean_all(const Var& a) { return scale(sum_all(a), 1.0 / a->value.numel()); }

Var mse(const Var& a, const Var& b) {
  check_same_shape(a->value, b->value, "mse");
  const int64_t n = a->value.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = a->value[i] - b->value[i];
    acc += d * d;
  }
  Tensor out({1}, {acc / n});
  return make_op(std::move(out), {a, b}, [a, b, n](Node& self) {
    const double s = 2.0 * self.grad[0] / n;
    if (a->requires_grad) {
      Tensor& g = a->ensure_grad();
      for (int64_t i = 0; i < n; ++i) g[i] += s * (a->value[i] - b->value[i]);
    }
    if (b->requires_grad) {
      Tensor& g = b->ensure_grad();
      for (int64_t i = 0; i < n; ++i) g[i] -= s * (a->value[i] - b->value[i]);
    }
  });
}

Var linear_combination(const std::vector<Var>& scalars, const std::vector<double>& coeffs) {
  if (scalars.size() != coeffs.size())
    throw ShapeMismatch("linear_combination arity mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < scalars.size(); ++i) {
    if (scalars[i]->value.numel() != 1)
      throw ShapeMismatch("linear_combination expects scalar nodes");
    acc += coeffs[i] * scalars[i]->value[0];
  }
  std::vector<Var> parents(scalars.begin(), scalars.end());
  return make_op(Tensor({1}, {acc}), std::move(parents),
                 [scalars, coeffs](Node& self) {
                   for (size_t i = 0; i < scalars.size(); ++i) {
                     if (!scalars[i]->requires_grad) continue;
                     scalars[i]->ensure_grad()[0] += coeffs[i] * self.grad[0];
                   }
                 });
}

// --------------------------------------------------------------------- shape

Var concat_channels(const Var& a, const Var& b) {
  const auto& sa = a->value.shape();
  const auto& sb = b->value.shape();
  if (sa.size() != sb.size() || sa.size() < 2)
    throw ShapeMismatch("concat_channels rank mismatch");
  for (size_t i = 0; i < sa.size(); ++i)
    if (i != 1 && sa[i] != sb[i]) throw ShapeMismatch("concat_channels dim mismatch");
  std::vector<int64_t> shape = sa;
  shape[1] = sa[1] + sb[1];
  Tensor out(shape);
  int64_t inner = 1;
  for (size_t i = 2; i < sa.size(); ++i) inner *= sa[i];
  const int64_t batch = sa[0];
  const int64_t ca = sa[1], cb = sb[1];
  for (int64_t n = 0; n < batch; ++n) {
    std::copy_n(a->value.data() + n * ca * inner, ca * inner,
                out.data() + n * (ca + cb) * inner);
    std::copy_n(b->value.data() + n * cb * inner, cb * inner,
                out.data() + (n * (ca + cb) + ca) * inner);
  }
  return make_op(std::move(out), {a, b}, [a, b, batch, ca, cb, inner](Node& self) {
    if (a->requires_grad) {
      Tensor& g = a->ensure_grad();
      for (int64_t n = 0; n < batch; ++n)
        for (int64_t i = 0; i < ca * inner; ++i)
          g[n * ca * inner + i] += self.grad[n * (ca + cb) * inner + i];
    }
    if (b->requires_grad) {
      Tensor& g = b->ensure_grad();
      for (int64_t n = 0; n < batch; ++n)
        for (int64_t i = 0; i < cb * inner; ++i)
          g[n * cb * inner + i] += self.grad[(n * (ca + cb) + ca) * inner + i];
    }
  });
}

Var slice_channels(const Var& x, int64_t c0, int64_t c1) {
  const auto& s = x->value.shape();
  if (s.size() < 2) throw ShapeMismatch("slice_channels needs rank >= 2");
  if (c0 < 0 || c1 > s[1] || c0 >= c1) throw IndexOutOfRange("channel slice out of range");
  std::vector<int64_t> shape = s;
  shape[1] = c1 - c0;
  int64_t inner = 1;
  for (size_t i = 2; i < s.size(); ++i) inner *= s[i];
  const int64_t batch = s[0], cx = s[1], cs = c1 - c0;
  Tensor out(shape);
  for (int64_t n = 0; n < batch; ++n)
    std::copy_n(x->value.data() + (n * cx + c0) * inner, cs * inner,
                out.data() + n * cs * inner);
  return make_op(std::move(out), {x}, [x, batch, cx, c0, cs, inner](Node& self) {
    if (!x->requires_grad) return;
    Tensor& g = x->ensure_grad();
    for (int64_t n = 0; n < batch; ++n)
      for (int64_t i = 0; i < cs * inner; ++i)
        g[(n * cx + c0) * inner + i] += self.grad[n * cs * inner + i];
  });
}

Var stack_rows(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeMismatch("stack_rows of nothing");
  const auto& s0 = xs[0]->value.shape();
  for (const auto& x : xs) check_same_shape(x->value, xs[0]->value, "stack_rows");
  std::vector<int64_t> shape;
  shape.push_back(static_cast<int64_t>(xs.size()));
  shape.insert(shape.end(), s0.begin(), s0.end());
  Tensor out(shape);
  const int64_t inner = xs[0]->value.numel();
  for (size_t i = 0; i < xs.size(); ++i)
    std::copy_n(xs[i]->value.data(), inner, out.data() + static_cast<int64_t>(i) * inner);
  std::vector<Var> parents(xs.begin(), xs.end());
  return make_op(std::move(out), std::move(parents), [xs, inner](Node& self) {
    for (size_t i = 0; i < xs.size(); ++i) {
      if (!xs[i]->requires_grad) continue;
      Tensor& g = xs[i]->ensure_grad();
      const double* src = self.grad.data() + static_cast<int64_t>(i) * inner;
      for (int64_t k = 0; k < inner; ++k) g[k] += src[k];
    }
  });
}

Var reshape(const Var& x, std::vector<int64_t> shape) {
  Tensor out = x->value.reshaped(std::move(shape));
  return make_op(std::move(out), {x}, [x](Node& self) {
    if (x->requires_grad) {
      Tensor& g = x->ensure_grad();
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    }
  });
}

}  // namespace sp3d::ad
