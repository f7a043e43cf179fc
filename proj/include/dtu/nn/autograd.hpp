#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "dtu/nn/tensor.hpp"

namespace dtu::nn {

// Define-by-run reverse-mode autograd. Every op allocates a node holding the
// forward value; backward closures push gradients into parent nodes. The
// graph is connected by shared_ptr from outputs to inputs, so releasing the
// loss root frees everything except parameters held by the model.
template <class T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated lazily by ensure_grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void()> backward_fn;

  void ensure_grad() {
    if (grad.data.empty()) grad = Tensor<T>(value.shape);
  }
};

template <class T>
using Var = std::shared_ptr<Node<T>>;

template <class T>
Var<T> make_var(Tensor<T> value, bool requires_grad = false) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return node;
}

template <class T>
Var<T> make_node(Tensor<T> value, std::vector<Var<T>> parents) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->parents = std::move(parents);
  for (const auto& p : node->parents) node->requires_grad |= p->requires_grad;
  return node;
}

template <class T>
void backward(const Var<T>& root) {
  if (root->value.shape.numel() != 1)
    throw std::logic_error("backward: root must be scalar");

  // Iterative post-order DFS over parents.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node<T>* parent = node->parents[idx].get();
      ++idx;
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad.data[0] = T{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn && (*it)->requires_grad) (*it)->backward_fn();
}

// ---------------------------------------------------------------------------
// Elementwise and shape ops
// ---------------------------------------------------------------------------

template <class T>
void check_same_shape(const Var<T>& a, const Var<T>& b, const char* what) {
  if (!(a->value.shape == b->value.shape))
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  check_same_shape(a, b, "add");
  Tensor<T> out = a->value;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->value.data[i];
  auto node = make_node<T>(std::move(out), {a, b});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>*pa = a.get(), *pb = b.get();
    node->backward_fn = [self, pa, pb] {
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (std::size_t i = 0; i < self->grad.data.size(); ++i)
          pa->grad.data[i] += self->grad.data[i];
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (std::size_t i = 0; i < self->grad.data.size(); ++i)
          pb->grad.data[i] += self->grad.data[i];
      }
    };
  }
  return node;
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  check_same_shape(a, b, "sub");
  Tensor<T> out = a->value;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b->value.data[i];
  auto node = make_node<T>(std::move(out), {a, b});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>*pa = a.get(), *pb = b.get();
    node->backward_fn = [self, pa, pb] {
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (std::size_t i = 0; i < self->grad.data.size(); ++i)
          pa->grad.data[i] += self->grad.data[i];
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (std::size_t i = 0; i < self->grad.data.size(); ++i)
          pb->grad.data[i] -= self->grad.data[i];
      }
    };
  }
  return node;
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  check_same_shape(a, b, "mul");
  Tensor<T> out = a->value;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->value.data[i];
  auto node = make_node<T>(std::move(out), {a, b});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>*pa = a.get(), *pb = b.get();
    node->backward_fn = [self, pa, pb] {
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (std::size_t i = 0; i < self->grad.data.size(); ++i)
          pa->grad.data[i] += self->grad.data[i] * pb->value.data[i];
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (std::size_t i = 0; i < self->grad.data.size(); ++i)
          pb->grad.data[i] += self->grad.data[i] * pa->value.data[i];
      }
    };
  }
  return node;
}

template <class T>
Var<T> div(Var<T> a, Var<T> b) {
  check_same_shape(a, b, "div");
  Tensor<T> out = a->value;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] /= b->value.data[i];
  auto node = make_node<T>(std::move(out), {a, b});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>*pa = a.get(), *pb = b.get();
    node->backward_fn = [self, pa, pb] {
      for (std::size_t i = 0; i < self->grad.data.size(); ++i) {
        const T bi = pb->value.data[i];
        if (pa->requires_grad) {
          pa->ensure_grad();
          pa->grad.data[i] += self->grad.data[i] / bi;
        }
        if (pb->requires_grad) {
          pb->ensure_grad();
          pb->grad.data[i] -= self->grad.data[i] * pa->value.data[i] / (bi * bi);
        }
      }
    };
  }
  return node;
}

template <class T>
Var<T> mul_const(Var<T> a, double k) {
  Tensor<T> out = a->value;
  for (auto& v : out.data) v = static_cast<T>(v * k);
  auto node = make_node<T>(std::move(out), {a});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>* pa = a.get();
    node->backward_fn = [self, pa, k] {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self->grad.data.size(); ++i)
        pa->grad.data[i] += static_cast<T>(self->grad.data[i] * k);
    };
  }
  return node;
}

template <class T>
Var<T> add_const(Var<T> a, double k) {
  Tensor<T> out = a->value;
  for (auto& v : out.data) v = static_cast<T>(v + k);
  auto node = make_node<T>(std::move(out), {a});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>* pa = a.get();
    node->backward_fn = [self, pa] {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self->grad.data.size(); ++i)
        pa->grad.data[i] += self->grad.data[i];
    };
  }
  return node;
}

template <class T>
Var<T> relu(Var<T> a) {
  Tensor<T> out = a->value;
  for (auto& v : out.data) v = v > T{0} ? v : T{0};
  auto node = make_node<T>(std::move(out), {a});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>* pa = a.get();
    node->backward_fn = [self, pa] {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self->grad.data.size(); ++i)
        if (pa->value.data[i] > T{0}) pa->grad.data[i] += self->grad.data[i];
    };
  }
  return node;
}

template <class T>
Var<T> sigmoid(Var<T> a) {
  Tensor<T> out = a->value;
  for (auto& v : out.data) v = T{1} / (T{1} + std::exp(-v));
  auto node = make_node<T>(std::move(out), {a});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>* pa = a.get();
    node->backward_fn = [self, pa] {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self->grad.data.size(); ++i) {
        const T y = self->value.data[i];
        pa->grad.data[i] += self->grad.data[i] * y * (T{1} - y);
      }
    };
  }
  return node;
}

template <class T>
Var<T> minimum(Var<T> a, Var<T> b) {
  check_same_shape(a, b, "minimum");
  Tensor<T> out = a->value;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = std::min(out.data[i], b->value.data[i]);
  auto node = make_node<T>(std::move(out), {a, b});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>*pa = a.get(), *pb = b.get();
    node->backward_fn = [self, pa, pb] {
      if (pa->requires_grad) pa->ensure_grad();
      if (pb->requires_grad) pb->ensure_grad();
      for (std::size_t i = 0; i < self->grad.data.size(); ++i) {
        // ties route to a; same rule forward and backward
        if (pa->value.data[i] <= pb->value.data[i]) {
          if (pa->requires_grad) pa->grad.data[i] += self->grad.data[i];
        } else if (pb->requires_grad) {
          pb->grad.data[i] += self->grad.data[i];
        }
      }
    };
  }
  return node;
}

template <class T>
Var<T> sum_all(Var<T> a) {
  T total = T{0};
  for (auto v : a->value.data) total += v;
  Tensor<T> out(Shape{1, 1, 1, 1});
  out.data[0] = total;
  auto node = make_node<T>(std::move(out), {a});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>* pa = a.get();
    node->backward_fn = [self, pa] {
      pa->ensure_grad();
      const T g = self->grad.data[0];
      for (auto& v : pa->grad.data) v += g;
    };
  }
  return node;
}

template <class T>
Var<T> concat_channels(Var<T> a, Var<T> b) {
  const Shape sa = a->value.shape, sb = b->value.shape;
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
    throw std::invalid_argument("concat_channels: spatial/batch mismatch");
  Tensor<T> out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
  const std::size_t plane = static_cast<std::size_t>(sa.h) * sa.w;
  for (int n = 0; n < sa.n; ++n) {
    for (int c = 0; c < sa.c; ++c)
      std::copy_n(a->value.plane(n, c), plane, out.plane(n, c));
    for (int c = 0; c < sb.c; ++c)
      std::copy_n(b->value.plane(n, c), plane, out.plane(n, sa.c + c));
  }
  auto node = make_node<T>(std::move(out), {a, b});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>*pa = a.get(), *pb = b.get();
    node->backward_fn = [self, pa, pb, sa, sb, plane] {
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (int n = 0; n < sa.n; ++n)
          for (int c = 0; c < sa.c; ++c) {
            const T* src = self->grad.plane(n, c);
            T* dst = pa->grad.plane(n, c);
            for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i];
          }
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (int n = 0; n < sb.n; ++n)
          for (int c = 0; c < sb.c; ++c) {
            const T* src = self->grad.plane(n, sa.c + c);
            T* dst = pb->grad.plane(n, c);
            for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i];
          }
      }
    };
  }
  return node;
}

// ---------------------------------------------------------------------------
// Convolution (stride 1, square kernel, zero padding k/2) via im2col + GEMM
// ---------------------------------------------------------------------------

template <class T>
void im2col(const Tensor<T>& x, int n, int k, int pad, std::vector<T>& col) {
  const int ci = x.shape.c, h = x.shape.h, w = x.shape.w;
  col.assign(static_cast<std::size_t>(ci) * k * k * h * w, T{0});
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < ci; ++c) {
    const T* src = x.plane(n, c);
    for (int dy = 0; dy < k; ++dy) {
      for (int dx = 0; dx < k; ++dx) {
        T* row = col.data() + (static_cast<std::size_t>(c) * k * k +
                               static_cast<std::size_t>(dy) * k + dx) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy - pad;
          if (sy < 0 || sy >= h) continue;
          const int x_lo = std::max(0, pad - dx);
          const int x_hi = std::min(w, w + pad - dx);
          for (int xx = x_lo; xx < x_hi; ++xx)
            row[static_cast<std::size_t>(y) * w + xx] = src[static_cast<std::size_t>(sy) * w + xx + dx - pad];
        }
      }
    }
  }
}

template <class T>
void col2im_accumulate(const std::vector<T>& col, Tensor<T>& dx, int n, int k, int pad) {
  const int ci = dx.shape.c, h = dx.shape.h, w = dx.shape.w;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < ci; ++c) {
    T* dst = dx.plane(n, c);
    for (int dy = 0; dy < k; ++dy) {
      for (int dx_ = 0; dx_ < k; ++dx_) {
        const T* row = col.data() + (static_cast<std::size_t>(c) * k * k +
                                     static_cast<std::size_t>(dy) * k + dx_) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy - pad;
          if (sy < 0 || sy >= h) continue;
          const int x_lo = std::max(0, pad - dx_);
          const int x_hi = std::min(w, w + pad - dx_);
          for (int xx = x_lo; xx < x_hi; ++xx)
            dst[static_cast<std::size_t>(sy) * w + xx + dx_ - pad] += row[static_cast<std::size_t>(y) * w + xx];
        }
      }
    }
  }
}

// x: (N, Ci, H, W), weight: (Co, Ci, k, k), bias: (1, Co, 1, 1)
template <class T>
Var<T> conv2d(Var<T> x, Var<T> weight, Var<T> bias) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
  using Map = Eigen::Map<Mat>;
  using CMap = Eigen::Map<const Mat>;

  const Shape xs = x->value.shape;
  const Shape ws = weight->value.shape;
  if (ws.h != ws.w) throw std::invalid_argument("conv2d: kernel must be square");
  if (ws.c != xs.c) throw std::invalid_argument("conv2d: channel mismatch");
  const int k = ws.h, pad = k / 2;
  const int co = ws.n;
  const std::size_t hw = static_cast<std::size_t>(xs.h) * xs.w;
  const std::size_t kk = static_cast<std::size_t>(xs.c) * k * k;

  Tensor<T> out(Shape{xs.n, co, xs.h, xs.w});
  {
    std::vector<T> col;
    // weight row-major (Co x K) viewed as col-major (K x Co) == W^T
    CMap wt(weight->value.data.data(), static_cast<Eigen::Index>(kk), co);
    for (int n = 0; n < xs.n; ++n) {
      im2col(x->value, n, k, pad, col);
      CMap colT(col.data(), static_cast<Eigen::Index>(hw), static_cast<Eigen::Index>(kk));
      Map yT(out.plane(n, 0), static_cast<Eigen::Index>(hw), co);
      yT.noalias() = colT * wt;
    }
    for (int n = 0; n < xs.n; ++n)
      for (int c = 0; c < co; ++c) {
        const T b = bias->value.data[static_cast<std::size_t>(c)];
        T* dst = out.plane(n, c);
        for (std::size_t i = 0; i < hw; ++i) dst[i] += b;
      }
  }

  auto node = make_node<T>(std::move(out), {x, weight, bias});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>*px = x.get(), *pw = weight.get(), *pb = bias.get();
    node->backward_fn = [self, px, pw, pb, k, pad, co, hw, kk] {
      const Shape xs = px->value.shape;
      if (px->requires_grad) px->ensure_grad();
      pw->ensure_grad();
      pb->ensure_grad();

      std::vector<T> col, dcol(kk * hw);
      CMap wt(pw->value.data.data(), static_cast<Eigen::Index>(kk), co);
      Map dwt(pw->grad.data.data(), static_cast<Eigen::Index>(kk), co);
      for (int n = 0; n < xs.n; ++n) {
        CMap dyT(self->grad.plane(n, 0), static_cast<Eigen::Index>(hw), co);
        im2col(px->value, n, k, pad, col);
        CMap colT(col.data(), static_cast<Eigen::Index>(hw), static_cast<Eigen::Index>(kk));
        dwt.noalias() += colT.transpose() * dyT;
        if (px->requires_grad) {
          Map dcolT(dcol.data(), static_cast<Eigen::Index>(hw), static_cast<Eigen::Index>(kk));
          dcolT.noalias() = dyT * wt.transpose();
          col2im_accumulate(dcol, px->grad, n, k, pad);
        }
        for (int c = 0; c < co; ++c) {
          const T* g = self->grad.plane(n, c);
          T s = T{0};
          for (std::size_t i = 0; i < hw; ++i) s += g[i];
          pb->grad.data[static_cast<std::size_t>(c)] += s;
        }
      }
    };
  }
  return node;
}

// ---------------------------------------------------------------------------
// Normalization, pooling, resampling
// ---------------------------------------------------------------------------

// Per-(sample, channel) normalization over space with affine parameters;
// batch-independent so the triplet branches stay comparable within a batch.
template <class T>
Var<T> instance_norm(Var<T> x, Var<T> gamma, Var<T> beta, double eps = 1e-5) {
  const Shape xs = x->value.shape;
  if (gamma->value.shape.c != xs.c || beta->value.shape.c != xs.c)
    throw std::invalid_argument("instance_norm: affine parameter size mismatch");
  const std::size_t hw = static_cast<std::size_t>(xs.h) * xs.w;

  Tensor<T> out(xs);
  std::vector<T> mean(static_cast<std::size_t>(xs.n) * xs.c);
  std::vector<T> inv_std(static_cast<std::size_t>(xs.n) * xs.c);
  for (int n = 0; n < xs.n; ++n) {
    for (int c = 0; c < xs.c; ++c) {
      const T* src = x->value.plane(n, c);
      T s = T{0};
      for (std::size_t i = 0; i < hw; ++i) s += src[i];
      const T mu = s / static_cast<T>(hw);
      T v = T{0};
      for (std::size_t i = 0; i < hw; ++i) v += (src[i] - mu) * (src[i] - mu);
      const T is = T{1} / std::sqrt(v / static_cast<T>(hw) + static_cast<T>(eps));
      mean[static_cast<std::size_t>(n * xs.c + c)] = mu;
      inv_std[static_cast<std::size_t>(n * xs.c + c)] = is;
      const T g = gamma->value.data[static_cast<std::size_t>(c)];
      const T b = beta->value.data[static_cast<std::size_t>(c)];
      T* dst = out.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) dst[i] = g * (src[i] - mu) * is + b;
    }
  }

  auto node = make_node<T>(std::move(out), {x, gamma, beta});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>*px = x.get(), *pg = gamma.get(), *pbt = beta.get();
    node->backward_fn = [self, px, pg, pbt, mean = std::move(mean),
                         inv_std = std::move(inv_std), hw] {
      const Shape xs = px->value.shape;
      if (px->requires_grad) px->ensure_grad();
      pg->ensure_grad();
      pbt->ensure_grad();
      const T m = static_cast<T>(hw);
      for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
          const T* xv = px->value.plane(n, c);
          const T* dy = self->grad.plane(n, c);
          const T mu = mean[static_cast<std::size_t>(n * xs.c + c)];
          const T is = inv_std[static_cast<std::size_t>(n * xs.c + c)];
          const T g = pg->value.data[static_cast<std::size_t>(c)];
          T sum_dy = T{0}, sum_dy_xhat = T{0};
          for (std::size_t i = 0; i < hw; ++i) {
            const T xhat = (xv[i] - mu) * is;
            sum_dy += dy[i];
            sum_dy_xhat += dy[i] * xhat;
          }
          pg->grad.data[static_cast<std::size_t>(c)] += sum_dy_xhat;
          pbt->grad.data[static_cast<std::size_t>(c)] += sum_dy;
          if (px->requires_grad) {
            T* dx = px->grad.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) {
              const T xhat = (xv[i] - mu) * is;
              dx[i] += g * is * (dy[i] - sum_dy / m - xhat * sum_dy_xhat / m);
            }
          }
        }
      }
    };
  }
  return node;
}

template <class T>
Var<T> maxpool2(Var<T> x) {
  const Shape xs = x->value.shape;
  if (xs.h % 2 != 0 || xs.w % 2 != 0)
    throw std::invalid_argument("maxpool2: spatial dims must be even");
  const int oh = xs.h / 2, ow = xs.w / 2;
  Tensor<T> out(Shape{xs.n, xs.c, oh, ow});
  std::vector<std::int32_t> argmax(out.shape.numel());
  std::size_t o = 0;
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c) {
      const T* src = x->value.plane(n, c);
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx, ++o) {
          const int base = 2 * y * xs.w + 2 * xx;
          int best = base;
          T bv = src[base];
          const int cand[3] = {base + 1, base + xs.w, base + xs.w + 1};
          for (int idx : cand)
            if (src[idx] > bv) {
              bv = src[idx];
              best = idx;
            }
          out.data[o] = bv;
          argmax[o] = best;
        }
    }

  auto node = make_node<T>(std::move(out), {x});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>* px = x.get();
    node->backward_fn = [self, px, argmax = std::move(argmax), oh, ow] {
      px->ensure_grad();
      const Shape xs = px->value.shape;
      std::size_t o = 0;
      for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c) {
          T* dx = px->grad.plane(n, c);
          for (int i = 0; i < oh * ow; ++i, ++o)
            dx[argmax[o]] += self->grad.data[o];
        }
    };
  }
  return node;
}

// Stride-1 max pool with implicit -inf padding (same output size);
// kernel (kh, kw) centered on each pixel.
template <class T>
Var<T> maxpool_same(Var<T> x, int kh, int kw) {
  const Shape xs = x->value.shape;
  const int ry = kh / 2, rx = kw / 2;
  Tensor<T> out(xs);
  std::vector<std::int32_t> argmax(xs.numel());
  std::size_t o = 0;
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c) {
      const T* src = x->value.plane(n, c);
      for (int y = 0; y < xs.h; ++y)
        for (int xx = 0; xx < xs.w; ++xx, ++o) {
          int best = -1;
          T bv = T{0};
          for (int dy = -ry; dy <= kh - 1 - ry; ++dy) {
            const int sy = y + dy;
            if (sy < 0 || sy >= xs.h) continue;
            for (int dx = -rx; dx <= kw - 1 - rx; ++dx) {
              const int sx = xx + dx;
              if (sx < 0 || sx >= xs.w) continue;
              const int idx = sy * xs.w + sx;
              if (best < 0 || src[idx] > bv) {
                bv = src[idx];
                best = idx;
              }
            }
          }
          out.data[o] = bv;
          argmax[o] = best;
        }
    }

  auto node = make_node<T>(std::move(out), {x});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>* px = x.get();
    node->backward_fn = [self, px, argmax = std::move(argmax)] {
      px->ensure_grad();
      const Shape xs = px->value.shape;
      const std::size_t hw = static_cast<std::size_t>(xs.h) * xs.w;
      std::size_t o = 0;
      for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c) {
          T* dx = px->grad.plane(n, c);
          for (std::size_t i = 0; i < hw; ++i, ++o)
            dx[argmax[o]] += self->grad.data[o];
        }
    };
  }
  return node;
}

// Factor-2 bilinear upsampling, align_corners=false convention.
template <class T>
Var<T> upsample_bilinear2(Var<T> x) {
  const Shape xs = x->value.shape;
  const int oh = xs.h * 2, ow = xs.w * 2;

  struct Tap {
    int i0, i1;
    T f;
  };
  auto make_taps = [](int out_dim, int in_dim) {
    std::vector<Tap> taps(static_cast<std::size_t>(out_dim));
    for (int o = 0; o < out_dim; ++o) {
      const double src = (o + 0.5) / 2.0 - 0.5;
      int i0 = static_cast<int>(std::floor(src));
      double f = src - i0;
      if (i0 < 0) {
        i0 = 0;
        f = 0.0;
      }
      int i1 = i0 + 1;
      if (i1 >= in_dim) {
        i1 = in_dim - 1;
        f = 0.0;
      }
      taps[static_cast<std::size_t>(o)] = {i0, i1, static_cast<T>(f)};
    }
    return taps;
  };
  const auto ty = make_taps(oh, xs.h);
  const auto tx = make_taps(ow, xs.w);

  Tensor<T> out(Shape{xs.n, xs.c, oh, ow});
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c) {
      const T* src = x->value.plane(n, c);
      T* dst = out.plane(n, c);
      for (int y = 0; y < oh; ++y) {
        const Tap& a = ty[static_cast<std::size_t>(y)];
        for (int xx = 0; xx < ow; ++xx) {
          const Tap& b = tx[static_cast<std::size_t>(xx)];
          const T v00 = src[a.i0 * xs.w + b.i0], v01 = src[a.i0 * xs.w + b.i1];
          const T v10 = src[a.i1 * xs.w + b.i0], v11 = src[a.i1 * xs.w + b.i1];
          dst[y * ow + xx] = (T{1} - a.f) * ((T{1} - b.f) * v00 + b.f * v01) +
                             a.f * ((T{1} - b.f) * v10 + b.f * v11);
        }
      }
    }

  auto node = make_node<T>(std::move(out), {x});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>* px = x.get();
    node->backward_fn = [self, px, ty, tx, oh, ow] {
      px->ensure_grad();
      const Shape xs = px->value.shape;
      for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c) {
          const T* dy = self->grad.plane(n, c);
          T* dx = px->grad.plane(n, c);
          for (int y = 0; y < oh; ++y) {
            const Tap& a = ty[static_cast<std::size_t>(y)];
            for (int xx = 0; xx < ow; ++xx) {
              const Tap& b = tx[static_cast<std::size_t>(xx)];
              const T g = dy[y * ow + xx];
              dx[a.i0 * xs.w + b.i0] += (T{1} - a.f) * (T{1} - b.f) * g;
              dx[a.i0 * xs.w + b.i1] += (T{1} - a.f) * b.f * g;
              dx[a.i1 * xs.w + b.i0] += a.f * (T{1} - b.f) * g;
              dx[a.i1 * xs.w + b.i1] += a.f * b.f * g;
            }
          }
        }
    };
  }
  return node;
}

template <class T>
Var<T> global_avg_pool(Var<T> x) {
  const Shape xs = x->value.shape;
  const std::size_t hw = static_cast<std::size_t>(xs.h) * xs.w;
  Tensor<T> out(Shape{xs.n, xs.c, 1, 1});
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c) {
      const T* src = x->value.plane(n, c);
      T s = T{0};
      for (std::size_t i = 0; i < hw; ++i) s += src[i];
      out.data[static_cast<std::size_t>(n * xs.c + c)] = s / static_cast<T>(hw);
    }
  auto node = make_node<T>(std::move(out), {x});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>* px = x.get();
    node->backward_fn = [self, px, hw] {
      px->ensure_grad();
      const Shape xs = px->value.shape;
      for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c) {
          const T g = self->grad.data[static_cast<std::size_t>(n * xs.c + c)] / static_cast<T>(hw);
          T* dx = px->grad.plane(n, c);
          for (std::size_t i = 0; i < hw; ++i) dx[i] += g;
        }
    };
  }
  return node;
}

// x: (N, C, 1, 1), weight: (K, C, 1, 1), bias: (1, K, 1, 1) -> (N, K, 1, 1)
template <class T>
Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias) {
  const Shape xs = x->value.shape;
  const Shape ws = weight->value.shape;
  if (xs.h != 1 || xs.w != 1 || ws.c != xs.c)
    throw std::invalid_argument("linear: expects (N,C,1,1) input matching weight");
  const int k = ws.n;
  Tensor<T> out(Shape{xs.n, k, 1, 1});
  for (int n = 0; n < xs.n; ++n)
    for (int j = 0; j < k; ++j) {
      T s = bias->value.data[static_cast<std::size_t>(j)];
      for (int c = 0; c < xs.c; ++c)
        s += weight->value.data[static_cast<std::size_t>(j * xs.c + c)] *
             x->value.data[static_cast<std::size_t>(n * xs.c + c)];
      out.data[static_cast<std::size_t>(n * k + j)] = s;
    }
  auto node = make_node<T>(std::move(out), {x, weight, bias});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>*px = x.get(), *pw = weight.get(), *pb = bias.get();
    node->backward_fn = [self, px, pw, pb, k] {
      const int c_in = px->value.shape.c;
      const int batch = px->value.shape.n;
      if (px->requires_grad) px->ensure_grad();
      pw->ensure_grad();
      pb->ensure_grad();
      for (int n = 0; n < batch; ++n)
        for (int j = 0; j < k; ++j) {
          const T g = self->grad.data[static_cast<std::size_t>(n * k + j)];
          pb->grad.data[static_cast<std::size_t>(j)] += g;
          for (int c = 0; c < c_in; ++c) {
            pw->grad.data[static_cast<std::size_t>(j * c_in + c)] +=
                g * px->value.data[static_cast<std::size_t>(n * c_in + c)];
            if (px->requires_grad)
              px->grad.data[static_cast<std::size_t>(n * c_in + c)] +=
                  g * pw->value.data[static_cast<std::size_t>(j * c_in + c)];
          }
        }
    };
  }
  return node;
}

// x: (N, C, H, W) scaled channel-wise by s: (N, C, 1, 1)
template <class T>
Var<T> scale_channels(Var<T> x, Var<T> s) {
  const Shape xs = x->value.shape;
  if (s->value.shape.n != xs.n || s->value.shape.c != xs.c)
    throw std::invalid_argument("scale_channels: score shape mismatch");
  const std::size_t hw = static_cast<std::size_t>(xs.h) * xs.w;
  Tensor<T> out(xs);
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c) {
      const T sc = s->value.data[static_cast<std::size_t>(n * xs.c + c)];
      const T* src = x->value.plane(n, c);
      T* dst = out.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] * sc;
    }
  auto node = make_node<T>(std::move(out), {x, s});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>*px = x.get(), *ps = s.get();
    node->backward_fn = [self, px, ps, hw] {
      const Shape xs = px->value.shape;
      if (px->requires_grad) px->ensure_grad();
      if (ps->requires_grad) ps->ensure_grad();
      for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c) {
          const T sc = ps->value.data[static_cast<std::size_t>(n * xs.c + c)];
          const T* dy = self->grad.plane(n, c);
          if (px->requires_grad) {
            T* dx = px->grad.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) dx[i] += dy[i] * sc;
          }
          if (ps->requires_grad) {
            const T* xv = px->value.plane(n, c);
            T acc = T{0};
            for (std::size_t i = 0; i < hw; ++i) acc += dy[i] * xv[i];
            ps->grad.data[static_cast<std::size_t>(n * xs.c + c)] += acc;
          }
        }
    };
  }
  return node;
}

// Copy of channels [c0, c0+count) as an (N, count, H, W) tensor.
template <class T>
Var<T> slice_channels(Var<T> x, int c0, int count) {
  const Shape xs = x->value.shape;
  if (c0 < 0 || count < 1 || c0 + count > xs.c)
    throw std::invalid_argument("slice_channels: range out of bounds");
  const std::size_t hw = static_cast<std::size_t>(xs.h) * xs.w;
  Tensor<T> out(Shape{xs.n, count, xs.h, xs.w});
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < count; ++c)
      std::copy_n(x->value.plane(n, c0 + c), hw, out.plane(n, c));
  auto node = make_node<T>(std::move(out), {x});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>* px = x.get();
    node->backward_fn = [self, px, c0, count, hw] {
      px->ensure_grad();
      const Shape xs = px->value.shape;
      for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < count; ++c) {
          const T* src = self->grad.plane(n, c);
          T* dst = px->grad.plane(n, c0 + c);
          for (std::size_t i = 0; i < hw; ++i) dst[i] += src[i];
        }
    };
  }
  return node;
}

template <class T>
Var<T> softmax_channels(Var<T> x) {
  const Shape xs = x->value.shape;
  const std::size_t hw = static_cast<std::size_t>(xs.h) * xs.w;
  Tensor<T> out(xs);
  for (int n = 0; n < xs.n; ++n) {
    for (std::size_t i = 0; i < hw; ++i) {
      T mx = x->value.plane(n, 0)[i];
      for (int c = 1; c < xs.c; ++c) mx = std::max(mx, x->value.plane(n, c)[i]);
      T z = T{0};
      for (int c = 0; c < xs.c; ++c) {
        const T e = std::exp(x->value.plane(n, c)[i] - mx);
        out.plane(n, c)[i] = e;
        z += e;
      }
      for (int c = 0; c < xs.c; ++c) out.plane(n, c)[i] /= z;
    }
  }
  auto node = make_node<T>(std::move(out), {x});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>* px = x.get();
    node->backward_fn = [self, px, hw] {
      px->ensure_grad();
      const Shape xs = px->value.shape;
      for (int n = 0; n < xs.n; ++n) {
        for (std::size_t i = 0; i < hw; ++i) {
          T dot = T{0};
          for (int c = 0; c < xs.c; ++c)
            dot += self->grad.plane(n, c)[i] * self->value.plane(n, c)[i];
          for (int c = 0; c < xs.c; ++c) {
            const T y = self->value.plane(n, c)[i];
            px->grad.plane(n, c)[i] += y * (self->grad.plane(n, c)[i] - dot);
          }
        }
      }
    };
  }
  return node;
}

}  // namespace dtu::nn
