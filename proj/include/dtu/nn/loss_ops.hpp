#pragma once

#include <cmath>
#include <cstdint>

#include "dtu/nn/autograd.hpp"

namespace dtu::nn {

inline constexpr double kProbClamp = 1e-7;

// Hinge triplet loss over spatial embeddings. d+ / d- are means over spatial
// positions of per-position channel-vector Euclidean distances; the result is
// the batch mean of max(d+ - d- + tau, 0). Zero-distance positions and the
// inactive hinge take subgradient 0.
template <class T>
Var<T> triplet_loss(Var<T> anchor, Var<T> positive, Var<T> negative, double tau) {
  check_same_shape(anchor, positive, "triplet_loss");
  check_same_shape(anchor, negative, "triplet_loss");
  const Shape s = anchor->value.shape;
  const std::size_t hw = static_cast<std::size_t>(s.h) * s.w;

  std::vector<T> per_sample(static_cast<std::size_t>(s.n));
  T total = T{0};
  for (int n = 0; n < s.n; ++n) {
    T dp = T{0}, dn = T{0};
    for (std::size_t i = 0; i < hw; ++i) {
      T sp = T{0}, sn = T{0};
      for (int c = 0; c < s.c; ++c) {
        const T a = anchor->value.plane(n, c)[i];
        const T dpos = a - positive->value.plane(n, c)[i];
        const T dneg = a - negative->value.plane(n, c)[i];
        sp += dpos * dpos;
        sn += dneg * dneg;
      }
      dp += std::sqrt(sp);
      dn += std::sqrt(sn);
    }
    dp /= static_cast<T>(hw);
    dn /= static_cast<T>(hw);
    const T l = dp - dn + static_cast<T>(tau);
    per_sample[static_cast<std::size_t>(n)] = l > T{0} ? l : T{0};
    total += per_sample[static_cast<std::size_t>(n)];
  }
  Tensor<T> out(Shape{1, 1, 1, 1});
  out.data[0] = total / static_cast<T>(s.n);

  auto node = make_node<T>(std::move(out), {anchor, positive, negative});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>*pa = anchor.get(), *pp = positive.get(), *pn = negative.get();
    node->backward_fn = [self, pa, pp, pn, per_sample = std::move(per_sample), hw] {
      const Shape s = pa->value.shape;
      if (pa->requires_grad) pa->ensure_grad();
      if (pp->requires_grad) pp->ensure_grad();
      if (pn->requires_grad) pn->ensure_grad();
      const T g = self->grad.data[0] / (static_cast<T>(s.n) * static_cast<T>(hw));
      for (int n = 0; n < s.n; ++n) {
        if (per_sample[static_cast<std::size_t>(n)] <= T{0}) continue;  // hinge inactive
        for (std::size_t i = 0; i < hw; ++i) {
          T sp = T{0}, sn = T{0};
          for (int c = 0; c < s.c; ++c) {
            const T a = pa->value.plane(n, c)[i];
            const T dpos = a - pp->value.plane(n, c)[i];
            const T dneg = a - pn->value.plane(n, c)[i];
            sp += dpos * dpos;
            sn += dneg * dneg;
          }
          const T distp = std::sqrt(sp), distn = std::sqrt(sn);
          for (int c = 0; c < s.c; ++c) {
            const T a = pa->value.plane(n, c)[i];
            const T dpos = a - pp->value.plane(n, c)[i];
            const T dneg = a - pn->value.plane(n, c)[i];
            const T up = distp > T{0} ? dpos / distp : T{0};
            const T un = distn > T{0} ? dneg / distn : T{0};
            if (pa->requires_grad) pa->grad.plane(n, c)[i] += g * (up - un);
            if (pp->requires_grad) pp->grad.plane(n, c)[i] -= g * up;
            if (pn->requires_grad) pn->grad.plane(n, c)[i] += g * un;
          }
        }
      }
    };
  }
  return node;
}

// Mean over pixels of -alpha (1 - p_t)^gamma log(p_t), with p_t the predicted
// probability of the true class, clamped to [1e-7, 1 - 1e-7].
template <class T>
Var<T> focal_loss(Var<T> probs, const Tensor<std::int32_t>& labels, double gamma, double alpha) {
  const Shape s = probs->value.shape;
  if (labels.shape.n != s.n || labels.shape.h != s.h || labels.shape.w != s.w)
    throw std::invalid_argument("focal_loss: label shape mismatch");
  const std::size_t hw = static_cast<std::size_t>(s.h) * s.w;
  const std::size_t npix = static_cast<std::size_t>(s.n) * hw;

  T total = T{0};
  for (int n = 0; n < s.n; ++n)
    for (std::size_t i = 0; i < hw; ++i) {
      const int cls = labels.data[static_cast<std::size_t>(n) * hw + i];
      if (cls < 0 || cls >= s.c) throw std::invalid_argument("focal_loss: label out of range");
      T p = probs->value.plane(n, cls)[i];
      p = std::min(std::max(p, static_cast<T>(kProbClamp)), static_cast<T>(1.0 - kProbClamp));
      total += static_cast<T>(-alpha * std::pow(1.0 - static_cast<double>(p), gamma) *
                              std::log(static_cast<double>(p)));
    }
  Tensor<T> out(Shape{1, 1, 1, 1});
  out.data[0] = total / static_cast<T>(npix);

  auto node = make_node<T>(std::move(out), {probs});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>* pp = probs.get();
    node->backward_fn = [self, pp, labels, gamma, alpha, hw, npix] {
      pp->ensure_grad();
      const Shape s = pp->value.shape;
      const T g = self->grad.data[0] / static_cast<T>(npix);
      for (int n = 0; n < s.n; ++n)
        for (std::size_t i = 0; i < hw; ++i) {
          const int cls = labels.data[static_cast<std::size_t>(n) * hw + i];
          const T raw = pp->value.plane(n, cls)[i];
          if (raw <= static_cast<T>(kProbClamp) || raw >= static_cast<T>(1.0 - kProbClamp))
            continue;  // clamped region
          const double p = static_cast<double>(raw);
          const double q = 1.0 - p;
          const double d =
              -alpha * (-gamma * std::pow(q, gamma - 1.0) * std::log(p) + std::pow(q, gamma) / p);
          pp->grad.plane(n, cls)[i] += g * static_cast<T>(d);
        }
    };
  }
  return node;
}

// 1 - mean over (sample, foreground class) of (2 sum(p g) + eps)/(sum p + sum g + eps).
template <class T>
Var<T> soft_dice_loss(Var<T> probs, const Tensor<T>& target_one_hot, double eps = 1e-6) {
  const Shape s = probs->value.shape;
  if (!(target_one_hot.shape == s))
    throw std::invalid_argument("soft_dice_loss: target shape mismatch");
  if (s.c < 2) throw std::invalid_argument("soft_dice_loss: needs background + foreground");
  const std::size_t hw = static_cast<std::size_t>(s.h) * s.w;
  const int fg = s.c - 1;

  std::vector<T> inter(static_cast<std::size_t>(s.n) * fg);
  std::vector<T> denom(static_cast<std::size_t>(s.n) * fg);
  T mean_dice = T{0};
  for (int n = 0; n < s.n; ++n)
    for (int k = 1; k < s.c; ++k) {
      const T* p = probs->value.plane(n, k);
      const T* g = target_one_hot.plane(n, k);
      T pg = T{0}, ps = T{0}, gs = T{0};
      for (std::size_t i = 0; i < hw; ++i) {
        pg += p[i] * g[i];
        ps += p[i];
        gs += g[i];
      }
      const std::size_t idx = static_cast<std::size_t>(n * fg + k - 1);
      inter[idx] = pg;
      denom[idx] = ps + gs + static_cast<T>(eps);
      mean_dice += (T{2} * pg + static_cast<T>(eps)) / denom[idx];
    }
  mean_dice /= static_cast<T>(s.n * fg);
  Tensor<T> out(Shape{1, 1, 1, 1});
  out.data[0] = T{1} - mean_dice;

  auto node = make_node<T>(std::move(out), {probs});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>* pp = probs.get();
    node->backward_fn = [self, pp, target = target_one_hot, inter = std::move(inter),
                         denom = std::move(denom), eps, hw, fg] {
      pp->ensure_grad();
      const Shape s = pp->value.shape;
      const T g0 = self->grad.data[0] / static_cast<T>(s.n * fg);
      for (int n = 0; n < s.n; ++n)
        for (int k = 1; k < s.c; ++k) {
          const std::size_t idx = static_cast<std::size_t>(n * fg + k - 1);
          const T num = T{2} * inter[idx] + static_cast<T>(eps);
          const T den = denom[idx];
          const T* gt = target.plane(n, k);
          T* dp = pp->grad.plane(n, k);
          for (std::size_t i = 0; i < hw; ++i) {
            const T ddice = (T{2} * gt[i] * den - num) / (den * den);
            dp[i] -= g0 * ddice;
          }
        }
    };
  }
  return node;
}

// Mean binary cross-entropy of p (N,1,H,W) against a {0,1} target.
template <class T>
Var<T> bce_loss(Var<T> p, const Tensor<T>& target) {
  const Shape s = p->value.shape;
  if (!(target.shape == s)) throw std::invalid_argument("bce_loss: target shape mismatch");
  const std::size_t count = s.numel();

  T total = T{0};
  for (std::size_t i = 0; i < count; ++i) {
    double v = static_cast<double>(p->value.data[i]);
    v = std::min(std::max(v, kProbClamp), 1.0 - kProbClamp);
    const double y = static_cast<double>(target.data[i]);
    total += static_cast<T>(-(y * std::log(v) + (1.0 - y) * std::log(1.0 - v)));
  }
  Tensor<T> out(Shape{1, 1, 1, 1});
  out.data[0] = total / static_cast<T>(count);

  auto node = make_node<T>(std::move(out), {p});
  if (node->requires_grad) {
    Node<T>* self = node.get();
    Node<T>* pp = p.get();
    node->backward_fn = [self, pp, target, count] {
      pp->ensure_grad();
      const T g = self->grad.data[0] / static_cast<T>(count);
      for (std::size_t i = 0; i < count; ++i) {
        const double v = static_cast<double>(pp->value.data[i]);
        if (v <= kProbClamp || v >= 1.0 - kProbClamp) continue;
        const double y = static_cast<double>(target.data[i]);
        pp->grad.data[i] += g * static_cast<T>((v - y) / (v * (1.0 - v)));
      }
    };
  }
  return node;
}

// ---------------------------------------------------------------------------
// clDice soft-skeleton machinery (iterated soft morphology)
// ---------------------------------------------------------------------------

template <class T>
Var<T> soft_erode(Var<T> img) {
  auto neg = mul_const(img, -1.0);
  auto p1 = mul_const(maxpool_same(neg, 3, 1), -1.0);
  auto p2 = mul_const(maxpool_same(neg, 1, 3), -1.0);
  return minimum(p1, p2);
}

template <class T>
Var<T> soft_dilate(Var<T> img) {
  return maxpool_same(img, 3, 3);
}

template <class T>
Var<T> soft_open(Var<T> img) {
  return soft_dilate(soft_erode(img));
}

template <class T>
Var<T> soft_skeleton(Var<T> img, int iterations) {
  auto skel = relu(sub(img, soft_open(img)));
  for (int j = 0; j < iterations; ++j) {
    img = soft_erode(img);
    auto delta = relu(sub(img, soft_open(img)));
    skel = add(skel, relu(sub(delta, mul(skel, delta))));
  }
  return skel;
}

// clDice on foreground probability maps (N,1,H,W): harmonic mean of topology
// precision and sensitivity computed from soft skeletons.
template <class T>
Var<T> cl_dice(Var<T> pred_fg, Var<T> target_fg, int skeleton_iters, double eps = 1e-6) {
  check_same_shape(pred_fg, target_fg, "cl_dice");
  auto skel_p = soft_skeleton(pred_fg, skeleton_iters);
  auto skel_t = soft_skeleton(target_fg, skeleton_iters);
  auto tprec = div(add_const(sum_all(mul(skel_p, target_fg)), eps),
                   add_const(sum_all(skel_p), eps));
  auto tsens = div(add_const(sum_all(mul(skel_t, pred_fg)), eps),
                   add_const(sum_all(skel_t), eps));
  return div(mul_const(mul(tprec, tsens), 2.0), add(tprec, tsens));
}

}  // namespace dtu::nn
