#pragma once

#include <cmath>
#include <vector>

#include "dtu/nn/unet.hpp"

namespace dtu::nn {

template <class T>
class Adam {
 public:
  explicit Adam(ParamList<T> params, double lr = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
      m_.emplace_back(p.var->value.shape);
      v_.emplace_back(p.var->value.shape);
    }
  }

  void zero_grad() {
    for (auto& p : params_) {
      p.var->ensure_grad();
      std::fill(p.var->grad.data.begin(), p.var->grad.data.end(), T{0});
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& value = params_[i].var->value.data;
      auto& grad = params_[i].var->grad.data;
      auto& m = m_[i].data;
      auto& v = v_[i].data;
      for (std::size_t j = 0; j < value.size(); ++j) {
        const double g = static_cast<double>(grad[j]);
        m[j] = static_cast<T>(beta1_ * m[j] + (1.0 - beta1_) * g);
        v[j] = static_cast<T>(beta2_ * v[j] + (1.0 - beta2_) * g * g);
        const double mhat = static_cast<double>(m[j]) / bc1;
        const double vhat = static_cast<double>(v[j]) / bc2;
        value[j] = static_cast<T>(value[j] - lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  void set_lr(double lr) { lr_ = lr; }
  long long step_count() const { return t_; }
  ParamList<T>& params() { return params_; }
  std::vector<Tensor<T>>& moment1() { return m_; }
  std::vector<Tensor<T>>& moment2() { return v_; }
  void set_step_count(long long t) { t_ = t; }

 private:
  ParamList<T> params_;
  std::vector<Tensor<T>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
};

}  // namespace dtu::nn
