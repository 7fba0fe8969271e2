#pragma once

// Adam with bias correction plus the warmup-cosine learning-rate schedule.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "aetnet/nn.hpp"

namespace aetnet::nn {

template <typename S>
class Adam {
 public:
  explicit Adam(S beta1 = S(0.9), S beta2 = S(0.999), S eps = S(1e-8))
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // One update over every trainable parameter; `lr` is supplied per step so a
  // schedule can drive it. Parameters without an accumulated gradient buffer
  // are treated as zero-gradient (left unchanged by the math below except for
  // moment decay).
  void step(std::vector<Parameter<S>>& params, S lr) {
    if (moments_.empty()) {
      moments_.resize(params.size());
      for (size_t i = 0; i < params.size(); ++i) {
        moments_[i].m.assign(params[i].tensor->size(), S(0));
        moments_[i].v.assign(params[i].tensor->size(), S(0));
      }
    }
    if (moments_.size() != params.size())
      throw std::invalid_argument("Adam: parameter list changed size");
    ++t_;
    const S bc1 = S(1) - std::pow(beta1_, S(t_));
    const S bc2 = S(1) - std::pow(beta2_, S(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      if (!p.trainable) continue;
      auto& t = *p.tensor;
      if (t.grad.size() != t.value.size())
        throw std::invalid_argument("Adam: gradient buffer missing for " + p.name);
      auto& mom = moments_[i];
      if (mom.m.size() != t.value.size())
        throw std::invalid_argument("Adam: moment shape mismatch for " + p.name);
      for (size_t j = 0; j < t.value.size(); ++j) {
        S g = t.grad[j];
        mom.m[j] = beta1_ * mom.m[j] + (S(1) - beta1_) * g;
        mom.v[j] = beta2_ * mom.v[j] + (S(1) - beta2_) * g * g;
        S mhat = mom.m[j] / bc1;
        S vhat = mom.v[j] / bc2;
        t.value[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  int64_t step_count() const { return t_; }

 private:
  struct Moments {
    std::vector<S> m, v;
  };
  S beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<Moments> moments_;
};

// Linear ramp 0 -> base_lr over the first warmup_frac of total_steps, then
// cosine decay base_lr -> 0 at total_steps.
inline double cosine_warmup_lr(int64_t step, int64_t total_steps, double base_lr,
                               double warmup_frac = 0.1) {
  if (total_steps < 1) throw std::invalid_argument("cosine_warmup_lr: total_steps must be >= 1");
  if (step < 0 || step > total_steps)
    throw std::invalid_argument("cosine_warmup_lr: step " + std::to_string(step) +
                                " outside [0, " + std::to_string(total_steps) + "]");
  if (warmup_frac < 0.0 || warmup_frac >= 1.0)
    throw std::invalid_argument("cosine_warmup_lr: warmup_frac must be in [0, 1)");
  const double warm = warmup_frac * (double)total_steps;
  if (warm > 0.0 && (double)step <= warm) return base_lr * (double)step / warm;
  const double progress = ((double)step - warm) / ((double)total_steps - warm);
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

}  // namespace aetnet::nn
