#pragma once

#include <vector>

#include "nmtprobe/autodiff.hpp"

namespace nmtprobe {

/// Plain SGD: value -= lr * grad.
void sgd_step(ParameterSet& params, double lr);

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(ParameterSet& params, double max_norm);

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias-corrected moments. Moment buffers are keyed by parameter
/// position and persist across steps; bind one Adam to one ParameterSet.
class Adam {
 public:
  explicit Adam(AdamOptions options = {});

  void step(ParameterSet& params);
  long steps() const { return t_; }
  const AdamOptions& options() const { return options_; }

 private:
  AdamOptions options_;
  long t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

/// Single Adam update with explicit step count `t` (1-based) and caller-owned
/// moment buffers.
void adam_step(Parameter& p, Tensor& m, Tensor& v, const AdamOptions& options, long t);

}  // namespace nmtprobe
