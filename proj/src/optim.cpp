#include "nmtprobe/optim.hpp"

#include <cmath>

namespace nmtprobe {

void sgd_step(ParameterSet& params, double lr) {
  if (!(lr > 0.0)) throw ValueError("sgd_step: learning rate must be positive");
  for (auto& p : params) p.value -= lr * p.grad;
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) sq += p.grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& p : params) p.grad *= factor;
  }
  return norm;
}

void adam_step(Parameter& p, Tensor& m, Tensor& v, const AdamOptions& o, long t) {
  if (!(o.lr > 0.0)) throw ValueError("adam_step: learning rate must be positive");
  if (t < 1) throw ValueError("adam_step: step count is 1-based");
  m = o.beta1 * m + (1.0 - o.beta1) * p.grad;
  v = o.beta2 * v + (1.0 - o.beta2) * p.grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(t));
  p.value.array() -= o.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + o.eps);
}

Adam::Adam(AdamOptions options) : options_(options) {
  if (!(options_.lr > 0.0)) throw ValueError("Adam: learning rate must be positive");
}

void Adam::step(ParameterSet& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Tensor::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Tensor::Zero(p.value.rows(), p.value.cols()));
    }
  }
  if (m_.size() != params.size()) throw ValueError("Adam: parameter set changed between steps");
  ++t_;
  for (std::size_t i = 0; i < params.size(); ++i) adam_step(params[i], m_[i], v_[i], options_, t_);
}

}  // namespace nmtprobe
