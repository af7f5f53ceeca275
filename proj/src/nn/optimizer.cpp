#include "anc/nn/optimizer.hpp"

#include <cmath>

#include "anc/error.hpp"

namespace anc::nn {

AdamOptimizer::AdamOptimizer(std::vector<Tensor> parameters, AdamOptions options)
    : params_(std::move(parameters)), options_(options) {
  if (!(options_.learning_rate >= 0.0)) throw InvalidArgument("learning rate must be >= 0");
  for (const auto& p : params_) {
    if (!p.requires_grad()) throw InvalidArgument("optimizer parameter does not require grad");
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void AdamOptimizer::step() {
  for (const auto& p : params_) {
    if (!p.has_grad()) throw InvalidArgument("optimizer step before gradients were computed");
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(options_.beta1, t);
  const double correction2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    const auto g = p.grad();
    auto data = p.mutable_data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < data.size(); ++i) {
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g[i];
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      data[i] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
  zero_grad();
}

void AdamOptimizer::zero_grad() {
  for (const auto& p : params_) p.zero_grad();
}

}  // namespace anc::nn
