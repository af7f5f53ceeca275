#pragma once

#include <cstddef>
#include <vector>

#include "anc/nn/tensor.hpp"

namespace anc::nn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer with bias correction:
///
///   m = b1 m + (1 - b1) g,   v = b2 v + (1 - b2) g^2
///   p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
///
/// step() zeroes the gradients it consumed.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Tensor> parameters, AdamOptions options = {});

  /// Throws InvalidArgument if a parameter has no gradient buffer.
  void step();
  void zero_grad();

  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  const AdamOptions& options() const noexcept { return options_; }
  std::size_t step_count() const noexcept { return steps_; }
  const std::vector<std::vector<double>>& first_moments() const noexcept { return m_; }
  const std::vector<std::vector<double>>& second_moments() const noexcept { return v_; }

 private:
  std::vector<Tensor> params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t steps_ = 0;
};

}  // namespace anc::nn
