#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "anc/nn/tensor.hpp"
#include "anc/rng.hpp"

namespace testing {

inline std::vector<double> normals(anc::Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

/// Largest relative error between backprop and central differences for every
/// entry of every input, denominators floored at 1e-8.
inline double gradcheck(std::vector<anc::nn::Tensor> inputs,
                        const std::function<anc::nn::Tensor(const std::vector<anc::nn::Tensor>&)>& f,
                        double eps = 1e-6) {
  for (auto& t : inputs) t.zero_grad();
  f(inputs).backward();
  double worst = 0.0;
  for (auto& t : inputs) {
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double keep = values[i];
      values[i] = keep + eps;
      const double up = f(inputs).item();
      values[i] = keep - eps;
      const double down = f(inputs).item();
      values[i] = keep;
      const double numeric = (up - down) / (2.0 * eps);
      const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
    }
  }
  return worst;
}

}  // namespace testing
