#include "anc/anc_loss.hpp"

#include <algorithm>

#include "anc/error.hpp"
#include "anc/nn/ops.hpp"
#include "anc/parallel.hpp"

namespace anc {

namespace {

void check_shapes(const nn::Tensor& filters, const nn::Tensor& fx) {
  if (filters.rank() != 2 || fx.rank() != 2) {
    throw InvalidArgument("anti_noise expects W [B,N] and Fx [B,F_s], got " + nn::to_string(filters.shape()) +
                          " and " + nn::to_string(fx.shape()));
  }
  if (filters.dim(0) != fx.dim(0)) {
    throw InvalidArgument("anti_noise batch sizes differ: " + nn::to_string(filters.shape()) + " vs " +
                          nn::to_string(fx.shape()));
  }
}

}  // namespace

std::string to_string(LossReduction reduction) { return reduction == LossReduction::Mean ? "mean" : "sum"; }

LossReduction loss_reduction_from_string(const std::string& name) {
  if (name == "mean") return LossReduction::Mean;
  if (name == "sum") return LossReduction::Sum;
  throw InvalidArgument("unknown loss reduction '" + name + "' (expected mean or sum)");
}

std::size_t unfolded_working_set_bytes(std::size_t batch, std::size_t frame_length, std::size_t num_taps) {
  return 2 * batch * frame_length * num_taps * sizeof(double);
}

nn::Tensor anti_noise_unfolded(const nn::Tensor& filters, const nn::Tensor& filtered_reference) {
  check_shapes(filters, filtered_reference);
  const std::size_t n = filters.dim(1);
  const nn::Tensor padded = nn::pad_left(filtered_reference, n - 1);
  const nn::Tensor windows = nn::unfold(padded, n, 1);
  const nn::Tensor flipped = nn::flip_last(windows);
  return nn::batched_matvec(flipped, filters);
}

nn::Tensor anti_noise_streaming(const nn::Tensor& filters, const nn::Tensor& filtered_reference) {
  check_shapes(filters, filtered_reference);
  const std::size_t batch = filters.dim(0), n = filters.dim(1), len = filtered_reference.dim(1);
  const auto w = filters.data();
  const auto fx = filtered_reference.data();
  std::vector<double> out(batch * len);
  parallel_for(batch, [&](std::size_t b) {
    kernels::causal_filter(fx.subspan(b * len, len), w.subspan(b * n, n), std::span(out).subspan(b * len, len));
  });

  return nn::Tensor::from_op({batch, len}, std::move(out), {filters, filtered_reference},
                             [=](const nn::Tensor& y) {
                               const auto gy = y.grad();
                               const auto wv = filters.data();
                               const auto xv = filtered_reference.data();
                               std::span<double> gw;
                               std::span<double> gx;
                               if (filters.requires_grad()) gw = filters.grad_buffer();
                               if (filtered_reference.requires_grad()) gx = filtered_reference.grad_buffer();
                               parallel_for(batch, [&](std::size_t b) {
                                 const double* g = gy.data() + b * len;
                                 const double* x = xv.data() + b * len;
                                 if (!gw.empty()) {
                                   // dW[j] += sum_n g[n] * x[n - j]; x reversed so the
                                   // inner loop over j is contiguous.
                                   std::vector<double> reversed(x, x + len);
                                   std::reverse(reversed.begin(), reversed.end());
                                   double* dw = gw.data() + b * n;
                                   for (std::size_t t = 0; t < len; ++t) {
                                     const double gt = g[t];
                                     const std::size_t j_end = std::min(n, t + 1);
                                     const double* r = reversed.data() + (len - 1 - t);
                                     for (std::size_t j = 0; j < j_end; ++j) dw[j] += gt * r[j];
                                   }
                                 }
                                 if (!gx.empty()) {
                                   // dFx[k] += sum_j W[j] * g[k + j].
                                   const double* wr = wv.data() + b * n;
                                   double* dx = gx.data() + b * len;
                                   for (std::size_t j = 0; j < std::min(n, len); ++j) {
                                     const double wj = wr[j];
                                     for (std::size_t k = 0; k + j < len; ++k) dx[k] += wj * g[k + j];
                                   }
                                 }
                               });
                             });
}

nn::Tensor anti_noise(const nn::Tensor& filters, const nn::Tensor& filtered_reference,
                      const AntiNoiseOptions& options) {
  check_shapes(filters, filtered_reference);
  const std::size_t bytes = unfolded_working_set_bytes(filters.dim(0), filtered_reference.dim(1), filters.dim(1));
  if (bytes <= options.memory_budget_bytes) return anti_noise_unfolded(filters, filtered_reference);
  return anti_noise_streaming(filters, filtered_reference);
}

nn::Tensor error_signal(const LossBatch& batch, const AntiNoiseOptions& options) {
  nn::require_shape(batch.disturbance, batch.filtered_reference.shape(), "disturbance");
  return nn::sub(batch.disturbance, anti_noise(batch.control_filters, batch.filtered_reference, options));
}

nn::Tensor anc_loss(const LossBatch& batch, LossReduction reduction, const AntiNoiseOptions& options) {
  const nn::Tensor err_sq = nn::square(error_signal(batch, options));
  return reduction == LossReduction::Mean ? nn::mean(err_sq) : nn::sum(err_sq);
}

Signal per_frame_error(const ControlFilter& filter, const Signal& disturbance, const Signal& filtered_reference) {
  if (disturbance.size() != filtered_reference.size()) {
    throw InvalidArgument("disturbance and filtered reference lengths differ");
  }
  std::vector<double> e(disturbance.size());
  kernels::causal_filter(filtered_reference.samples(), filter.taps(), e);
  const auto d = disturbance.samples();
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = d[i] - e[i];
  return Signal(std::move(e), disturbance.sample_rate_hz());
}

}  // namespace anc
