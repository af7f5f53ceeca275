#pragma once

#include <cstddef>
#include <string>

#include "anc/control_filters.hpp"
#include "anc/nn/tensor.hpp"
#include "anc/signal.hpp"

namespace anc {

/// Inputs of one loss evaluation: disturbance and filtered reference
/// [B, F_s], generated control filters [B, N]. F_s < N is allowed.
struct LossBatch {
  nn::Tensor disturbance;
  nn::Tensor filtered_reference;
  nn::Tensor control_filters;
};

enum class LossReduction { Mean, Sum };

std::string to_string(LossReduction reduction);
LossReduction loss_reduction_from_string(const std::string& name);

struct AntiNoiseOptions {
  /// Largest working set, in bytes, the materialised unfold path may use
  /// before anti_noise switches to the streaming kernel.
  std::size_t memory_budget_bytes = std::size_t{2} << 30;
};

/// Bytes held by the materialised path: the unfolded windows plus their
/// flipped copy, 2 * B * F_s * N doubles.
std::size_t unfolded_working_set_bytes(std::size_t batch, std::size_t frame_length, std::size_t num_taps);

/// Anti-noise y(b,n) = sum_{j<N} W(b,j) * Fx(b,n-j), with Fx(b,k) = 0 for k < 0,
/// built literally from differentiable primitives: left-pad Fx by N-1
/// zeros, unfold into F_s windows of length N (stride 1), flip each window,
/// then a row-wise matrix-vector product with W.
nn::Tensor anti_noise_unfolded(const nn::Tensor& filters, const nn::Tensor& filtered_reference);

/// Same values as anti_noise_unfolded computed row by row with O(F_s + N)
/// scratch per row. Rows run in parallel; each row's reduction order is
/// fixed, so results do not depend on the worker count.
nn::Tensor anti_noise_streaming(const nn::Tensor& filters, const nn::Tensor& filtered_reference);

/// Picks the unfolded path when it fits the budget, otherwise streaming.
nn::Tensor anti_noise(const nn::Tensor& filters, const nn::Tensor& filtered_reference,
                      const AntiNoiseOptions& options = {});

/// Err = Dis - anti_noise(W, Fx).
nn::Tensor error_signal(const LossBatch& batch, const AntiNoiseOptions& options = {});

/// mean(Err^2) over all B * F_s entries (or the plain sum).
nn::Tensor anc_loss(const LossBatch& batch, LossReduction reduction = LossReduction::Mean,
                    const AntiNoiseOptions& options = {});

/// e = d - W applied to x' with zero initial state. Not differentiable;
/// equals one row of the batched pipeline.
Signal per_frame_error(const ControlFilter& filter, const Signal& disturbance, const Signal& filtered_reference);

}  // namespace anc
