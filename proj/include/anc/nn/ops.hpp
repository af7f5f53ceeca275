#pragma once

#include "anc/nn/tensor.hpp"

// Differentiable operations. Every op validates shapes up front and throws
// InvalidArgument on mismatch; gradients are only computed for inputs that
// require them.
namespace anc::nn {

/// Valid 1-D cross-correlation. input [B,C,L], kernel [C',C,K], bias [C']
/// (pass an undefined Tensor for no bias) -> [B,C',(L-K)/stride+1].
Tensor conv1d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// Non-overlapping max over windows of `window` samples along the last axis
/// of [B,C,L]; a trailing partial window is dropped. Ties go to the first
/// maximum.
Tensor maxpool1d(const Tensor& x, std::size_t window);

/// Mean over the last axis: [B,C,L] -> [B,C].
Tensor global_avgpool(const Tensor& x);

/// x [B,I], weight [O,I], bias [O] -> [B,O].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// a [B,M] @ b [M,N] -> [B,N].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor square(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// mean((a - b)^2).
Tensor mse(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& x, Shape shape);

/// [B,L] -> [B,count+L] with `count` leading zeros per row.
Tensor pad_left(const Tensor& x, std::size_t count);

/// Sliding windows along the last axis: [B,L] -> [B,(L-window)/stride+1,window].
Tensor unfold(const Tensor& x, std::size_t window, std::size_t stride);

/// Reverses the last axis.
Tensor flip_last(const Tensor& x);

/// Row-wise matrix-vector product: a [B,R,N], v [B,N] -> [B,R] with
/// out[b,r] = sum_j a[b,r,j] * v[b,j] accumulated in ascending j.
Tensor batched_matvec(const Tensor& a, const Tensor& v);

}  // namespace anc::nn
