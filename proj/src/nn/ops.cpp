#include "anc/nn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "anc/error.hpp"

namespace anc::nn {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw InvalidArgument(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                          to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                          to_string(b.shape()));
  }
}

template <typename F>
Tensor unary(const Tensor& x, F&& value_and_slope) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  std::vector<double> slope(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) std::tie(out[i], slope[i]) = value_and_slope(in[i]);
  return Tensor::from_op(x.shape(), std::move(out), {x}, [x, slope = std::move(slope)](const Tensor& y) {
    if (!x.requires_grad()) return;
    auto gx = x.grad_buffer();
    const auto gy = y.grad();
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * slope[i];
  });
}

}  // namespace

Tensor conv1d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride) {
  require_rank(input, 3, "conv1d input");
  require_rank(kernel, 3, "conv1d kernel");
  if (stride < 1) throw InvalidArgument("conv1d stride must be >= 1");
  const std::size_t batch = input.dim(0), channels = input.dim(1), length = input.dim(2);
  const std::size_t out_channels = kernel.dim(0), k = kernel.dim(2);
  if (kernel.dim(1) != channels) {
    throw InvalidArgument("conv1d: kernel expects " + std::to_string(kernel.dim(1)) + " input channels, got " +
                          std::to_string(channels));
  }
  if (k > length) throw InvalidArgument("conv1d: kernel longer than input");
  const bool has_bias = bias.defined();
  if (has_bias) require_shape(bias, {out_channels}, "conv1d bias");
  const std::size_t out_len = (length - k) / stride + 1;

  const auto x = input.data();
  const auto w = kernel.data();
  std::vector<double> out(batch * out_channels * out_len);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out_channels; ++o) {
      double* y = out.data() + (b * out_channels + o) * out_len;
      const double b0 = has_bias ? bias.data()[o] : 0.0;
      std::fill(y, y + out_len, b0);
      for (std::size_t c = 0; c < channels; ++c) {
        const double* xr = x.data() + (b * channels + c) * length;
        const double* wr = w.data() + (o * channels + c) * k;
        for (std::size_t t = 0; t < out_len; ++t) {
          const double* xs = xr + t * stride;
          double acc = 0.0;
          for (std::size_t j = 0; j < k; ++j) acc += wr[j] * xs[j];
          y[t] += acc;
        }
      }
    }
  }

  std::vector<Tensor> parents{input, kernel};
  if (has_bias) parents.push_back(bias);
  return Tensor::from_op(
      {batch, out_channels, out_len}, std::move(out), std::move(parents),
      [=](const Tensor& y) {
        const auto gy = y.grad();
        const auto xd = input.data();
        const auto wd = kernel.data();
        if (input.requires_grad()) {
          auto gx = input.grad_buffer();
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t o = 0; o < out_channels; ++o)
              for (std::size_t c = 0; c < channels; ++c) {
                const double* g = gy.data() + (b * out_channels + o) * out_len;
                const double* wr = wd.data() + (o * channels + c) * k;
                double* gr = gx.data() + (b * channels + c) * length;
                for (std::size_t t = 0; t < out_len; ++t) {
                  const double gt = g[t];
                  double* dst = gr + t * stride;
                  for (std::size_t j = 0; j < k; ++j) dst[j] += gt * wr[j];
                }
              }
        }
        if (kernel.requires_grad()) {
          auto gw = kernel.grad_buffer();
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t o = 0; o < out_channels; ++o)
              for (std::size_t c = 0; c < channels; ++c) {
                const double* g = gy.data() + (b * out_channels + o) * out_len;
                const double* xr = xd.data() + (b * channels + c) * length;
                double* dst = gw.data() + (o * channels + c) * k;
                for (std::size_t t = 0; t < out_len; ++t) {
                  const double gt = g[t];
                  const double* xs = xr + t * stride;
                  for (std::size_t j = 0; j < k; ++j) dst[j] += gt * xs[j];
                }
              }
        }
        if (has_bias && bias.requires_grad()) {
          auto gb = bias.grad_buffer();
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t o = 0; o < out_channels; ++o) {
              const double* g = gy.data() + (b * out_channels + o) * out_len;
              double acc = 0.0;
              for (std::size_t t = 0; t < out_len; ++t) acc += g[t];
              gb[o] += acc;
            }
        }
      });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? std::pair{v, 1.0} : std::pair{0.0, 0.0}; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, [](double v) {
    // Branch on sign so exp never overflows.
    const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    return std::pair{s, s * (1.0 - s)};
  });
}

Tensor maxpool1d(const Tensor& x, std::size_t window) {
  require_rank(x, 3, "maxpool1d input");
  if (window < 1) throw InvalidArgument("maxpool1d window must be >= 1");
  const std::size_t rows = x.dim(0) * x.dim(1), length = x.dim(2);
  const std::size_t out_len = length / window;
  if (out_len == 0) throw InvalidArgument("maxpool1d: window longer than input");
  const auto in = x.data();
  std::vector<double> out(rows * out_len);
  std::vector<std::size_t> argmax(rows * out_len);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < out_len; ++t) {
      std::size_t best = r * length + t * window;
      for (std::size_t j = 1; j < window; ++j) {
        const std::size_t idx = r * length + t * window + j;
        if (in[idx] > in[best]) best = idx;
      }
      out[r * out_len + t] = in[best];
      argmax[r * out_len + t] = best;
    }
  }
  return Tensor::from_op({x.dim(0), x.dim(1), out_len}, std::move(out), {x},
                         [x, argmax = std::move(argmax)](const Tensor& y) {
                           if (!x.requires_grad()) return;
                           auto gx = x.grad_buffer();
                           const auto gy = y.grad();
                           for (std::size_t i = 0; i < gy.size(); ++i) gx[argmax[i]] += gy[i];
                         });
}

Tensor global_avgpool(const Tensor& x) {
  require_rank(x, 3, "global_avgpool input");
  const std::size_t rows = x.dim(0) * x.dim(1), length = x.dim(2);
  const auto in = x.data();
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t t = 0; t < length; ++t) acc += in[r * length + t];
    out[r] = acc / static_cast<double>(length);
  }
  return Tensor::from_op({x.dim(0), x.dim(1)}, std::move(out), {x}, [x, rows, length](const Tensor& y) {
    if (!x.requires_grad()) return;
    auto gx = x.grad_buffer();
    const auto gy = y.grad();
    const double scale = 1.0 / static_cast<double>(length);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t t = 0; t < length; ++t) gx[r * length + t] += gy[r] * scale;
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "linear input");
  require_rank(weight, 2, "linear weight");
  const std::size_t batch = x.dim(0), in_features = x.dim(1), out_features = weight.dim(0);
  if (weight.dim(1) != in_features) throw InvalidArgument("linear: weight does not match input features");
  require_shape(bias, {out_features}, "linear bias");
  const auto xd = x.data();
  const auto wd = weight.data();
  const auto bd = bias.data();
  std::vector<double> out(batch * out_features);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out_features; ++o) {
      double acc = bd[o];
      for (std::size_t i = 0; i < in_features; ++i) acc += wd[o * in_features + i] * xd[b * in_features + i];
      out[b * out_features + o] = acc;
    }
  return Tensor::from_op({batch, out_features}, std::move(out), {x, weight, bias}, [=](const Tensor& y) {
    const auto gy = y.grad();
    const auto xv = x.data();
    const auto wv = weight.data();
    if (x.requires_grad()) {
      auto gx = x.grad_buffer();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t o = 0; o < out_features; ++o)
          for (std::size_t i = 0; i < in_features; ++i)
            gx[b * in_features + i] += gy[b * out_features + o] * wv[o * in_features + i];
    }
    if (weight.requires_grad()) {
      auto gw = weight.grad_buffer();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t o = 0; o < out_features; ++o)
          for (std::size_t i = 0; i < in_features; ++i)
            gw[o * in_features + i] += gy[b * out_features + o] * xv[b * in_features + i];
    }
    if (bias.requires_grad()) {
      auto gb = bias.grad_buffer();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t o = 0; o < out_features; ++o) gb[o] += gy[b * out_features + o];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  const std::size_t rows = a.dim(0), inner = a.dim(1), cols = b.dim(1);
  if (b.dim(0) != inner) {
    throw InvalidArgument("matmul: inner dimensions differ " + to_string(a.shape()) + " @ " + to_string(b.shape()));
  }
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(rows * cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < inner; ++i) {
      const double av = ad[r * inner + i];
      const double* brow = bd.data() + i * cols;
      double* orow = out.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) orow[c] += av * brow[c];
    }
  return Tensor::from_op({rows, cols}, std::move(out), {a, b}, [=](const Tensor& y) {
    const auto gy = y.grad();
    const auto av = a.data();
    const auto bv = b.data();
    if (a.requires_grad()) {
      auto ga = a.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < inner; ++i) {
          double acc = 0.0;
          for (std::size_t c = 0; c < cols; ++c) acc += gy[r * cols + c] * bv[i * cols + c];
          ga[r * inner + i] += acc;
        }
    }
    if (b.requires_grad()) {
      auto gb = b.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < inner; ++i) {
          const double av_ri = av[r * inner + i];
          for (std::size_t c = 0; c < cols; ++c) gb[i * cols + c] += av_ri * gy[r * cols + c];
        }
    }
  });
}

namespace {

template <typename Op, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* what, Op op, DA da, DB db) {
  require_same_shape(a, b, what);
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = op(ad[i], bd[i]);
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, [=](const Tensor& y) {
    const auto gy = y.grad();
    const auto av = a.data();
    const auto bv = b.data();
    if (a.requires_grad()) {
      auto ga = a.grad_buffer();
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * da(av[i], bv[i]);
    }
    if (b.requires_grad()) {
      auto gb = b.grad_buffer();
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * db(av[i], bv[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor square(const Tensor& x) {
  return unary(x, [](double v) { return std::pair{v * v, 2.0 * v}; });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return Tensor::from_op({1}, {acc}, {x}, [x](const Tensor& y) {
    if (!x.requires_grad()) return;
    auto gx = x.grad_buffer();
    const double g = y.grad()[0];
    for (double& v : gx) v += g;
  });
}

Tensor mean(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  const double scale = 1.0 / static_cast<double>(x.numel());
  return Tensor::from_op({1}, {acc * scale}, {x}, [x, scale](const Tensor& y) {
    if (!x.requires_grad()) return;
    auto gx = x.grad_buffer();
    const double g = y.grad()[0] * scale;
    for (double& v : gx) v += g;
  });
}

Tensor mse(const Tensor& a, const Tensor& b) { return mean(square(sub(a, b))); }

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw InvalidArgument("reshape: " + to_string(x.shape()) + " cannot become " + to_string(shape));
  }
  return Tensor::from_op(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()), {x},
                         [x](const Tensor& y) {
                           if (!x.requires_grad()) return;
                           auto gx = x.grad_buffer();
                           const auto gy = y.grad();
                           for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
                         });
}

Tensor pad_left(const Tensor& x, std::size_t count) {
  require_rank(x, 2, "pad_left input");
  const std::size_t rows = x.dim(0), length = x.dim(1), padded = length + count;
  const auto in = x.data();
  std::vector<double> out(rows * padded, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(in.data() + r * length, length, out.data() + r * padded + count);
  }
  return Tensor::from_op({rows, padded}, std::move(out), {x}, [=](const Tensor& y) {
    if (!x.requires_grad()) return;
    auto gx = x.grad_buffer();
    const auto gy = y.grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t t = 0; t < length; ++t) gx[r * length + t] += gy[r * padded + count + t];
  });
}

Tensor unfold(const Tensor& x, std::size_t window, std::size_t stride) {
  require_rank(x, 2, "unfold input");
  if (window < 1 || stride < 1) throw InvalidArgument("unfold: window and stride must be >= 1");
  const std::size_t rows = x.dim(0), length = x.dim(1);
  if (window > length) throw InvalidArgument("unfold: window longer than input");
  const std::size_t count = (length - window) / stride + 1;
  const auto in = x.data();
  std::vector<double> out(rows * count * window);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t t = 0; t < count; ++t) {
      std::copy_n(in.data() + r * length + t * stride, window, out.data() + (r * count + t) * window);
    }
  return Tensor::from_op({rows, count, window}, std::move(out), {x}, [=](const Tensor& y) {
    if (!x.requires_grad()) return;
    auto gx = x.grad_buffer();
    const auto gy = y.grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t t = 0; t < count; ++t)
        for (std::size_t j = 0; j < window; ++j)
          gx[r * length + t * stride + j] += gy[(r * count + t) * window + j];
  });
}

Tensor flip_last(const Tensor& x) {
  const std::size_t last = x.shape().back();
  const std::size_t rows = x.numel() / last;
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < last; ++j) out[r * last + j] = in[r * last + (last - 1 - j)];
  return Tensor::from_op(x.shape(), std::move(out), {x}, [=](const Tensor& y) {
    if (!x.requires_grad()) return;
    auto gx = x.grad_buffer();
    const auto gy = y.grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < last; ++j) gx[r * last + (last - 1 - j)] += gy[r * last + j];
  });
}

Tensor batched_matvec(const Tensor& a, const Tensor& v) {
  require_rank(a, 3, "batched_matvec matrix");
  require_rank(v, 2, "batched_matvec vector");
  const std::size_t batch = a.dim(0), rows = a.dim(1), cols = a.dim(2);
  if (v.dim(0) != batch || v.dim(1) != cols) {
    throw InvalidArgument("batched_matvec: " + to_string(a.shape()) + " x " + to_string(v.shape()));
  }
  const auto ad = a.data();
  const auto vd = v.data();
  std::vector<double> out(batch * rows);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t r = 0; r < rows; ++r) {
      const double* arow = ad.data() + (b * rows + r) * cols;
      const double* vrow = vd.data() + b * cols;
      double acc = 0.0;
      for (std::size_t j = 0; j < cols; ++j) acc += arow[j] * vrow[j];
      out[b * rows + r] = acc;
    }
  return Tensor::from_op({batch, rows}, std::move(out), {a, v}, [=](const Tensor& y) {
    const auto gy = y.grad();
    const auto av = a.data();
    const auto vv = v.data();
    if (a.requires_grad()) {
      auto ga = a.grad_buffer();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t r = 0; r < rows; ++r) {
          const double g = gy[b * rows + r];
          for (std::size_t j = 0; j < cols; ++j) ga[(b * rows + r) * cols + j] += g * vv[b * cols + j];
        }
    }
    if (v.requires_grad()) {
      auto gv = v.grad_buffer();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t r = 0; r < rows; ++r) {
          const double g = gy[b * rows + r];
          for (std::size_t j = 0; j < cols; ++j) gv[b * cols + j] += g * av[(b * rows + r) * cols + j];
        }
    }
  });
}

}  // namespace anc::nn
