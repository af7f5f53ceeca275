#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "anc/rng.hpp"

namespace anc {

/// Sampled real time series. Samples are finite and the rate is positive;
/// both are checked on construction.
class Signal {
 public:
  Signal() = default;
  Signal(std::vector<double> samples, std::uint32_t sample_rate_hz);

  std::span<const double> samples() const noexcept { return samples_; }
  const std::vector<double>& vector() const noexcept { return samples_; }
  std::uint32_t sample_rate_hz() const noexcept { return sample_rate_hz_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  double operator[](std::size_t i) const { return samples_[i]; }

  /// Samples [begin, begin + count) as a new signal.
  Signal slice(std::size_t begin, std::size_t count) const;

  friend bool operator==(const Signal&, const Signal&) = default;

 private:
  std::vector<double> samples_;
  std::uint32_t sample_rate_hz_ = 1;
};

/// FIR coefficients. Never empty.
class ImpulseResponse {
 public:
  ImpulseResponse() = default;
  ImpulseResponse(std::vector<double> taps, std::uint32_t sample_rate_hz);

  /// Unit impulse of the given length (default 1).
  static ImpulseResponse delta(std::uint32_t sample_rate_hz, std::size_t length = 1);

  std::span<const double> taps() const noexcept { return taps_; }
  const std::vector<double>& vector() const noexcept { return taps_; }
  std::uint32_t sample_rate_hz() const noexcept { return sample_rate_hz_; }
  std::size_t size() const noexcept { return taps_.size(); }
  double operator[](std::size_t i) const { return taps_[i]; }

  friend bool operator==(const ImpulseResponse&, const ImpulseResponse&) = default;

 private:
  std::vector<double> taps_;
  std::uint32_t sample_rate_hz_ = 1;
};

/// Full linear convolution, length len(a) + len(b) - 1.
Signal convolve_full(const Signal& a, const ImpulseResponse& b);

/// Causal filtering with zero initial state; output has len(a) samples and
/// equals the first len(a) samples of convolve_full(a, b).
Signal filter_same(const Signal& a, const ImpulseResponse& b);

/// Linear-phase Hann-windowed sinc bandpass. Requires
/// 0 < low_hz < high_hz < sample_rate_hz / 2 and an odd tap count.
ImpulseResponse design_bandpass(double low_hz, double high_hz, std::size_t num_taps,
                                std::uint32_t sample_rate_hz);

/// i.i.d. standard normal samples drawn from `rng`.
Signal white_noise(Rng& rng, std::size_t num_samples, std::uint32_t sample_rate_hz);

/// |DFT| of `a` zero-padded to nfft (a power of two >= len(a));
/// returns nfft/2 + 1 bins.
std::vector<double> fft_magnitude(std::span<const double> a, std::size_t nfft);
std::vector<double> fft_magnitude(const Signal& a, std::size_t nfft);

std::vector<double> hann_window(std::size_t length, bool periodic);

bool is_power_of_two(std::size_t n);

namespace kernels {

/// out[n] = sum_{j <= n, j < len(h)} h[j] * x[n - j] for n < out.size(),
/// where out.size() <= len(x) + len(h) - 1 and x is zero beyond its end.
/// The per-output sum runs in ascending j. The loop is written in axpy form
/// (outer j, inner n) so it vectorises without reassociating any sum.
void causal_filter(std::span<const double> x, std::span<const double> h, std::span<double> out);

double dot(std::span<const double> a, std::span<const double> b);
double energy(std::span<const double> a);

}  // namespace kernels

}  // namespace anc
