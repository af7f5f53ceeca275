#include "anc/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "anc/error.hpp"
#include "anc/fft.hpp"

namespace anc {

namespace {

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + " contains a non-finite value");
  }
}

void require_same_rate(std::uint32_t a, std::uint32_t b) {
  if (a != b) {
    throw InvalidArgument("sample-rate mismatch: " + std::to_string(a) + " Hz vs " + std::to_string(b) +
                          " Hz");
  }
}

double sinc_lowpass(double cutoff_norm, double m) {
  // Ideal lowpass impulse response 2fc * sinc(2fc m) with fc in cycles/sample.
  if (m == 0.0) return 2.0 * cutoff_norm;
  return std::sin(2.0 * std::numbers::pi * cutoff_norm * m) / (std::numbers::pi * m);
}

}  // namespace

Signal::Signal(std::vector<double> samples, std::uint32_t sample_rate_hz)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
  if (sample_rate_hz_ == 0) throw InvalidArgument("sample rate must be positive");
  require_finite(samples_, "signal");
}

Signal Signal::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > samples_.size()) throw InvalidArgument("signal slice out of range");
  return Signal(std::vector<double>(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                    samples_.begin() + static_cast<std::ptrdiff_t>(begin + count)),
                sample_rate_hz_);
}

ImpulseResponse::ImpulseResponse(std::vector<double> taps, std::uint32_t sample_rate_hz)
    : taps_(std::move(taps)), sample_rate_hz_(sample_rate_hz) {
  if (sample_rate_hz_ == 0) throw InvalidArgument("sample rate must be positive");
  if (taps_.empty()) throw InvalidArgument("impulse response must have at least one tap");
  require_finite(taps_, "impulse response");
}

ImpulseResponse ImpulseResponse::delta(std::uint32_t sample_rate_hz, std::size_t length) {
  std::vector<double> taps(std::max<std::size_t>(1, length), 0.0);
  taps[0] = 1.0;
  return ImpulseResponse(std::move(taps), sample_rate_hz);
}

namespace kernels {

void causal_filter(std::span<const double> x, std::span<const double> h, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (x.empty() || h.empty()) return;
  constexpr std::size_t kBlock = 2048;
  const std::size_t n_out = out.size();
  for (std::size_t n0 = 0; n0 < n_out; n0 += kBlock) {
    const std::size_t n1 = std::min(n_out, n0 + kBlock);
    const std::size_t j_max = std::min(h.size(), n1);
    for (std::size_t j = 0; j < j_max; ++j) {
      const double hj = h[j];
      // Valid n: n0 <= n < n1, n >= j, n - j < len(x).
      const std::size_t lo = std::max(n0, j);
      const std::size_t hi = std::min(n1, j + x.size());
      if (lo >= hi) continue;
      double* __restrict o = out.data();
      const double* __restrict xs = x.data() + (lo - j);
      for (std::size_t n = lo; n < hi; ++n) o[n] += hj * xs[n - lo];
    }
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double energy(std::span<const double> a) { return dot(a, a); }

}  // namespace kernels

Signal convolve_full(const Signal& a, const ImpulseResponse& b) {
  require_same_rate(a.sample_rate_hz(), b.sample_rate_hz());
  if (a.empty()) return Signal({}, a.sample_rate_hz());
  std::vector<double> out(a.size() + b.size() - 1);
  kernels::causal_filter(a.samples(), b.taps(), out);
  return Signal(std::move(out), a.sample_rate_hz());
}

Signal filter_same(const Signal& a, const ImpulseResponse& b) {
  require_same_rate(a.sample_rate_hz(), b.sample_rate_hz());
  std::vector<double> out(a.size());
  kernels::causal_filter(a.samples(), b.taps(), out);
  return Signal(std::move(out), a.sample_rate_hz());
}

std::vector<double> hann_window(std::size_t length, bool periodic) {
  std::vector<double> w(length, 1.0);
  if (length <= 1) return w;
  const double denom = static_cast<double>(periodic ? length : length - 1);
  for (std::size_t i = 0; i < length; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom);
  }
  return w;
}

ImpulseResponse design_bandpass(double low_hz, double high_hz, std::size_t num_taps,
                                std::uint32_t sample_rate_hz) {
  const double nyquist = sample_rate_hz / 2.0;
  if (!(low_hz > 0.0) || !(high_hz > low_hz) || !(high_hz < nyquist)) {
    throw InvalidArgument("bandpass edges must satisfy 0 < low < high < Nyquist (got " +
                          std::to_string(low_hz) + ", " + std::to_string(high_hz) + ")");
  }
  if (num_taps % 2 == 0) throw InvalidArgument("bandpass tap count must be odd");

  const double f_low = low_hz / sample_rate_hz;
  const double f_high = high_hz / sample_rate_hz;
  const std::size_t centre = num_taps / 2;
  const std::vector<double> window = hann_window(num_taps, false);
  std::vector<double> taps(num_taps);
  // Fill the left half and mirror it so the symmetry is exact.
  for (std::size_t i = 0; i <= centre; ++i) {
    const double m = static_cast<double>(i) - static_cast<double>(centre);
    const double ideal = sinc_lowpass(f_high, m) - sinc_lowpass(f_low, m);
    taps[i] = window[i] * ideal;
    taps[num_taps - 1 - i] = taps[i];
  }
  return ImpulseResponse(std::move(taps), sample_rate_hz);
}

Signal white_noise(Rng& rng, std::size_t num_samples, std::uint32_t sample_rate_hz) {
  if (num_samples == 0) throw InvalidArgument("white_noise needs at least one sample");
  std::vector<double> out(num_samples);
  for (double& v : out) v = rng.normal();
  return Signal(std::move(out), sample_rate_hz);
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::vector<double> fft_magnitude(std::span<const double> a, std::size_t nfft) {
  if (!is_power_of_two(nfft) || nfft < a.size()) {
    throw InvalidArgument("nfft must be a power of two no shorter than the input");
  }
  std::vector<double> padded(nfft, 0.0);
  std::copy(a.begin(), a.end(), padded.begin());
  const auto spectrum = fft::forward_real(padded);
  std::vector<double> mag(spectrum.size());
  for (std::size_t k = 0; k < spectrum.size(); ++k) mag[k] = std::abs(spectrum[k]);
  return mag;
}

std::vector<double> fft_magnitude(const Signal& a, std::size_t nfft) { return fft_magnitude(a.samples(), nfft); }

}  // namespace anc
