#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "anc/acoustic.hpp"
#include "anc/rng.hpp"

namespace anc {

/// N finite FIR coefficients of a control filter.
class ControlFilter {
 public:
  ControlFilter() = default;
  explicit ControlFilter(std::vector<double> taps);
  static ControlFilter zeros(std::size_t num_taps);

  std::span<const double> taps() const noexcept { return taps_; }
  const std::vector<double>& vector() const noexcept { return taps_; }
  std::size_t num_taps() const noexcept { return taps_.size(); }
  double operator[](std::size_t i) const { return taps_[i]; }

  ImpulseResponse as_impulse_response(std::uint32_t sample_rate_hz) const;

  friend bool operator==(const ControlFilter&, const ControlFilter&) = default;

 private:
  std::vector<double> taps_;
};

/// Soft combination weights, every component in [0, 1].
class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(std::vector<double> weights);
  static WeightVector zeros(std::size_t m) { return WeightVector(std::vector<double>(m, 0.0)); }
  static WeightVector ones(std::size_t m) { return WeightVector(std::vector<double>(m, 1.0)); }
  static WeightVector one_hot(std::size_t m, std::size_t index);
  /// Clamps each component into [0, 1] first; NaN is rejected.
  static WeightVector clamped(std::vector<double> weights);

  std::span<const double> values() const noexcept { return weights_; }
  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }

  friend bool operator==(const WeightVector&, const WeightVector&) = default;

 private:
  std::vector<double> weights_;
};

enum class BandSpacing { Linear, Logarithmic };

std::string to_string(BandSpacing spacing);
BandSpacing band_spacing_from_string(const std::string& name);

/// The M sub control filters. filters[i] keeps only the DFT bins of the
/// broadband filter whose frequency lies in [band_edges_hz[i],
/// band_edges_hz[i+1]) (the last band also owns Nyquist), so the filters have
/// disjoint spectral support and sum to the broadband filter.
struct SubFilterBank {
  std::vector<ControlFilter> filters;
  std::vector<double> band_edges_hz;
  std::uint32_t sample_rate_hz = 0;

  std::size_t num_bands() const noexcept { return filters.size(); }
  std::size_t num_taps() const noexcept { return filters.empty() ? 0 : filters.front().num_taps(); }
  /// Row-major [M, N] copy of all taps.
  std::vector<double> flattened() const;
};

struct PretrainOptions {
  std::size_t num_taps = 1024;
  /// Normalised by the filtered-reference power when `normalized` is true.
  double step_size = 0.005;
  bool normalized = true;
  double duration_s = 30.0;
  double noise_low_hz = 20.0;
  double noise_high_hz = 7800.0;
  std::size_t noise_filter_taps = 511;
  /// The final second of training must reach at least this attenuation.
  double required_nmse_db = -10.0;
};

struct PretrainResult {
  ControlFilter filter;
  double final_second_nmse_db = 0.0;
};

/// Adapts a broadband control filter with FxLMS on band-limited white noise
/// played through `paths`. Throws DivergenceError if a tap exceeds 1e6 and
/// NonConvergenceError if the final second misses required_nmse_db.
PretrainResult pretrain_broadband(const AcousticPaths& paths, Rng& rng, const PretrainOptions& options = {});

/// Splits `broadband` into `num_bands` sub filters by partitioning its
/// length-N DFT bins. Requires num_bands >= 2 and N >= 2 * num_bands.
SubFilterBank decompose(const ControlFilter& broadband, std::size_t num_bands, std::uint32_t sample_rate_hz,
                        BandSpacing spacing = BandSpacing::Linear);

/// W[n] = sum_i g[i] * filters[i][n]. Takes raw weights so callers can use
/// values outside [0, 1] (e.g. in linearity checks).
ControlFilter combine(const SubFilterBank& bank, std::span<const double> g);
ControlFilter combine(const SubFilterBank& bank, const WeightVector& g);

inline constexpr std::uint32_t kBankFormatVersion = 1;

/// "ANCB" file: magic, u32 version, u32 M, u32 N, u32 sample_rate, M+1
/// float64 band edges, then M*N float64 taps (filter-major).
void save_bank(const std::filesystem::path& path, const SubFilterBank& bank);
SubFilterBank load_bank(const std::filesystem::path& path);

}  // namespace anc
