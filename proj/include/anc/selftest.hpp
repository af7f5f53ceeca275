#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace anc::selftest {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// y(b,n) = sum_j w(b,j) x(b,n-j) by direct summation; the oracle for the
/// unfold pipeline.
std::vector<double> naive_anti_noise(std::span<const double> w, std::span<const double> x, std::size_t batch,
                                     std::size_t taps, std::size_t length);

struct UnfoldOracleOptions {
  std::size_t instances = 100;
  std::size_t max_batch = 8;
  std::size_t max_taps = 128;
  std::size_t max_frame = 512;
  double tolerance = 1e-10;
  std::uint64_t seed = 101;
};
/// Unfolded and streaming anti-noise against the naive oracle on random
/// shapes.
CheckResult check_unfold_oracle(const UnfoldOracleOptions& options = {});

struct GradientCheckOptions {
  std::size_t num_bands = 4;
  std::size_t num_taps = 64;
  std::size_t frame_length = 256;
  std::size_t batch = 2;
  double epsilon = 1e-6;
  double tolerance = 1e-5;
  std::uint64_t seed = 202;
};
/// Backprop through CNN -> combine -> loss against central differences for
/// every CNN parameter.
CheckResult check_end_to_end_gradient(const GradientCheckOptions& options = {});

/// Sub filters sum back to the broadband filter and are mutually orthogonal.
CheckResult check_reconstruction(std::span<const std::size_t> band_counts, std::size_t num_taps = 1024,
                                 double tolerance = 1e-9, std::uint64_t seed = 303);

/// GFANC frame 0 error is the disturbance, bit for bit.
CheckResult check_first_frame(std::uint64_t seed = 404);

/// e = d, e = d/2 and common scaling.
CheckResult check_nmse_formula();

/// Zero step leaves the error equal to the disturbance.
CheckResult check_fxlms_zero_step(std::uint64_t seed = 505);

/// Constant weights through the frame machinery match one fixed filter.
CheckResult check_constant_weights(std::uint64_t seed = 606);

/// The fast suite behind `anc_lab selftest`.
std::vector<CheckResult> run_fast_suite();

}  // namespace anc::selftest
