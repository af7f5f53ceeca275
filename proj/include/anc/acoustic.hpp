#pragma once

#include <filesystem>
#include <optional>

#include "anc/rng.hpp"
#include "anc/signal.hpp"

namespace anc {

/// Primary path p, true secondary path s and the controller's estimate of s.
/// All three share one sample rate.
struct AcousticPaths {
  ImpulseResponse primary;
  ImpulseResponse secondary_true;
  ImpulseResponse secondary_estimate;

  std::uint32_t sample_rate_hz() const noexcept { return primary.sample_rate_hz(); }
};

/// Validates rates; the estimate defaults to a copy of the true secondary path.
AcousticPaths make_paths(ImpulseResponse primary, ImpulseResponse secondary,
                         std::optional<ImpulseResponse> secondary_estimate = std::nullopt);

struct SyntheticPathOptions {
  double low_hz = 20.0;
  double high_hz = 7900.0;
  std::size_t primary_taps = 256;
  std::size_t primary_delay = 16;
  std::size_t secondary_taps = 128;
  std::size_t secondary_delay = 8;
  /// Relative amplitude of the Gaussian perturbation applied to the secondary
  /// estimate; 0 keeps the estimate exact.
  double estimate_mismatch = 0.0;
};

/// Bandpass primary and secondary paths used for training.
///
/// Each path is a Hann-windowed sinc bandpass preceded by a pure delay. The
/// windowed-sinc design needs an odd length, so a path declared with an even
/// tap count gets an (n-1)-tap design followed by one trailing zero; the
/// nominal length is preserved. `rng` is only drawn from when
/// `estimate_mismatch` is non-zero.
AcousticPaths synth_training_paths(Rng& rng, std::uint32_t sample_rate_hz, const SyntheticPathOptions& options = {});

/// Returns a copy of `paths` whose estimate is s + rel_amp * rms(s) * N(0,1)
/// per tap.
AcousticPaths perturb_estimate(const AcousticPaths& paths, Rng& rng, double rel_amp);

struct Propagated {
  Signal disturbance;
  Signal filtered_reference;
};

/// d = x filtered by p and x' = x filtered by s_hat, both with zero initial
/// state and the same length as x.
Propagated propagate(const Signal& x, const AcousticPaths& paths);

AcousticPaths load_paths(const std::filesystem::path& primary_file, const std::filesystem::path& secondary_file,
                         const std::optional<std::filesystem::path>& estimate_file = std::nullopt);
void save_paths(const AcousticPaths& paths, const std::filesystem::path& primary_file,
                const std::filesystem::path& secondary_file, const std::filesystem::path& estimate_file);

}  // namespace anc
