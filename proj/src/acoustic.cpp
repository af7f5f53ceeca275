#include "anc/acoustic.hpp"

#include <cmath>

#include "anc/error.hpp"
#include "anc/io.hpp"

namespace anc {

namespace {

ImpulseResponse delayed_bandpass(double low_hz, double high_hz, std::size_t taps, std::size_t delay,
                                 std::uint32_t rate) {
  if (taps < 3) throw InvalidArgument("synthetic path needs at least three taps");
  const std::size_t design_taps = taps % 2 == 1 ? taps : taps - 1;
  const auto bp = design_bandpass(low_hz, high_hz, design_taps, rate);
  std::vector<double> out(delay + taps, 0.0);
  std::copy(bp.taps().begin(), bp.taps().end(), out.begin() + static_cast<std::ptrdiff_t>(delay));
  return ImpulseResponse(std::move(out), rate);
}

}  // namespace

AcousticPaths make_paths(ImpulseResponse primary, ImpulseResponse secondary,
                         std::optional<ImpulseResponse> secondary_estimate) {
  ImpulseResponse estimate = secondary_estimate ? std::move(*secondary_estimate) : secondary;
  if (primary.sample_rate_hz() != secondary.sample_rate_hz() ||
      primary.sample_rate_hz() != estimate.sample_rate_hz()) {
    throw InvalidArgument("acoustic paths must share one sample rate");
  }
  return AcousticPaths{std::move(primary), std::move(secondary), std::move(estimate)};
}

AcousticPaths synth_training_paths(Rng& rng, std::uint32_t sample_rate_hz, const SyntheticPathOptions& options) {
  if (sample_rate_hz < 8000) throw InvalidArgument("synthetic paths need a sample rate of at least 8 kHz");
  auto primary = delayed_bandpass(options.low_hz, options.high_hz, options.primary_taps, options.primary_delay,
                                  sample_rate_hz);
  auto secondary = delayed_bandpass(options.low_hz, options.high_hz, options.secondary_taps,
                                    options.secondary_delay, sample_rate_hz);
  auto paths = make_paths(std::move(primary), std::move(secondary));
  if (options.estimate_mismatch != 0.0) return perturb_estimate(paths, rng, options.estimate_mismatch);
  return paths;
}

AcousticPaths perturb_estimate(const AcousticPaths& paths, Rng& rng, double rel_amp) {
  if (!(rel_amp >= 0.0) || !std::isfinite(rel_amp)) throw InvalidArgument("path mismatch must be >= 0");
  const auto& s = paths.secondary_true;
  const double rms = std::sqrt(kernels::energy(s.taps()) / static_cast<double>(s.size()));
  std::vector<double> taps = s.vector();
  for (double& t : taps) t += rel_amp * rms * rng.normal();
  return AcousticPaths{paths.primary, paths.secondary_true, ImpulseResponse(std::move(taps), s.sample_rate_hz())};
}

Propagated propagate(const Signal& x, const AcousticPaths& paths) {
  return Propagated{filter_same(x, paths.primary), filter_same(x, paths.secondary_estimate)};
}

AcousticPaths load_paths(const std::filesystem::path& primary_file, const std::filesystem::path& secondary_file,
                         const std::optional<std::filesystem::path>& estimate_file) {
  auto primary = io::load_impulse_response(primary_file);
  auto secondary = io::load_impulse_response(secondary_file);
  std::optional<ImpulseResponse> estimate;
  if (estimate_file) estimate = io::load_impulse_response(*estimate_file);
  return make_paths(std::move(primary), std::move(secondary), std::move(estimate));
}

void save_paths(const AcousticPaths& paths, const std::filesystem::path& primary_file,
                const std::filesystem::path& secondary_file, const std::filesystem::path& estimate_file) {
  io::save_impulse_response(primary_file, paths.primary);
  io::save_impulse_response(secondary_file, paths.secondary_true);
  io::save_impulse_response(estimate_file, paths.secondary_estimate);
}

}  // namespace anc
