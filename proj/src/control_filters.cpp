#include "anc/control_filters.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "anc/adaptive.hpp"
#include "anc/error.hpp"
#include "anc/fft.hpp"
#include "anc/io.hpp"

namespace anc {

ControlFilter::ControlFilter(std::vector<double> taps) : taps_(std::move(taps)) {
  if (taps_.empty()) throw InvalidArgument("control filter needs at least one tap");
  for (double t : taps_) {
    if (!std::isfinite(t)) throw InvalidArgument("control filter tap is not finite");
  }
}

ControlFilter ControlFilter::zeros(std::size_t num_taps) { return ControlFilter(std::vector<double>(num_taps, 0.0)); }

ImpulseResponse ControlFilter::as_impulse_response(std::uint32_t sample_rate_hz) const {
  return ImpulseResponse(taps_, sample_rate_hz);
}

WeightVector::WeightVector(std::vector<double> weights) : weights_(std::move(weights)) {
  for (double w : weights_) {
    if (!(w >= 0.0 && w <= 1.0)) throw InvalidArgument("soft weights must lie in [0, 1]");
  }
}

WeightVector WeightVector::one_hot(std::size_t m, std::size_t index) {
  if (index >= m) throw InvalidArgument("one-hot index out of range");
  std::vector<double> w(m, 0.0);
  w[index] = 1.0;
  return WeightVector(std::move(w));
}

WeightVector WeightVector::clamped(std::vector<double> weights) {
  for (double& w : weights) {
    if (std::isnan(w)) throw InvalidArgument("soft weight is NaN");
    w = std::clamp(w, 0.0, 1.0);
  }
  return WeightVector(std::move(weights));
}

std::string to_string(BandSpacing spacing) { return spacing == BandSpacing::Linear ? "linear" : "log"; }

BandSpacing band_spacing_from_string(const std::string& name) {
  if (name == "linear") return BandSpacing::Linear;
  if (name == "log" || name == "logarithmic") return BandSpacing::Logarithmic;
  throw InvalidArgument("unknown band spacing '" + name + "' (expected linear or log)");
}

std::vector<double> SubFilterBank::flattened() const {
  std::vector<double> out;
  out.reserve(num_bands() * num_taps());
  for (const auto& f : filters) out.insert(out.end(), f.taps().begin(), f.taps().end());
  return out;
}

PretrainResult pretrain_broadband(const AcousticPaths& paths, Rng& rng, const PretrainOptions& options) {
  if (!(options.step_size >= 0.0)) throw InvalidArgument("pretraining step size must be non-negative");
  if (!(options.duration_s >= 1.0)) throw InvalidArgument("pretraining needs at least one second of noise");
  const std::uint32_t rate = paths.sample_rate_hz();
  const auto num_samples = static_cast<std::size_t>(std::llround(options.duration_s * rate));

  const auto shaping = design_bandpass(options.noise_low_hz, options.noise_high_hz, options.noise_filter_taps, rate);
  const Signal reference = filter_same(white_noise(rng, num_samples, rate), shaping);
  const Signal disturbance = filter_same(reference, paths.primary);

  auto state = make_fxlms_state(options.num_taps, options.step_size, paths.secondary_true,
                                paths.secondary_estimate.size(), options.normalized);
  const Signal error = run_fxlms(state, reference, disturbance, paths.secondary_estimate);

  const std::size_t tail = std::min<std::size_t>(rate, num_samples);
  const auto e_tail = error.samples().last(tail);
  const auto d_tail = disturbance.samples().last(tail);
  const double d_energy = kernels::energy(d_tail);
  if (d_energy <= 0.0) throw InvalidArgument("pretraining disturbance has zero energy");
  const double nmse = 10.0 * std::log10(kernels::energy(e_tail) / d_energy);
  if (!(nmse <= options.required_nmse_db)) {
    throw NonConvergenceError("broadband pretraining reached only " + std::to_string(nmse) +
                                  " dB over the final second (required " + std::to_string(options.required_nmse_db) +
                                  " dB)",
                              nmse);
  }
  return PretrainResult{ControlFilter(state.weights), nmse};
}

namespace {

std::vector<double> band_edges(std::size_t num_bands, std::uint32_t rate, std::size_t num_taps, BandSpacing spacing) {
  const double nyquist = rate / 2.0;
  std::vector<double> edges(num_bands + 1);
  edges.front() = 0.0;
  edges.back() = nyquist;
  if (spacing == BandSpacing::Linear) {
    for (std::size_t i = 1; i < num_bands; ++i) edges[i] = nyquist * static_cast<double>(i) / num_bands;
  } else {
    // Geometric from a low corner (100 Hz, or two bins if that is wider) up to Nyquist.
    const double low = std::max(100.0, 2.0 * rate / static_cast<double>(num_taps));
    for (std::size_t i = 1; i < num_bands; ++i) {
      edges[i] = low * std::pow(nyquist / low, static_cast<double>(i - 1) / static_cast<double>(num_bands - 1));
    }
  }
  return edges;
}

}  // namespace

SubFilterBank decompose(const ControlFilter& broadband, std::size_t num_bands, std::uint32_t sample_rate_hz,
                        BandSpacing spacing) {
  const std::size_t n = broadband.num_taps();
  if (num_bands < 2) throw InvalidArgument("decomposition needs at least two bands");
  if (n < 2 * num_bands) throw InvalidArgument("filter length must be at least twice the band count");
  if (sample_rate_hz == 0) throw InvalidArgument("sample rate must be positive");

  const auto edges = band_edges(num_bands, sample_rate_hz, n, spacing);
  const auto spectrum = fft::forward_real(broadband.taps());
  const std::size_t bins = spectrum.size();

  std::vector<std::size_t> owner(bins);
  std::vector<std::size_t> bins_per_band(num_bands, 0);
  for (std::size_t k = 0; k < bins; ++k) {
    const double freq = static_cast<double>(k) * sample_rate_hz / static_cast<double>(n);
    std::size_t band = num_bands - 1;
    for (std::size_t i = 0; i + 1 < num_bands; ++i) {
      if (freq < edges[i + 1]) {
        band = i;
        break;
      }
    }
    owner[k] = band;
    ++bins_per_band[band];
  }
  for (std::size_t i = 0; i < num_bands; ++i) {
    if (bins_per_band[i] == 0) {
      throw InvalidArgument("band " + std::to_string(i) + " contains no DFT bins; use fewer bands or more taps");
    }
  }

  SubFilterBank bank;
  bank.band_edges_hz = edges;
  bank.sample_rate_hz = sample_rate_hz;
  bank.filters.reserve(num_bands);
  std::vector<std::complex<double>> masked(bins);
  for (std::size_t i = 0; i < num_bands; ++i) {
    for (std::size_t k = 0; k < bins; ++k) masked[k] = owner[k] == i ? spectrum[k] : std::complex<double>{};
    bank.filters.emplace_back(fft::inverse_real(masked, n));
  }
  return bank;
}

ControlFilter combine(const SubFilterBank& bank, std::span<const double> g) {
  if (g.size() != bank.num_bands()) {
    throw InvalidArgument("weight vector has " + std::to_string(g.size()) + " entries, bank has " +
                          std::to_string(bank.num_bands()) + " filters");
  }
  std::vector<double> taps(bank.num_taps(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double gi = g[i];
    const auto sub = bank.filters[i].taps();
    for (std::size_t n = 0; n < taps.size(); ++n) taps[n] += gi * sub[n];
  }
  return ControlFilter(std::move(taps));
}

ControlFilter combine(const SubFilterBank& bank, const WeightVector& g) { return combine(bank, g.values()); }

void save_bank(const std::filesystem::path& path, const SubFilterBank& bank) {
  io::BinaryWriter w;
  w.magic("ANCB");
  w.u32(kBankFormatVersion);
  w.u32(static_cast<std::uint32_t>(bank.num_bands()));
  w.u32(static_cast<std::uint32_t>(bank.num_taps()));
  w.u32(bank.sample_rate_hz);
  w.f64s(bank.band_edges_hz);
  for (const auto& f : bank.filters) w.f64s(f.taps());
  w.write_file(path);
}

SubFilterBank load_bank(const std::filesystem::path& path) {
  auto r = io::BinaryReader::from_file(path);
  r.expect_magic("ANCB");
  if (const auto version = r.u32(); version != kBankFormatVersion) {
    throw FormatError(path.string() + ": unsupported bank version " + std::to_string(version));
  }
  const std::uint32_t m = r.u32();
  const std::uint32_t n = r.u32();
  SubFilterBank bank;
  bank.sample_rate_hz = r.u32();
  if (m < 1 || n < 1 || bank.sample_rate_hz == 0) throw FormatError(path.string() + ": invalid bank header");
  bank.band_edges_hz = r.f64s(m + 1);
  for (std::uint32_t i = 0; i < m; ++i) {
    try {
      bank.filters.emplace_back(r.f64s(n));
    } catch (const InvalidArgument& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }
  r.expect_end();
  for (std::size_t i = 0; i < m; ++i) {
    if (!(bank.band_edges_hz[i] < bank.band_edges_hz[i + 1])) {
      throw FormatError(path.string() + ": band edges are not ascending");
    }
  }
  return bank;
}

}  // namespace anc
