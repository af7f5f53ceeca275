#include "anc/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "anc/error.hpp"
#include "anc/io.hpp"
#include "anc/parallel.hpp"

namespace anc {

namespace {

constexpr double kDivergenceLimit = 1e6;

double nmse_or_nan(std::span<const double> e, std::span<const double> d) {
  const double de = kernels::energy(d);
  if (de <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return 10.0 * std::log10(kernels::energy(e) / de);
}

}  // namespace

HistoryBuffer::HistoryBuffer(std::size_t length) : length_(length), buffer_(2 * length, 0.0) {}

void HistoryBuffer::push(double value) {
  if (length_ == 0) return;
  head_ = (head_ == 0 ? length_ : head_) - 1;
  buffer_[head_] = value;
  buffer_[head_ + length_] = value;
}

FxlmsState make_fxlms_state(std::size_t num_taps, double step_size, const ImpulseResponse& secondary_true,
                            std::size_t estimate_length, bool normalized) {
  if (num_taps == 0) throw InvalidArgument("FxLMS needs at least one tap");
  if (!(step_size >= 0.0) || !std::isfinite(step_size)) throw InvalidArgument("FxLMS step size must be >= 0");
  FxlmsState state;
  state.weights.assign(num_taps, 0.0);
  state.step_size = step_size;
  state.normalized = normalized;
  state.reference_history = HistoryBuffer(std::max(num_taps, estimate_length));
  state.filtered_ref_history = HistoryBuffer(num_taps);
  state.anti_noise_history = HistoryBuffer(secondary_true.size());
  state.secondary_true = secondary_true;
  return state;
}

double fxlms_step(FxlmsState& state, double x_n, double d_n, const ImpulseResponse& s_hat) {
  const std::size_t n_taps = state.num_taps();
  if (state.reference_history.size() < s_hat.size()) {
    throw InvalidArgument("secondary-path estimate is longer than the controller's reference history");
  }
  state.reference_history.push(x_n);
  const auto x_hist = state.reference_history.view();

  const double y = kernels::dot(state.weights, x_hist.first(n_taps));
  state.anti_noise_history.push(y);
  const double e = d_n - kernels::dot(state.secondary_true.taps(), state.anti_noise_history.view());

  state.filtered_ref_history.push(kernels::dot(s_hat.taps(), x_hist.first(s_hat.size())));
  const auto xf_hist = state.filtered_ref_history.view();

  double mu = state.step_size;
  if (state.normalized) mu /= kernels::energy(xf_hist) + state.normalization_floor;
  const double scale = mu * e;
  double peak = 0.0;
  double* w = state.weights.data();
  for (std::size_t j = 0; j < n_taps; ++j) {
    w[j] += scale * xf_hist[j];
    peak = std::max(peak, std::abs(w[j]));
  }
  const std::size_t index = state.samples_processed++;
  if (!std::isfinite(e) || !(peak <= kDivergenceLimit)) throw DivergenceError("FxLMS diverged", index);
  return e;
}

Signal run_fxlms(FxlmsState& state, const Signal& reference, const Signal& disturbance, const ImpulseResponse& s_hat) {
  if (reference.size() != disturbance.size()) throw InvalidArgument("reference and disturbance lengths differ");
  if (reference.sample_rate_hz() != disturbance.sample_rate_hz() ||
      reference.sample_rate_hz() != s_hat.sample_rate_hz()) {
    throw InvalidArgument("sample-rate mismatch between FxLMS inputs");
  }
  std::vector<double> error(reference.size());
  for (std::size_t n = 0; n < reference.size(); ++n) error[n] = fxlms_step(state, reference[n], disturbance[n], s_hat);
  return Signal(std::move(error), reference.sample_rate_hz());
}

LabelResult label_frame(const Signal& frame, const SubFilterBank& bank, const AcousticPaths& paths,
                        const LabelOptions& options) {
  if (!(options.step_size >= 0.0)) throw InvalidArgument("labelling step size must be non-negative");
  if (options.passes < 1) throw InvalidArgument("labelling needs at least one pass");
  if (bank.sample_rate_hz != frame.sample_rate_hz()) throw InvalidArgument("bank and frame sample rates differ");

  const auto [disturbance, filtered] = propagate(frame, paths);
  const std::size_t m = bank.num_bands();
  const std::size_t len = frame.size();
  const auto d = disturbance.samples();

  // u stored sample-major: u[n * m + i] is sub filter i's output at n.
  std::vector<double> u(len * m);
  std::vector<double> column(len);
  for (std::size_t i = 0; i < m; ++i) {
    kernels::causal_filter(filtered.samples(), bank.filters[i].taps(), column);
    for (std::size_t n = 0; n < len; ++n) u[n * m + i] = column[n];
  }
  std::vector<double> u_power(len);
  for (std::size_t n = 0; n < len; ++n) u_power[n] = kernels::energy({u.data() + n * m, m});

  std::vector<double> g(m, 0.0);
  for (std::size_t pass = 0; pass < options.passes; ++pass) {
    for (std::size_t n = 0; n < len; ++n) {
      const double* un = u.data() + n * m;
      double y = 0.0;
      for (std::size_t i = 0; i < m; ++i) y += g[i] * un[i];
      const double e = d[n] - y;
      double step = options.step_size;
      if (options.normalized) step /= u_power[n] + options.normalization_floor;
      for (std::size_t i = 0; i < m; ++i) g[i] += step * e * un[i];
    }
    for (double gi : g) {
      if (!std::isfinite(gi) || std::abs(gi) > kDivergenceLimit) {
        throw DivergenceError("soft-weight LMS diverged", (pass + 1) * len - 1);
      }
    }
  }

  LabelResult result;
  result.weights = WeightVector::clamped(g);
  std::vector<double> e(len);
  for (std::size_t n = 0; n < len; ++n) {
    double y = 0.0;
    for (std::size_t i = 0; i < m; ++i) y += result.weights[i] * u[n * m + i];
    e[n] = d[n] - y;
  }
  result.residual_nmse_db = nmse_or_nan(e, d);
  result.zero_weight_nmse_db = nmse_or_nan(d, d);
  if (result.residual_nmse_db > result.zero_weight_nmse_db) {
    result.weights = WeightVector::zeros(m);
    result.residual_nmse_db = result.zero_weight_nmse_db;
    result.fell_back_to_zero = true;
  }
  return result;
}

LabelledDataset build_labelled_dataset(std::span<const Signal> frames, const SubFilterBank& bank,
                                       const AcousticPaths& paths, const LabelOptions& options) {
  std::vector<LabelResult> results(frames.size());
  parallel_for(frames.size(), [&](std::size_t k) {
    try {
      results[k] = label_frame(frames[k], bank, paths, options);
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string("labelling frame ") + std::to_string(k) + ": " + e.what(), k);
    }
  });
  LabelledDataset out;
  out.examples.reserve(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    out.examples.push_back(LabelledExample{frames[k], results[k].weights});
    out.residual_nmse_db.push_back(results[k].residual_nmse_db);
  }
  return out;
}

void save_labelled_dataset(const std::filesystem::path& path, std::span<const LabelledExample> examples) {
  const std::size_t m = examples.empty() ? 0 : examples.front().soft_weights.size();
  const std::size_t frame_len = examples.empty() ? 0 : examples.front().frame.size();
  io::BinaryWriter w;
  w.magic("ANCL");
  w.u32(kLabelledFormatVersion);
  w.u32(static_cast<std::uint32_t>(examples.size()));
  w.u32(static_cast<std::uint32_t>(m));
  w.u32(static_cast<std::uint32_t>(frame_len));
  for (const auto& ex : examples) {
    if (ex.frame.size() != frame_len || ex.soft_weights.size() != m) {
      throw InvalidArgument("labelled examples must share frame length and weight dimension");
    }
    w.f64s(ex.frame.samples());
    w.f64s(ex.soft_weights.values());
  }
  w.write_file(path);
}

std::vector<LabelledExample> load_labelled_dataset(const std::filesystem::path& path, std::uint32_t sample_rate_hz) {
  auto r = io::BinaryReader::from_file(path);
  r.expect_magic("ANCL");
  if (const auto version = r.u32(); version != kLabelledFormatVersion) {
    throw FormatError(path.string() + ": unsupported labelled-dataset version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  const std::uint32_t m = r.u32();
  const std::uint32_t frame_len = r.u32();
  std::vector<LabelledExample> out;
  out.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    try {
      Signal frame(r.f64s(frame_len), sample_rate_hz);
      WeightVector weights(r.f64s(m));
      out.push_back(LabelledExample{std::move(frame), std::move(weights)});
    } catch (const InvalidArgument& e) {
      throw FormatError(path.string() + ": record " + std::to_string(k) + ": " + e.what());
    }
  }
  r.expect_end();
  return out;
}

}  // namespace anc
