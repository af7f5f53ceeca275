#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "anc/acoustic.hpp"
#include "anc/control_filters.hpp"
#include "anc/signal.hpp"

namespace anc {

/// Fixed-length delay line with newest-first indexing: view()[0] is the most
/// recent sample, view()[k] the sample pushed k steps earlier. Backed by a
/// doubled ring buffer so the view is always one contiguous span.
class HistoryBuffer {
 public:
  explicit HistoryBuffer(std::size_t length = 0);

  void push(double value);
  std::span<const double> view() const noexcept { return {buffer_.data() + head_, length_}; }
  std::size_t size() const noexcept { return length_; }

 private:
  std::size_t length_;
  std::size_t head_ = 0;
  std::vector<double> buffer_;
};

/// Single-channel FxLMS controller state.
///
/// The anti-noise y(n) = w . x_hist is played through the *true* secondary
/// path, e(n) = d(n) - (s * y)(n); the update uses the reference filtered by
/// the estimate, w += mu_eff * e(n) * x'_hist. When `normalized` is set
/// mu_eff = mu / (|x'_hist|^2 + eps), otherwise mu_eff = mu.
struct FxlmsState {
  std::vector<double> weights;
  double step_size = 0.0;
  bool normalized = false;
  double normalization_floor = 1e-12;
  HistoryBuffer reference_history;     // length max(N, len(s_hat))
  HistoryBuffer filtered_ref_history;  // length N
  HistoryBuffer anti_noise_history;    // length len(s)
  ImpulseResponse secondary_true;
  std::size_t samples_processed = 0;

  std::size_t num_taps() const noexcept { return weights.size(); }
};

/// Zero-initialised controller.
FxlmsState make_fxlms_state(std::size_t num_taps, double step_size, const ImpulseResponse& secondary_true,
                            std::size_t estimate_length, bool normalized = false);

/// One sample of FxLMS; returns e(n). Throws DivergenceError (carrying the
/// sample index) if any coefficient becomes non-finite or exceeds 1e6.
double fxlms_step(FxlmsState& state, double x_n, double d_n, const ImpulseResponse& s_hat);

/// Runs fxlms_step over whole signals; returns the error signal.
Signal run_fxlms(FxlmsState& state, const Signal& reference, const Signal& disturbance, const ImpulseResponse& s_hat);

struct LabelOptions {
  double step_size = 1e-4;
  std::size_t passes = 10;
  /// Step is divided by |u(n)|^2 + floor.
  bool normalized = true;
  double normalization_floor = 1e-12;
};

struct LabelResult {
  WeightVector weights;
  double residual_nmse_db = 0.0;
  double zero_weight_nmse_db = 0.0;
  /// True when the clamped LMS solution was worse than no control and the
  /// label fell back to the zero vector.
  bool fell_back_to_zero = false;
};

/// LMS adaptation of the M soft weights on one frame. u_i(n) is x' filtered
/// by sub filter i, the error is e(n) = d(n) - g . u(n), and
/// g += step * e(n) * u(n) is applied for `passes` sweeps over the frame,
/// starting from g = 0. The final g is clamped to [0, 1]; if that leaves the
/// residual worse than g = 0, the zero vector is returned instead.
LabelResult label_frame(const Signal& frame, const SubFilterBank& bank, const AcousticPaths& paths,
                        const LabelOptions& options = {});

struct LabelledExample {
  Signal frame;
  WeightVector soft_weights;
};

struct LabelledDataset {
  std::vector<LabelledExample> examples;
  /// Residual NMSE of each label on its own frame, for auditing.
  std::vector<double> residual_nmse_db;
};

/// label_frame over every frame, fanned out across workers. Output order
/// follows input order. A divergence is rethrown with the frame index.
LabelledDataset build_labelled_dataset(std::span<const Signal> frames, const SubFilterBank& bank,
                                       const AcousticPaths& paths, const LabelOptions& options = {});

inline constexpr std::uint32_t kLabelledFormatVersion = 1;

/// "ANCL" file: magic, u32 version, u32 count, u32 M, u32 frame_len, then
/// per record frame_len float64 samples followed by M float64 weights. The
/// sample rate is not part of the record and is supplied on load.
void save_labelled_dataset(const std::filesystem::path& path, std::span<const LabelledExample> examples);
std::vector<LabelledExample> load_labelled_dataset(const std::filesystem::path& path, std::uint32_t sample_rate_hz);

}  // namespace anc
