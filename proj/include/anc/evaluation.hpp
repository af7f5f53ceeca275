#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "anc/acoustic.hpp"
#include "anc/control_filters.hpp"
#include "anc/nn/cnn.hpp"
#include "anc/signal.hpp"

#include <json.hpp>

namespace anc {

enum class Algorithm { UnsupervisedGfanc, SupervisedGfanc, Fxlms, FixedFilter, NoControl };

/// Short ids used on the command line and in output file names:
/// unsup, sup, fxlms, fixed, none.
std::string algorithm_id(Algorithm algorithm);
Algorithm algorithm_from_id(const std::string& id);

struct SimulationResult {
  Algorithm algorithm = Algorithm::NoControl;
  Signal error;
  Signal disturbance;
  /// Weights applied in each frame (GFANC only; frame 0 is all zeros).
  std::vector<WeightVector> per_frame_weights;
  /// NMSE of each whole second; NaN where the disturbance is silent.
  std::vector<double> per_second_nmse_db;
  /// Set when an adaptive run diverged; error/disturbance then hold the
  /// samples processed before the failure.
  std::optional<std::size_t> diverged_at;
};

/// 10 log10(sum e^2 / sum d^2). Throws on unequal lengths or a silent
/// disturbance; returns -inf when e is identically zero.
double nmse_db(std::span<const double> error, std::span<const double> disturbance);
double nmse_db(const Signal& error, const Signal& disturbance);
/// As nmse_db but returns NaN instead of throwing on a silent disturbance.
double nmse_db_or_nan(std::span<const double> error, std::span<const double> disturbance);

/// Noise reduction in each whole second, reported as positive dB of
/// attenuation (the negated per-second NMSE). Throws if the result is
/// shorter than one second.
std::vector<double> per_second_nr(const SimulationResult& result);

/// Maps a raw frame to M soft weights.
using WeightGenerator = std::function<std::vector<double>(std::span<const double> frame)>;

WeightGenerator cnn_weight_generator(const nn::CnnModel& model);
/// Always returns `weights`, whatever the frame.
WeightGenerator constant_weight_generator(std::vector<double> weights);

struct GfancOptions {
  /// Frame length in samples; defaults to one second at the path rate.
  std::size_t frame_length = 0;
  /// Linear crossfade between consecutive frames' filters at each boundary.
  double crossfade_ms = 0.0;
};

/// Delayless GFANC: frame k is filtered with W_k, where W_0 = 0 and
/// W_k = combine(bank, generator(frame k-1)). The sample-rate controller
/// carries its reference history across frame boundaries. The physical
/// anti-noise reaches the microphone through the true secondary path, so
/// e(n) = d(n) - (W_k * (s * x))(n).
SimulationResult simulate_gfanc(const WeightGenerator& generator, const SubFilterBank& bank,
                                const AcousticPaths& paths, const Signal& noise, const GfancOptions& options = {},
                                Algorithm algorithm = Algorithm::UnsupervisedGfanc);
/// Same, driven by a CNN; checks the model against the bank first.
SimulationResult simulate_gfanc(const nn::CnnModel& model, const SubFilterBank& bank, const AcousticPaths& paths,
                                const Signal& noise, const GfancOptions& options = {},
                                Algorithm algorithm = Algorithm::UnsupervisedGfanc);

/// One fixed filter for the whole signal.
SimulationResult simulate_fixed(const ControlFilter& filter, const AcousticPaths& paths, const Signal& noise);

/// Sample-by-sample FxLMS from a zero filter. A divergence is recorded in
/// `diverged_at` and the processed prefix is kept.
SimulationResult simulate_fxlms(const AcousticPaths& paths, const Signal& noise, double step_size,
                                std::size_t num_taps = 1024);

SimulationResult simulate_no_control(const AcousticPaths& paths, const Signal& noise);

struct PsdEstimate {
  std::vector<double> freqs_hz;
  std::vector<double> power_db;
  std::size_t segment_len = 0;
  double overlap = 0.0;
  std::string window_id = "hann";
};

/// Welch estimate with a periodic Hann window, one-sided density scaling
/// |X|^2 / (fs * sum w^2) (interior bins doubled). Power is in dB, floored
/// at -300 dB.
PsdEstimate welch_psd(const Signal& x, std::size_t segment_len = 1024, double overlap = 0.5);

struct ComparisonArtifacts {
  std::optional<nn::CnnModel> unsupervised_model;
  std::optional<nn::CnnModel> supervised_model;
  std::optional<SubFilterBank> bank;
  std::optional<ControlFilter> broadband;
  double fxlms_step_size = 1e-4;
  std::size_t fxlms_taps = 1024;
  GfancOptions gfanc;
  std::size_t psd_segment_len = 1024;
  double psd_overlap = 0.5;
};

struct ComparisonRow {
  Algorithm algorithm = Algorithm::NoControl;
  SimulationResult result;
  double nmse_db = 0.0;
  std::vector<double> per_second_nr_db;
  PsdEstimate residual_psd;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  PsdEstimate disturbance_psd;
  std::uint32_t sample_rate_hz = 0;

  const ComparisonRow& row(Algorithm algorithm) const;
  nlohmann::json to_json() const;
  /// Writes report.json plus <algo>_error.csv, <algo>_per_second_nr.csv,
  /// <algo>_psd.csv and disturbance_psd.csv under `dir`. Returns the files
  /// written.
  std::vector<std::filesystem::path> write(const std::filesystem::path& dir) const;
};

/// Runs every algorithm on the same noise and paths. Throws MissingArtifact
/// naming the first artifact an algorithm needs but was not given.
ComparisonReport compare(std::span<const Algorithm> algorithms, const Signal& noise, const AcousticPaths& paths,
                         const ComparisonArtifacts& artifacts);

}  // namespace anc
