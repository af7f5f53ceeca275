#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "anc/acoustic.hpp"
#include "anc/adaptive.hpp"
#include "anc/anc_loss.hpp"
#include "anc/control_filters.hpp"
#include "anc/nn/cnn.hpp"
#include "anc/nn/optimizer.hpp"

#include <json.hpp>

namespace anc {

/// Synthetic band-limited noise corpus. Each instance is white noise through
/// a bandpass whose centre is log-uniform in [center_min_hz, center_max_hz]
/// and whose bandwidth is uniform in [bandwidth_min_hz, bandwidth_max_hz].
/// Band edges are clamped to [edge_floor_hz, Nyquist - edge_margin_hz].
struct DatasetSpec {
  std::size_t num_instances = 2200;
  double frame_seconds = 1.0;
  std::uint32_t sample_rate_hz = 16000;
  double center_min_hz = 100.0;
  double center_max_hz = 6000.0;
  double bandwidth_min_hz = 100.0;
  double bandwidth_max_hz = 2000.0;
  std::size_t filter_taps = 511;
  double edge_floor_hz = 20.0;
  double edge_margin_hz = 100.0;
  std::uint64_t seed = 1;

  std::size_t frame_length() const;
  /// Throws InvalidArgument on an unusable spec.
  void validate() const;
  nlohmann::json to_json() const;
  static DatasetSpec from_json(const nlohmann::json& j);
};

struct NoiseBand {
  double center_hz = 0.0;
  double bandwidth_hz = 0.0;
  double low_hz = 0.0;   // after clamping
  double high_hz = 0.0;  // after clamping
};

/// Band edges for a centre/bandwidth pair, clamped per `spec`. Throws if the
/// clamped band is empty.
NoiseBand clamp_band(const DatasetSpec& spec, double center_hz, double bandwidth_hz);

/// One frame of band-limited noise, peak-normalised to max |x| = 1.
Signal generate_instance(const DatasetSpec& spec, const NoiseBand& band, Rng& rng);

/// Draws a band for one instance from the DatasetSpec ranges.
NoiseBand draw_band(const DatasetSpec& spec, Rng& rng);

struct GeneratedDataset {
  std::vector<Signal> frames;
  std::vector<NoiseBand> bands;
};

/// Instance i uses only Rng(seed).fork(i), so generation is parallel and the
/// result does not depend on the worker count.
GeneratedDataset generate_dataset(const DatasetSpec& spec);

/// `seconds` consecutive frames, each with a freshly drawn band.
Signal generate_nonstationary_noise(const DatasetSpec& spec, std::size_t seconds, std::uint64_t seed,
                                    std::vector<NoiseBand>* bands = nullptr);

/// Frames without labels. Deliberately has no way to be built from labelled
/// examples, so the unsupervised trainer cannot see soft-weight targets.
class UnlabelledDataset {
 public:
  UnlabelledDataset() = default;
  explicit UnlabelledDataset(std::vector<Signal> frames) : frames_(std::move(frames)) {}

  std::span<const Signal> frames() const noexcept { return frames_; }
  std::size_t size() const noexcept { return frames_.size(); }

 private:
  std::vector<Signal> frames_;
};

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded shuffle of 0..n-1; the first `validation_count` shuffled indices
/// form the validation set. Both lists are returned in ascending order.
DatasetSplit split_indices(std::size_t n, std::size_t validation_count, std::uint64_t seed);

/// Dataset directory: instance_NNNNN.ancs per frame plus manifest.json with
/// the DatasetSpec, per-instance band and seed, and SHA-256 checksums.
void save_dataset_dir(const std::filesystem::path& dir, const DatasetSpec& spec, const GeneratedDataset& data);
struct LoadedDataset {
  DatasetSpec spec;
  std::vector<Signal> frames;
};
LoadedDataset load_dataset_dir(const std::filesystem::path& dir);

enum class TrainMode { Unsupervised, Supervised };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& name);

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  double learning_rate = 1e-3;
  LossReduction loss_reduction = LossReduction::Mean;
  std::uint64_t seed = 7;
  TrainMode mode = TrainMode::Unsupervised;
  AntiNoiseOptions anti_noise;
  /// Final-epoch loss above this fraction of the first epoch's loss marks
  /// the report with a warning.
  double loss_ratio_warning = 0.5;
  /// Called after every epoch with the 1-based epoch index.
  std::function<void(std::size_t epoch, const nn::CnnModel& model)> on_epoch_end;
  std::function<void(const std::string& line)> log;

  void validate() const;
};

struct TrainingReport {
  TrainMode mode = TrainMode::Unsupervised;
  std::vector<double> epoch_loss;
  std::vector<double> validation_nmse_db;
  std::size_t steps = 0;
  std::string status = "ok";
  std::string message;

  nlohmann::json to_json() const;
};

/// Frames with their propagated signals (frame-local zero initial state).
struct PropagatedFrame {
  std::span<const double> frame;
  std::vector<double> disturbance;
  std::vector<double> filtered_reference;
};

std::vector<PropagatedFrame> propagate_frames(std::span<const Signal> frames, const AcousticPaths& paths);

/// Pooled NMSE of GFANC with filters generated from each frame itself:
/// 10 log10(sum e^2 / sum d^2) over all frames.
double frame_local_nmse_db(const nn::CnnModel& model, const SubFilterBank& bank,
                           std::span<const PropagatedFrame> frames);

/// The unsupervised loop: frames -> CNN -> combine -> loss -> backward ->
/// optimizer step. Exposed as a class so single steps can be probed.
class UnsupervisedTrainer {
 public:
  UnsupervisedTrainer(nn::CnnModel& model, const SubFilterBank& bank, const AcousticPaths& paths,
                      const UnlabelledDataset& data, const TrainConfig& config);

  /// Loss on the given frame indices without touching parameters.
  double batch_loss(std::span<const std::size_t> indices) const;
  /// One optimizer step on the given frames; returns the loss before the step.
  double step(std::span<const std::size_t> indices);
  /// One pass over the data in the seeded order for `epoch` (0-based); returns
  /// the mean batch loss.
  double run_epoch(std::size_t epoch);

  std::span<const PropagatedFrame> frames() const noexcept { return frames_; }
  nn::AdamOptimizer& optimizer() noexcept { return optimizer_; }
  const nn::Tensor& bank_tensor() const noexcept { return bank_tensor_; }

 private:
  nn::Tensor loss_for(std::span<const std::size_t> indices) const;

  nn::CnnModel& model_;
  TrainConfig config_;
  nn::Tensor bank_tensor_;
  std::vector<PropagatedFrame> frames_;
  nn::AdamOptimizer optimizer_;
};

/// Trains `model` in place. `validation` may be empty, in which case no
/// NMSE is reported. Throws on dimension mismatches and aborts with the
/// epoch/batch index on a non-finite loss.
TrainingReport train_unsupervised(nn::CnnModel& model, const SubFilterBank& bank, const AcousticPaths& paths,
                                  const UnlabelledDataset& train, const UnlabelledDataset& validation,
                                  const TrainConfig& config);

/// Optional NMSE tracking for the supervised trainer.
struct ValidationContext {
  const SubFilterBank* bank = nullptr;
  const AcousticPaths* paths = nullptr;
  const UnlabelledDataset* frames = nullptr;
};

/// Regression of CNN outputs onto soft-weight labels with a mean-squared
/// error loss.
TrainingReport train_supervised(nn::CnnModel& model, std::span<const LabelledExample> labelled,
                                const TrainConfig& config, const ValidationContext& validation = {});

}  // namespace anc
