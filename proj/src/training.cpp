#include "anc/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "anc/error.hpp"
#include "anc/io.hpp"
#include "anc/nn/ops.hpp"
#include "anc/parallel.hpp"

namespace anc {

using nlohmann::json;

std::size_t DatasetSpec::frame_length() const {
  return static_cast<std::size_t>(std::llround(frame_seconds * sample_rate_hz));
}

void DatasetSpec::validate() const {
  const double nyquist = sample_rate_hz / 2.0;
  if (num_instances < 1) throw InvalidArgument("dataset needs at least one instance");
  if (sample_rate_hz == 0) throw InvalidArgument("dataset sample rate must be positive");
  if (!(frame_seconds > 0.0) || frame_length() == 0) throw InvalidArgument("frame duration must be positive");
  const auto in_range = [&](double lo, double hi) { return lo > 0.0 && hi >= lo && hi < nyquist; };
  if (!in_range(center_min_hz, center_max_hz)) throw InvalidArgument("centre-frequency range must lie in (0, Nyquist)");
  if (!in_range(bandwidth_min_hz, bandwidth_max_hz)) throw InvalidArgument("bandwidth range must lie in (0, Nyquist)");
  if (filter_taps % 2 == 0) throw InvalidArgument("dataset filter tap count must be odd");
  if (!(edge_floor_hz > 0.0) || !(edge_floor_hz < nyquist - edge_margin_hz)) {
    throw InvalidArgument("edge clamp range is empty");
  }
}

json DatasetSpec::to_json() const {
  return json{{"num_instances", num_instances},       {"frame_seconds", frame_seconds},
              {"sample_rate_hz", sample_rate_hz},     {"center_min_hz", center_min_hz},
              {"center_max_hz", center_max_hz},       {"bandwidth_min_hz", bandwidth_min_hz},
              {"bandwidth_max_hz", bandwidth_max_hz}, {"filter_taps", filter_taps},
              {"edge_floor_hz", edge_floor_hz},       {"edge_margin_hz", edge_margin_hz},
              {"seed", seed}};
}

DatasetSpec DatasetSpec::from_json(const json& j) {
  DatasetSpec s;
  s.num_instances = j.at("num_instances").get<std::size_t>();
  s.frame_seconds = j.at("frame_seconds").get<double>();
  s.sample_rate_hz = j.at("sample_rate_hz").get<std::uint32_t>();
  s.center_min_hz = j.at("center_min_hz").get<double>();
  s.center_max_hz = j.at("center_max_hz").get<double>();
  s.bandwidth_min_hz = j.at("bandwidth_min_hz").get<double>();
  s.bandwidth_max_hz = j.at("bandwidth_max_hz").get<double>();
  s.filter_taps = j.at("filter_taps").get<std::size_t>();
  s.edge_floor_hz = j.at("edge_floor_hz").get<double>();
  s.edge_margin_hz = j.at("edge_margin_hz").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

NoiseBand clamp_band(const DatasetSpec& spec, double center_hz, double bandwidth_hz) {
  NoiseBand band;
  band.center_hz = center_hz;
  band.bandwidth_hz = bandwidth_hz;
  const double top = spec.sample_rate_hz / 2.0 - spec.edge_margin_hz;
  band.low_hz = std::clamp(center_hz - bandwidth_hz / 2.0, spec.edge_floor_hz, top);
  band.high_hz = std::clamp(center_hz + bandwidth_hz / 2.0, spec.edge_floor_hz, top);
  if (!(band.high_hz > band.low_hz)) {
    throw InvalidArgument("noise band around " + std::to_string(center_hz) + " Hz is empty after clamping");
  }
  return band;
}

NoiseBand draw_band(const DatasetSpec& spec, Rng& rng) {
  const double log_lo = std::log(spec.center_min_hz);
  const double log_hi = std::log(spec.center_max_hz);
  const double center = std::exp(rng.uniform(log_lo, log_hi));
  const double bandwidth = rng.uniform(spec.bandwidth_min_hz, spec.bandwidth_max_hz);
  return clamp_band(spec, center, bandwidth);
}

Signal generate_instance(const DatasetSpec& spec, const NoiseBand& band, Rng& rng) {
  const auto shaping = design_bandpass(band.low_hz, band.high_hz, spec.filter_taps, spec.sample_rate_hz);
  const std::size_t len = spec.frame_length();
  // Run the filter over a warm-up prefix so the frame starts in steady state.
  const Signal white = white_noise(rng, len + spec.filter_taps - 1, spec.sample_rate_hz);
  const Signal filtered = filter_same(white, shaping);
  std::vector<double> frame(filtered.samples().begin() + static_cast<std::ptrdiff_t>(spec.filter_taps - 1),
                            filtered.samples().end());
  double peak = 0.0;
  for (double v : frame) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : frame) v /= peak;
  }
  return Signal(std::move(frame), spec.sample_rate_hz);
}

GeneratedDataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  GeneratedDataset out;
  out.frames.resize(spec.num_instances);
  out.bands.resize(spec.num_instances);
  const Rng root(spec.seed);
  parallel_for(spec.num_instances, [&](std::size_t i) {
    Rng rng = root.fork(i);
    out.bands[i] = draw_band(spec, rng);
    out.frames[i] = generate_instance(spec, out.bands[i], rng);
  });
  return out;
}

Signal generate_nonstationary_noise(const DatasetSpec& spec, std::size_t seconds, std::uint64_t seed,
                                    std::vector<NoiseBand>* bands) {
  DatasetSpec per_second = spec;
  per_second.num_instances = std::max<std::size_t>(1, seconds);
  per_second.seed = seed;
  const auto data = generate_dataset(per_second);
  std::vector<double> samples;
  for (std::size_t k = 0; k < seconds; ++k) {
    samples.insert(samples.end(), data.frames[k].samples().begin(), data.frames[k].samples().end());
  }
  if (bands) bands->assign(data.bands.begin(), data.bands.begin() + static_cast<std::ptrdiff_t>(seconds));
  return Signal(std::move(samples), spec.sample_rate_hz);
}

DatasetSplit split_indices(std::size_t n, std::size_t validation_count, std::uint64_t seed) {
  if (validation_count >= n) throw InvalidArgument("validation split leaves no training data");
  Rng rng(seed);
  auto perm = permutation(rng, n);
  DatasetSplit split;
  split.validation.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(validation_count));
  split.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(validation_count), perm.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

namespace {

std::string instance_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "instance_%05zu.ancs", i);
  return buf;
}

}  // namespace

void save_dataset_dir(const std::filesystem::path& dir, const DatasetSpec& spec, const GeneratedDataset& data) {
  std::filesystem::create_directories(dir);
  json instances = json::array();
  for (std::size_t i = 0; i < data.frames.size(); ++i) {
    const auto path = dir / instance_name(i);
    io::save_signal(path, data.frames[i]);
    instances.push_back({{"file", instance_name(i)},
                         {"stream", i},
                         {"center_hz", data.bands[i].center_hz},
                         {"bandwidth_hz", data.bands[i].bandwidth_hz},
                         {"low_hz", data.bands[i].low_hz},
                         {"high_hz", data.bands[i].high_hz},
                         {"sha256", io::sha256_file(path)}});
  }
  const json manifest{{"format", "anc-dataset"}, {"version", 1}, {"spec", spec.to_json()}, {"instances", instances}};
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw Error("cannot write dataset manifest in " + dir.string(), "io");
  out << manifest.dump(2) << '\n';
}

LoadedDataset load_dataset_dir(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw MissingArtifact("dataset manifest not found in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(dir.string() + "/manifest.json: " + e.what());
  }
  LoadedDataset out;
  try {
    out.spec = DatasetSpec::from_json(manifest.at("spec"));
    for (const auto& inst : manifest.at("instances")) {
      const auto path = dir / inst.at("file").get<std::string>();
      if (io::sha256_file(path) != inst.at("sha256").get<std::string>()) {
        throw FormatError(path.string() + ": checksum does not match manifest");
      }
      out.frames.push_back(io::load_signal(path));
    }
  } catch (const json::exception& e) {
    throw FormatError(dir.string() + "/manifest.json: " + e.what());
  }
  return out;
}

std::string to_string(TrainMode mode) { return mode == TrainMode::Unsupervised ? "unsupervised" : "supervised"; }

TrainMode train_mode_from_string(const std::string& name) {
  if (name == "unsupervised" || name == "unsup") return TrainMode::Unsupervised;
  if (name == "supervised" || name == "sup") return TrainMode::Supervised;
  throw InvalidArgument("unknown training mode '" + name + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (!(learning_rate >= 0.0)) throw InvalidArgument("learning rate must be >= 0");
}

json TrainingReport::to_json() const {
  return json{{"mode", to_string(mode)},
              {"epoch_loss", epoch_loss},
              {"validation_nmse_db", validation_nmse_db},
              {"steps", steps},
              {"status", status},
              {"message", message}};
}

std::vector<PropagatedFrame> propagate_frames(std::span<const Signal> frames, const AcousticPaths& paths) {
  std::vector<PropagatedFrame> out(frames.size());
  parallel_for(frames.size(), [&](std::size_t i) {
    auto prop = propagate(frames[i], paths);
    out[i].frame = frames[i].samples();
    out[i].disturbance = prop.disturbance.vector();
    out[i].filtered_reference = prop.filtered_reference.vector();
  });
  return out;
}

double frame_local_nmse_db(const nn::CnnModel& model, const SubFilterBank& bank,
                           std::span<const PropagatedFrame> frames) {
  std::vector<double> err_energy(frames.size()), dist_energy(frames.size());
  parallel_for(frames.size(), [&](std::size_t i) {
    const auto& f = frames[i];
    const auto g = model.predict(f.frame);
    const auto w = combine(bank, g);
    std::vector<double> y(f.disturbance.size());
    kernels::causal_filter(f.filtered_reference, w.taps(), y);
    double ee = 0.0;
    for (std::size_t n = 0; n < y.size(); ++n) {
      const double e = f.disturbance[n] - y[n];
      ee += e * e;
    }
    err_energy[i] = ee;
    dist_energy[i] = kernels::energy(f.disturbance);
  });
  const double num = std::accumulate(err_energy.begin(), err_energy.end(), 0.0);
  const double den = std::accumulate(dist_energy.begin(), dist_energy.end(), 0.0);
  if (den <= 0.0) return std::nan("");
  return 10.0 * std::log10(num / den);
}

namespace {

void check_model_matches(const nn::CnnModel& model, const SubFilterBank& bank, std::span<const Signal> frames) {
  if (model.num_outputs() != bank.num_bands()) {
    throw InvalidArgument("model has " + std::to_string(model.num_outputs()) + " outputs but the bank has " +
                          std::to_string(bank.num_bands()) + " sub filters");
  }
  for (const auto& f : frames) {
    if (f.size() != model.frame_length()) {
      throw InvalidArgument("frame length " + std::to_string(f.size()) + " does not match the model's " +
                            std::to_string(model.frame_length()));
    }
  }
}

nn::Tensor stack_rows(std::span<const PropagatedFrame> frames, std::span<const std::size_t> indices,
                      std::vector<double> PropagatedFrame::*field) {
  const std::size_t len = (frames[indices[0]].*field).size();
  std::vector<double> data;
  data.reserve(indices.size() * len);
  for (std::size_t i : indices) data.insert(data.end(), (frames[i].*field).begin(), (frames[i].*field).end());
  return nn::Tensor::from({indices.size(), len}, std::move(data));
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::size_t epoch) {
  Rng rng = Rng(seed).fork(epoch);
  const auto order = permutation(rng, n);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

void finish_report(TrainingReport& report, const TrainConfig& config) {
  if (report.epoch_loss.size() >= 2 && report.epoch_loss.front() > 0.0) {
    const double ratio = report.epoch_loss.back() / report.epoch_loss.front();
    if (ratio > config.loss_ratio_warning) {
      report.status = "warning";
      report.message = "final-epoch loss is " + std::to_string(ratio) + " x the first epoch's (threshold " +
                       std::to_string(config.loss_ratio_warning) + ")";
    }
  }
}

}  // namespace

UnsupervisedTrainer::UnsupervisedTrainer(nn::CnnModel& model, const SubFilterBank& bank, const AcousticPaths& paths,
                                         const UnlabelledDataset& data, const TrainConfig& config)
    : model_(model),
      config_(config),
      bank_tensor_(nn::Tensor::from({bank.num_bands(), bank.num_taps()}, bank.flattened())),
      optimizer_(model.parameter_tensors(), nn::AdamOptions{config.learning_rate}) {
  config_.validate();
  check_model_matches(model, bank, data.frames());
  if (bank.sample_rate_hz != paths.sample_rate_hz()) throw InvalidArgument("bank and paths sample rates differ");
  frames_ = propagate_frames(data.frames(), paths);
}

nn::Tensor UnsupervisedTrainer::loss_for(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw InvalidArgument("empty batch");
  std::vector<std::span<const double>> raw;
  raw.reserve(indices.size());
  for (std::size_t i : indices) raw.push_back(frames_.at(i).frame);
  const nn::Tensor weights = model_.forward(model_.prepare_input(raw));
  const nn::Tensor filters = nn::matmul(weights, bank_tensor_);
  const LossBatch batch{stack_rows(frames_, indices, &PropagatedFrame::disturbance),
                        stack_rows(frames_, indices, &PropagatedFrame::filtered_reference), filters};
  return anc_loss(batch, config_.loss_reduction, config_.anti_noise);
}

double UnsupervisedTrainer::batch_loss(std::span<const std::size_t> indices) const {
  return loss_for(indices).item();
}

double UnsupervisedTrainer::step(std::span<const std::size_t> indices) {
  const nn::Tensor loss = loss_for(indices);
  const double value = loss.item();
  if (!std::isfinite(value)) throw Error("non-finite training loss", "non_finite_loss");
  loss.backward();
  optimizer_.step();
  return value;
}

double UnsupervisedTrainer::run_epoch(std::size_t epoch) {
  const auto batches = epoch_batches(frames_.size(), config_.batch_size, config_.seed, epoch);
  double total = 0.0;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    double value;
    try {
      value = step(batches[b]);
    } catch (const Error& e) {
      if (e.kind() != "non_finite_loss") throw;
      throw Error("non-finite training loss at epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(b),
                  "non_finite_loss");
    }
    total += value;
  }
  return total / static_cast<double>(batches.size());
}

TrainingReport train_unsupervised(nn::CnnModel& model, const SubFilterBank& bank, const AcousticPaths& paths,
                                  const UnlabelledDataset& train, const UnlabelledDataset& validation,
                                  const TrainConfig& config) {
  if (train.size() == 0) throw InvalidArgument("training set is empty");
  check_model_matches(model, bank, validation.frames());
  UnsupervisedTrainer trainer(model, bank, paths, train, config);
  const auto val_frames = propagate_frames(validation.frames(), paths);

  TrainingReport report;
  report.mode = TrainMode::Unsupervised;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    report.epoch_loss.push_back(trainer.run_epoch(epoch));
    if (!val_frames.empty()) report.validation_nmse_db.push_back(frame_local_nmse_db(model, bank, val_frames));
    if (config.log) {
      std::string line = "epoch " + std::to_string(epoch + 1) + "/" + std::to_string(config.epochs) +
                         " loss " + std::to_string(report.epoch_loss.back());
      if (!val_frames.empty()) line += " val_nmse_db " + std::to_string(report.validation_nmse_db.back());
      config.log(line);
    }
    if (config.on_epoch_end) config.on_epoch_end(epoch + 1, model);
  }
  report.steps = trainer.optimizer().step_count();
  finish_report(report, config);
  return report;
}

TrainingReport train_supervised(nn::CnnModel& model, std::span<const LabelledExample> labelled,
                                const TrainConfig& config, const ValidationContext& validation) {
  config.validate();
  if (labelled.empty()) throw InvalidArgument("labelled set is empty");
  for (const auto& ex : labelled) {
    if (ex.soft_weights.size() != model.num_outputs()) {
      throw InvalidArgument("label has " + std::to_string(ex.soft_weights.size()) + " weights, model has " +
                            std::to_string(model.num_outputs()) + " outputs");
    }
    if (ex.frame.size() != model.frame_length()) throw InvalidArgument("labelled frame length does not match model");
  }
  std::vector<PropagatedFrame> val_frames;
  if (validation.bank && validation.paths && validation.frames) {
    check_model_matches(model, *validation.bank, validation.frames->frames());
    val_frames = propagate_frames(validation.frames->frames(), *validation.paths);
  }

  nn::AdamOptimizer optimizer(model.parameter_tensors(), nn::AdamOptions{config.learning_rate});
  const std::size_t m = model.num_outputs();
  TrainingReport report;
  report.mode = TrainMode::Supervised;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = epoch_batches(labelled.size(), config.batch_size, config.seed, epoch);
    double total = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<std::span<const double>> raw;
      std::vector<double> targets;
      for (std::size_t i : batches[b]) {
        raw.push_back(labelled[i].frame.samples());
        targets.insert(targets.end(), labelled[i].soft_weights.values().begin(),
                       labelled[i].soft_weights.values().end());
      }
      const nn::Tensor out = model.forward(model.prepare_input(raw));
      const nn::Tensor loss = nn::mse(out, nn::Tensor::from({batches[b].size(), m}, std::move(targets)));
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw Error("non-finite training loss at epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(b),
                    "non_finite_loss");
      }
      loss.backward();
      optimizer.step();
      total += value;
    }
    report.epoch_loss.push_back(total / static_cast<double>(batches.size()));
    if (!val_frames.empty()) {
      report.validation_nmse_db.push_back(frame_local_nmse_db(model, *validation.bank, val_frames));
    }
    if (config.log) {
      config.log("epoch " + std::to_string(epoch + 1) + "/" + std::to_string(config.epochs) + " label_mse " +
                 std::to_string(report.epoch_loss.back()));
    }
    if (config.on_epoch_end) config.on_epoch_end(epoch + 1, model);
  }
  report.steps = optimizer.step_count();
  finish_report(report, config);
  return report;
}

}  // namespace anc
