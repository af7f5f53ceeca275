#include "anc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>

#include "anc/adaptive.hpp"
#include "anc/error.hpp"
#include "anc/fft.hpp"
#include "anc/io.hpp"

namespace anc {

using nlohmann::json;

std::string algorithm_id(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::UnsupervisedGfanc: return "unsup";
    case Algorithm::SupervisedGfanc: return "sup";
    case Algorithm::Fxlms: return "fxlms";
    case Algorithm::FixedFilter: return "fixed";
    case Algorithm::NoControl: return "none";
  }
  return "none";
}

Algorithm algorithm_from_id(const std::string& id) {
  if (id == "unsup") return Algorithm::UnsupervisedGfanc;
  if (id == "sup") return Algorithm::SupervisedGfanc;
  if (id == "fxlms") return Algorithm::Fxlms;
  if (id == "fixed") return Algorithm::FixedFilter;
  if (id == "none") return Algorithm::NoControl;
  throw InvalidArgument("unknown algorithm '" + id + "' (expected unsup, sup, fxlms, fixed or none)");
}

double nmse_db(std::span<const double> error, std::span<const double> disturbance) {
  if (error.size() != disturbance.size()) throw InvalidArgument("error and disturbance lengths differ");
  const double d_energy = kernels::energy(disturbance);
  if (!(d_energy > 0.0)) throw InvalidArgument("NMSE is undefined for a zero-energy disturbance");
  return 10.0 * std::log10(kernels::energy(error) / d_energy);
}

double nmse_db(const Signal& error, const Signal& disturbance) {
  return nmse_db(error.samples(), disturbance.samples());
}

double nmse_db_or_nan(std::span<const double> error, std::span<const double> disturbance) {
  if (error.size() != disturbance.size()) throw InvalidArgument("error and disturbance lengths differ");
  if (!(kernels::energy(disturbance) > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return nmse_db(error, disturbance);
}

namespace {

std::vector<double> per_second_nmse(const Signal& error, const Signal& disturbance) {
  const std::size_t second = error.sample_rate_hz();
  std::vector<double> out;
  for (std::size_t start = 0; start + second <= error.size(); start += second) {
    out.push_back(nmse_db_or_nan(error.samples().subspan(start, second), disturbance.samples().subspan(start, second)));
  }
  return out;
}

SimulationResult finish(Algorithm algorithm, std::vector<double> error, const Signal& disturbance) {
  SimulationResult r;
  r.algorithm = algorithm;
  r.error = Signal(std::move(error), disturbance.sample_rate_hz());
  r.disturbance = disturbance;
  r.per_second_nmse_db = per_second_nmse(r.error, r.disturbance);
  return r;
}

void check_rates(const AcousticPaths& paths, const Signal& noise) {
  if (noise.sample_rate_hz() != paths.sample_rate_hz()) throw InvalidArgument("noise and path sample rates differ");
}

/// y[n] for n in [begin, begin + count) of the filter applied to the whole
/// of `x`, using at most N - 1 samples of history before `begin`.
std::vector<double> filter_window(std::span<const double> x, std::span<const double> taps, std::size_t begin,
                                  std::size_t count) {
  const std::size_t history = std::min(begin, taps.size() - 1);
  const std::size_t start = begin - history;
  std::vector<double> out(history + count);
  kernels::causal_filter(x.subspan(start, history + count), taps, out);
  out.erase(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(history));
  return out;
}

}  // namespace

std::vector<double> per_second_nr(const SimulationResult& result) {
  if (result.error.size() < result.error.sample_rate_hz()) {
    throw InvalidArgument("per-second noise reduction needs at least one second of signal");
  }
  auto nmse = per_second_nmse(result.error, result.disturbance);
  for (double& v : nmse) v = -v;
  return nmse;
}

WeightGenerator cnn_weight_generator(const nn::CnnModel& model) {
  return [&model](std::span<const double> frame) { return model.predict(frame); };
}

WeightGenerator constant_weight_generator(std::vector<double> weights) {
  return [weights = std::move(weights)](std::span<const double>) { return weights; };
}

SimulationResult simulate_gfanc(const WeightGenerator& generator, const SubFilterBank& bank,
                                const AcousticPaths& paths, const Signal& noise, const GfancOptions& options,
                                Algorithm algorithm) {
  check_rates(paths, noise);
  if (bank.sample_rate_hz != paths.sample_rate_hz()) throw InvalidArgument("bank and path sample rates differ");
  const std::size_t frame = options.frame_length ? options.frame_length : paths.sample_rate_hz();
  if (noise.empty() || noise.size() % frame != 0) {
    throw InvalidArgument("GFANC simulation needs a whole number of " + std::to_string(frame) + "-sample frames");
  }
  if (!(options.crossfade_ms >= 0.0)) throw InvalidArgument("crossfade must be >= 0 ms");
  const std::size_t fade =
      std::min(frame, static_cast<std::size_t>(std::llround(options.crossfade_ms * paths.sample_rate_hz() / 1000.0)));

  const Signal disturbance = filter_same(noise, paths.primary);
  const Signal plant_reference = filter_same(noise, paths.secondary_true);
  const auto d = disturbance.samples();
  const auto xs = plant_reference.samples();
  const std::size_t m = bank.num_bands();

  std::vector<double> error(d.begin(), d.end());
  SimulationResult result;
  result.per_frame_weights.push_back(WeightVector::zeros(m));
  ControlFilter previous = ControlFilter::zeros(bank.num_taps());
  for (std::size_t k = 1; k < noise.size() / frame; ++k) {
    auto g = generator(noise.samples().subspan((k - 1) * frame, frame));
    if (g.size() != m) {
      throw InvalidArgument("weight generator returned " + std::to_string(g.size()) + " weights for " +
                            std::to_string(m) + " sub filters");
    }
    WeightVector weights(std::move(g));
    const ControlFilter current = combine(bank, weights);
    const std::size_t begin = k * frame;
    auto y = filter_window(xs, current.taps(), begin, frame);
    if (fade > 0) {
      const auto y_prev = filter_window(xs, previous.taps(), begin, fade);
      for (std::size_t n = 0; n < fade; ++n) {
        const double alpha = static_cast<double>(n + 1) / static_cast<double>(fade);
        y[n] = (1.0 - alpha) * y_prev[n] + alpha * y[n];
      }
    }
    for (std::size_t n = 0; n < frame; ++n) error[begin + n] = d[begin + n] - y[n];
    result.per_frame_weights.push_back(std::move(weights));
    previous = current;
  }

  auto base = finish(algorithm, std::move(error), disturbance);
  base.per_frame_weights = std::move(result.per_frame_weights);
  return base;
}

SimulationResult simulate_gfanc(const nn::CnnModel& model, const SubFilterBank& bank, const AcousticPaths& paths,
                                const Signal& noise, const GfancOptions& options, Algorithm algorithm) {
  if (model.num_outputs() != bank.num_bands()) {
    throw InvalidArgument("model outputs (" + std::to_string(model.num_outputs()) + ") do not match bank size (" +
                          std::to_string(bank.num_bands()) + ")");
  }
  GfancOptions opts = options;
  if (opts.frame_length == 0) opts.frame_length = model.frame_length();
  if (opts.frame_length != model.frame_length()) throw InvalidArgument("frame length does not match the model");
  return simulate_gfanc(cnn_weight_generator(model), bank, paths, noise, opts, algorithm);
}

SimulationResult simulate_fixed(const ControlFilter& filter, const AcousticPaths& paths, const Signal& noise) {
  check_rates(paths, noise);
  const Signal disturbance = filter_same(noise, paths.primary);
  const Signal plant_reference = filter_same(noise, paths.secondary_true);
  std::vector<double> y(noise.size());
  kernels::causal_filter(plant_reference.samples(), filter.taps(), y);
  for (std::size_t n = 0; n < y.size(); ++n) y[n] = disturbance[n] - y[n];
  return finish(Algorithm::FixedFilter, std::move(y), disturbance);
}

SimulationResult simulate_fxlms(const AcousticPaths& paths, const Signal& noise, double step_size,
                                std::size_t num_taps) {
  check_rates(paths, noise);
  const Signal disturbance = filter_same(noise, paths.primary);
  auto state = make_fxlms_state(num_taps, step_size, paths.secondary_true, paths.secondary_estimate.size());
  std::vector<double> error(noise.size());
  std::optional<std::size_t> diverged_at;
  for (std::size_t n = 0; n < noise.size(); ++n) {
    try {
      error[n] = fxlms_step(state, noise[n], disturbance[n], paths.secondary_estimate);
    } catch (const DivergenceError& e) {
      diverged_at = e.index();
      error.resize(n);
      break;
    }
  }
  if (diverged_at) {
    auto r = finish(Algorithm::Fxlms, std::move(error), disturbance.slice(0, *diverged_at));
    r.diverged_at = diverged_at;
    return r;
  }
  return finish(Algorithm::Fxlms, std::move(error), disturbance);
}

SimulationResult simulate_no_control(const AcousticPaths& paths, const Signal& noise) {
  check_rates(paths, noise);
  const Signal disturbance = filter_same(noise, paths.primary);
  return finish(Algorithm::NoControl, disturbance.vector(), disturbance);
}

PsdEstimate welch_psd(const Signal& x, std::size_t segment_len, double overlap) {
  if (!is_power_of_two(segment_len)) throw InvalidArgument("Welch segment length must be a power of two");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw InvalidArgument("Welch overlap must be in [0, 1)");
  if (x.size() < segment_len) throw InvalidArgument("signal is shorter than one Welch segment");

  const auto noverlap = static_cast<std::size_t>(std::floor(overlap * static_cast<double>(segment_len)));
  const std::size_t hop = std::max<std::size_t>(1, segment_len - noverlap);
  const auto window = hann_window(segment_len, true);
  double window_power = 0.0;
  for (double w : window) window_power += w * w;
  const double fs = x.sample_rate_hz();
  const std::size_t bins = segment_len / 2 + 1;

  std::vector<double> acc(bins, 0.0);
  std::vector<double> segment(segment_len);
  std::size_t count = 0;
  for (std::size_t start = 0; start + segment_len <= x.size(); start += hop, ++count) {
    for (std::size_t i = 0; i < segment_len; ++i) segment[i] = x[start + i] * window[i];
    const auto spectrum = fft::forward_real(segment);
    for (std::size_t k = 0; k < bins; ++k) acc[k] += std::norm(spectrum[k]);
  }

  PsdEstimate psd;
  psd.segment_len = segment_len;
  psd.overlap = overlap;
  psd.freqs_hz.resize(bins);
  psd.power_db.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const bool interior = k != 0 && k != segment_len / 2;
    const double density = acc[k] / static_cast<double>(count) / (fs * window_power) * (interior ? 2.0 : 1.0);
    psd.freqs_hz[k] = static_cast<double>(k) * fs / static_cast<double>(segment_len);
    psd.power_db[k] = density > 0.0 ? std::max(-300.0, 10.0 * std::log10(density)) : -300.0;
  }
  return psd;
}

const ComparisonRow& ComparisonReport::row(Algorithm algorithm) const {
  for (const auto& r : rows) {
    if (r.algorithm == algorithm) return r;
  }
  throw InvalidArgument("comparison has no row for " + algorithm_id(algorithm));
}

namespace {

json json_number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

json json_series(const std::vector<double>& values) {
  json arr = json::array();
  for (double v : values) arr.push_back(json_number(v));
  return arr;
}

}  // namespace

json ComparisonReport::to_json() const {
  json algos = json::array();
  for (const auto& r : rows) {
    json entry{{"id", algorithm_id(r.algorithm)},
               {"nmse_db", json_number(r.nmse_db)},
               {"per_second_nr_db", json_series(r.per_second_nr_db)},
               {"samples", r.result.error.size()}};
    entry["diverged_at"] = r.result.diverged_at ? json(*r.result.diverged_at) : json(nullptr);
    if (!r.result.per_frame_weights.empty()) {
      json weights = json::array();
      for (const auto& w : r.result.per_frame_weights) weights.push_back(json_series({w.values().begin(), w.values().end()}));
      entry["per_frame_weights"] = weights;
    }
    algos.push_back(entry);
  }
  return json{{"sample_rate_hz", sample_rate_hz},
              {"psd", {{"segment_len", disturbance_psd.segment_len},
                       {"overlap", disturbance_psd.overlap},
                       {"window", disturbance_psd.window_id}}},
              {"algorithms", algos}};
}

std::vector<std::filesystem::path> ComparisonReport::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;
  const auto report_path = dir / "report.json";
  {
    std::ofstream out(report_path, std::ios::trunc);
    if (!out) throw Error("cannot write " + report_path.string(), "io");
    out << to_json().dump(2) << '\n';
  }
  files.push_back(report_path);
  const auto psd_file = dir / "disturbance_psd.csv";
  io::save_csv_table(psd_file, {"freq_hz", "power_db"}, {disturbance_psd.freqs_hz, disturbance_psd.power_db});
  files.push_back(psd_file);
  for (const auto& r : rows) {
    const std::string id = algorithm_id(r.algorithm);
    const auto error_file = dir / (id + "_error.csv");
    io::save_csv_table(error_file, {"error", "disturbance"}, {r.result.error.samples(), r.result.disturbance.samples()});
    std::vector<double> seconds(r.per_second_nr_db.size());
    for (std::size_t i = 0; i < seconds.size(); ++i) seconds[i] = static_cast<double>(i);
    const auto nr_file = dir / (id + "_per_second_nr.csv");
    io::save_csv_table(nr_file, {"second", "nr_db"}, {seconds, r.per_second_nr_db});
    const auto psd_path = dir / (id + "_psd.csv");
    io::save_csv_table(psd_path, {"freq_hz", "power_db"}, {r.residual_psd.freqs_hz, r.residual_psd.power_db});
    files.insert(files.end(), {error_file, nr_file, psd_path});
  }
  return files;
}

ComparisonReport compare(std::span<const Algorithm> algorithms, const Signal& noise, const AcousticPaths& paths,
                         const ComparisonArtifacts& artifacts) {
  const auto require_bank = [&](Algorithm a) -> const SubFilterBank& {
    if (!artifacts.bank) throw MissingArtifact(algorithm_id(a) + " needs a sub-filter bank (--bank)");
    return *artifacts.bank;
  };
  // Check every artifact before running anything.
  for (Algorithm a : algorithms) {
    if (a == Algorithm::UnsupervisedGfanc) {
      require_bank(a);
      if (!artifacts.unsupervised_model) throw MissingArtifact("unsup needs a trained unsupervised model (--checkpoint)");
    } else if (a == Algorithm::SupervisedGfanc) {
      require_bank(a);
      if (!artifacts.supervised_model) throw MissingArtifact("sup needs a trained supervised model (--supervised-checkpoint)");
    } else if (a == Algorithm::FixedFilter && !artifacts.broadband && !artifacts.bank) {
      throw MissingArtifact("fixed needs the broadband control filter (--broadband)");
    }
  }

  ComparisonReport report;
  report.sample_rate_hz = noise.sample_rate_hz();
  report.disturbance_psd =
      welch_psd(filter_same(noise, paths.primary), artifacts.psd_segment_len, artifacts.psd_overlap);
  for (Algorithm a : algorithms) {
    ComparisonRow row;
    row.algorithm = a;
    switch (a) {
      case Algorithm::UnsupervisedGfanc:
        row.result = simulate_gfanc(*artifacts.unsupervised_model, *artifacts.bank, paths, noise, artifacts.gfanc, a);
        break;
      case Algorithm::SupervisedGfanc:
        row.result = simulate_gfanc(*artifacts.supervised_model, *artifacts.bank, paths, noise, artifacts.gfanc, a);
        break;
      case Algorithm::Fxlms:
        row.result = simulate_fxlms(paths, noise, artifacts.fxlms_step_size, artifacts.fxlms_taps);
        break;
      case Algorithm::FixedFilter: {
        const ControlFilter filter = artifacts.broadband
                                         ? *artifacts.broadband
                                         : combine(*artifacts.bank, WeightVector::ones(artifacts.bank->num_bands()));
        row.result = simulate_fixed(filter, paths, noise);
        break;
      }
      case Algorithm::NoControl:
        row.result = simulate_no_control(paths, noise);
        break;
    }
    row.nmse_db = nmse_db_or_nan(row.result.error.samples(), row.result.disturbance.samples());
    if (row.result.error.size() >= row.result.error.sample_rate_hz()) row.per_second_nr_db = per_second_nr(row.result);
    if (row.result.error.size() >= artifacts.psd_segment_len) {
      row.residual_psd = welch_psd(row.result.error, artifacts.psd_segment_len, artifacts.psd_overlap);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace anc
