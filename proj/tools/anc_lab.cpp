// anc_lab: dataset generation, pre-training, decomposition, labelling,
// training, evaluation and comparison from one config.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "anc/acoustic.hpp"
#include "anc/adaptive.hpp"
#include "anc/config.hpp"
#include "anc/control_filters.hpp"
#include "anc/error.hpp"
#include "anc/evaluation.hpp"
#include "anc/io.hpp"
#include "anc/nn/cnn.hpp"
#include "anc/parallel.hpp"
#include "anc/selftest.hpp"
#include "anc/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  fs::path out = "anc_out";
  std::vector<std::string> config_files;
  std::vector<std::string> overrides;
  std::size_t threads = 0;

  std::string primary, secondary, secondary_estimate;
  std::optional<double> path_mismatch;
  std::optional<double> crossfade_ms;

  std::string dataset, bank, broadband, labels, noise;
  std::string checkpoint, supervised_checkpoint, resume;
  std::optional<std::size_t> bands;
  std::string mode;
  std::string algos;
  std::string algo = "unsup";
};

/// Records what a run read and wrote; paths under --out are stored relative
/// to it so two output roots can be compared directly.
class Manifest {
 public:
  explicit Manifest(fs::path root) : root_(std::move(root)) {}

  void input(const fs::path& p) { inputs_[label(p)] = anc::io::sha256_file(p); }
  void artifact(const fs::path& p) { artifacts_[label(p)] = anc::io::sha256_file(p); }
  void artifact_dir(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) artifact(f);
  }

  void write(const std::string& subcommand, const anc::config::RunConfig& cfg, const std::vector<std::string>& argv,
             double wall_s) const {
    json j{{"subcommand", subcommand},
           {"argv", argv},
           {"config", cfg.snapshot()},
           {"config_text", cfg.to_text()},
           {"seeds", cfg.seeds()},
           {"threads", anc::max_threads()},
           {"inputs", inputs_},
           {"artifacts", artifacts_},
           {"wall_time_s", wall_s}};
    const fs::path path = root_ / "manifests" / (subcommand + ".json");
    fs::create_directories(path.parent_path());
    std::ofstream(path, std::ios::trunc) << j.dump(2) << '\n';
  }

 private:
  std::string label(const fs::path& p) const {
    const auto rel = fs::weakly_canonical(p).lexically_relative(fs::weakly_canonical(root_));
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return p.generic_string();
  }

  fs::path root_;
  json inputs_ = json::object();
  json artifacts_ = json::object();
};

fs::path or_default(const std::string& flag, const fs::path& fallback) { return flag.empty() ? fallback : fs::path(flag); }

fs::path require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw anc::MissingArtifact(what + " not found: " + p.string());
  return p;
}

void log(const std::string& line) { std::cerr << line << '\n'; }

anc::config::RunConfig build_config(const Options& o) {
  anc::config::RunConfig cfg;
  for (const auto& f : o.config_files) cfg.load_file(f);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw anc::InvalidArgument("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.path_mismatch) cfg.set("paths.mismatch", std::to_string(*o.path_mismatch));
  if (o.crossfade_ms) cfg.set("eval.crossfade_ms", std::to_string(*o.crossfade_ms));
  if (o.bands) cfg.set("decompose.num_bands", std::to_string(*o.bands));
  if (!o.mode.empty()) cfg.set("train.mode", o.mode);
  if (!o.algos.empty()) cfg.set("eval.algos", o.algos);
  return cfg;
}

anc::AcousticPaths resolve_paths(const Options& o, const anc::config::RunConfig& cfg, Manifest& m) {
  const double mismatch = cfg.real("paths.mismatch");
  anc::Rng rng(cfg.seed("paths.seed"));
  if (o.primary.empty() != o.secondary.empty()) {
    throw anc::InvalidArgument("--primary and --secondary must be given together");
  }
  if (o.primary.empty()) {
    if (!o.secondary_estimate.empty()) throw anc::InvalidArgument("--secondary-estimate needs --primary and --secondary");
    return anc::synth_training_paths(rng, cfg.sample_rate_hz(), cfg.path_options());
  }
  std::optional<fs::path> estimate;
  if (!o.secondary_estimate.empty()) estimate = require_file(o.secondary_estimate, "secondary path estimate");
  auto paths = anc::load_paths(require_file(o.primary, "primary path"), require_file(o.secondary, "secondary path"),
                               estimate);
  m.input(o.primary);
  m.input(o.secondary);
  if (estimate) m.input(*estimate);
  if (paths.sample_rate_hz() != cfg.sample_rate_hz()) {
    throw anc::InvalidArgument("path files are at " + std::to_string(paths.sample_rate_hz()) +
                               " Hz but signal.sample_rate_hz is " + std::to_string(cfg.sample_rate_hz()));
  }
  if (mismatch > 0.0) paths = anc::perturb_estimate(paths, rng, mismatch);
  return paths;
}

anc::LoadedDataset read_dataset(const Options& o, Manifest& m) {
  const fs::path dir = require_file(or_default(o.dataset, o.out / "dataset"), "dataset directory");
  auto data = anc::load_dataset_dir(dir);
  m.input(dir / "manifest.json");
  return data;
}

anc::SubFilterBank read_bank(const Options& o, Manifest& m) {
  const fs::path p = require_file(or_default(o.bank, o.out / "bank.ancb"), "sub-filter bank");
  m.input(p);
  return anc::load_bank(p);
}

anc::DatasetSplit split_for(const anc::LoadedDataset& data, const anc::config::RunConfig& cfg) {
  return anc::split_indices(data.frames.size(), cfg.count("dataset.validation_count"), cfg.seed("dataset.split_seed"));
}

std::vector<anc::Signal> pick(const std::vector<anc::Signal>& frames, const std::vector<std::size_t>& idx) {
  std::vector<anc::Signal> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(frames[i]);
  return out;
}

void cmd_gen_dataset(const Options& o, const anc::config::RunConfig& cfg, Manifest& m) {
  const auto spec = cfg.dataset_spec();
  const auto data = anc::generate_dataset(spec);
  const fs::path dir = o.out / "dataset";
  anc::save_dataset_dir(dir, spec, data);
  m.artifact_dir(dir);
  log("wrote " + std::to_string(data.frames.size()) + " frames to " + dir.string());
}

void cmd_pretrain(const Options& o, const anc::config::RunConfig& cfg, Manifest& m) {
  const auto paths = resolve_paths(o, cfg, m);
  anc::Rng rng(cfg.seed("pretrain.seed"));
  const auto result = anc::pretrain_broadband(paths, rng, cfg.pretrain_options());
  const fs::path filter = o.out / "broadband.ancs";
  anc::io::save_impulse_response(filter, result.filter.as_impulse_response(cfg.sample_rate_hz()));
  anc::save_paths(paths, o.out / "paths" / "primary.ancs", o.out / "paths" / "secondary.ancs",
                  o.out / "paths" / "secondary_estimate.ancs");
  m.artifact(filter);
  m.artifact_dir(o.out / "paths");
  log("pre-training final-second NMSE " + std::to_string(result.final_second_nmse_db) + " dB");
}

void cmd_decompose(const Options& o, const anc::config::RunConfig& cfg, Manifest& m) {
  const fs::path in = require_file(or_default(o.broadband, o.out / "broadband.ancs"), "broadband control filter");
  m.input(in);
  const auto ir = anc::io::load_impulse_response(in);
  const auto bank = anc::decompose(anc::ControlFilter(ir.vector()), cfg.count("decompose.num_bands"),
                                   ir.sample_rate_hz(), anc::band_spacing_from_string(cfg.text("decompose.spacing")));
  const fs::path out = o.out / "bank.ancb";
  anc::save_bank(out, bank);
  m.artifact(out);
  log("wrote " + std::to_string(bank.num_bands()) + " sub filters to " + out.string());
}

void cmd_label(const Options& o, const anc::config::RunConfig& cfg, Manifest& m) {
  const auto data = read_dataset(o, m);
  const auto bank = read_bank(o, m);
  const auto paths = resolve_paths(o, cfg, m);
  const auto frames = pick(data.frames, split_for(data, cfg).train);
  const auto labelled = anc::build_labelled_dataset(frames, bank, paths, cfg.label_options());
  const fs::path out = o.out / "labels.ancl";
  anc::save_labelled_dataset(out, labelled.examples);
  m.artifact(out);
  double mean = 0.0;
  for (double v : labelled.residual_nmse_db) mean += v;
  log("labelled " + std::to_string(frames.size()) + " frames, mean label NMSE " +
      std::to_string(mean / static_cast<double>(frames.size())) + " dB");
}

anc::nn::CnnModel initial_model(const Options& o, const anc::config::RunConfig& cfg, std::size_t m_bands,
                                std::size_t frame_length, Manifest& m) {
  if (!o.resume.empty()) {
    m.input(require_file(o.resume, "checkpoint to resume from"));
    auto model = anc::nn::load_checkpoint(o.resume);
    if (model.num_outputs() != m_bands || model.frame_length() != frame_length) {
      throw anc::InvalidArgument("resumed checkpoint does not match the bank and frame length");
    }
    return model;
  }
  anc::Rng rng(cfg.seed("model.seed"));
  return anc::nn::CnnModel::build(m_bands, frame_length, rng, cfg.architecture());
}

void cmd_train(const Options& o, const anc::config::RunConfig& cfg, Manifest& m) {
  auto tc = cfg.train_config();
  tc.log = log;
  const auto data = read_dataset(o, m);
  const auto bank = read_bank(o, m);
  const auto paths = resolve_paths(o, cfg, m);
  const auto split = split_for(data, cfg);
  const anc::UnlabelledDataset validation(pick(data.frames, split.validation));
  auto model = initial_model(o, cfg, bank.num_bands(), data.spec.frame_length(), m);

  anc::TrainingReport report;
  std::string tag;
  if (tc.mode == anc::TrainMode::Unsupervised) {
    tag = "unsup";
    report = anc::train_unsupervised(model, bank, paths, anc::UnlabelledDataset(pick(data.frames, split.train)),
                                     validation, tc);
  } else {
    tag = "sup";
    const fs::path labels = require_file(or_default(o.labels, o.out / "labels.ancl"), "labelled dataset");
    m.input(labels);
    const auto examples = anc::load_labelled_dataset(labels, data.spec.sample_rate_hz);
    report = anc::train_supervised(model, examples, tc, anc::ValidationContext{&bank, &paths, &validation});
  }
  const fs::path ckpt = or_default(o.checkpoint, o.out / ("model_" + tag + ".ancm"));
  anc::nn::save_checkpoint(ckpt, model);
  const fs::path report_path = o.out / ("train_" + tag + "_report.json");
  std::ofstream(report_path, std::ios::trunc) << report.to_json().dump(2) << '\n';
  m.artifact(ckpt);
  m.artifact(report_path);
  if (report.status != "ok") log("warning: " + report.message);
}

void run_comparison(const Options& o, const anc::config::RunConfig& cfg, Manifest& m,
                    const std::vector<anc::Algorithm>& algos, const fs::path& dir) {
  const auto paths = resolve_paths(o, cfg, m);
  auto artifacts = cfg.comparison_defaults();
  const auto wants = [&](anc::Algorithm a) { return std::find(algos.begin(), algos.end(), a) != algos.end(); };
  if (wants(anc::Algorithm::UnsupervisedGfanc)) {
    const fs::path p = or_default(o.checkpoint, o.out / "model_unsup.ancm");
    require_file(p, "trained unsupervised model (run train or pass --checkpoint)");
    m.input(p);
    artifacts.unsupervised_model = anc::nn::load_checkpoint(p);
  }
  if (wants(anc::Algorithm::SupervisedGfanc)) {
    const fs::path p = or_default(o.supervised_checkpoint, o.out / "model_sup.ancm");
    require_file(p, "trained supervised model (run train --mode supervised or pass --supervised-checkpoint)");
    m.input(p);
    artifacts.supervised_model = anc::nn::load_checkpoint(p);
  }

  const bool gfanc = wants(anc::Algorithm::UnsupervisedGfanc) || wants(anc::Algorithm::SupervisedGfanc);
  if (gfanc || wants(anc::Algorithm::FixedFilter)) {
    const fs::path bank = or_default(o.bank, o.out / "bank.ancb");
    if (fs::exists(bank) || gfanc) artifacts.bank = read_bank(o, m);
  }
  if (wants(anc::Algorithm::FixedFilter)) {
    const fs::path bb = or_default(o.broadband, o.out / "broadband.ancs");
    if (fs::exists(bb)) {
      m.input(bb);
      artifacts.broadband = anc::ControlFilter(anc::io::load_impulse_response(bb).vector());
    } else if (!artifacts.bank) {
      throw anc::MissingArtifact("fixed needs the broadband control filter: " + bb.string() + " not found");
    }
  }
  anc::Signal noise;
  if (!o.noise.empty()) {
    m.input(require_file(o.noise, "noise signal"));
    noise = anc::io::load_signal(o.noise);
  } else {
    noise = anc::generate_nonstationary_noise(cfg.dataset_spec(), cfg.count("eval.noise_seconds"),
                                              cfg.seed("eval.noise_seed"));
    fs::create_directories(dir);
    anc::io::save_signal(dir / "noise.ancs", noise);
    m.artifact(dir / "noise.ancs");
  }
  const auto report = anc::compare(algos, noise, paths, artifacts);
  for (const auto& f : report.write(dir)) m.artifact(f);
  for (const auto& row : report.rows) {
    std::printf("%-6s NMSE %8.3f dB%s\n", anc::algorithm_id(row.algorithm).c_str(), row.nmse_db,
                row.result.diverged_at ? "  (diverged)" : "");
  }
}

void cmd_evaluate(const Options& o, const anc::config::RunConfig& cfg, Manifest& m) {
  const auto algo = anc::algorithm_from_id(o.algo);
  run_comparison(o, cfg, m, {algo}, o.out / ("evaluate_" + o.algo));
}

void cmd_compare(const Options& o, const anc::config::RunConfig& cfg, Manifest& m) {
  run_comparison(o, cfg, m, cfg.algorithms(), o.out / "compare");
}

int cmd_selftest(const Options& o, Manifest& m) {
  const auto results = anc::selftest::run_fast_suite();
  json j = json::array();
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%s %s: %s (%.2f s)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.seconds);
    j.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
    ok = ok && r.passed;
  }
  const fs::path path = o.out / "selftest.json";
  fs::create_directories(o.out);
  std::ofstream(path, std::ios::trunc) << j.dump(2) << '\n';
  m.artifact(path);
  return ok ? 0 : 1;
}

int exit_code(const std::string& kind) {
  if (kind == "invalid_argument" || kind == "usage") return 2;
  if (kind == "missing_artifact") return 3;
  if (kind == "format") return 4;
  if (kind == "divergence" || kind == "non_convergence") return 5;
  return 1;
}

int report_error(const std::string& subcommand, const std::string& kind, const std::string& message) {
  json j{{"error", {{"subcommand", subcommand}, {"kind", kind}, {"message", message}}}};
  std::cerr << j.dump() << '\n';
  return exit_code(kind);
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Generative fixed-filter active noise control workbench"};
  app.footer(anc::config::describe_keys());
  app.require_subcommand(1, 1);
  app.add_option("--out", o.out, "output root directory")->capture_default_str();
  app.add_option("--config", o.config_files, "key=value config file (repeatable)");
  app.add_option("--set", o.overrides, "override one config key, key=value (repeatable)");
  app.add_option("--threads", o.threads, "worker cap (default: ANC_LAB_THREADS or all cores)");
  app.add_option("--primary", o.primary, "primary path impulse response (.ancs)");
  app.add_option("--secondary", o.secondary, "true secondary path impulse response (.ancs)");
  app.add_option("--secondary-estimate", o.secondary_estimate, "secondary path estimate (.ancs, default: exact)");
  app.add_option("--path-mismatch", o.path_mismatch, "relative perturbation of the secondary estimate");

  auto* gen = app.add_subcommand("gen-dataset", "generate the synthetic noise corpus");
  auto* pre = app.add_subcommand("pretrain", "pre-train the broadband control filter with FxLMS");
  auto* dec = app.add_subcommand("decompose", "split the broadband filter into sub control filters");
  dec->add_option("--broadband", o.broadband, "broadband filter (default <out>/broadband.ancs)");
  dec->add_option("--bands", o.bands, "number of sub filters (decompose.num_bands)");
  auto* lab = app.add_subcommand("label", "derive soft-weight labels for supervised training");
  auto* trn = app.add_subcommand("train", "train the CNN");
  trn->add_option("--mode", o.mode, "unsupervised or supervised (train.mode)");
  trn->add_option("--labels", o.labels, "labelled dataset for supervised mode (default <out>/labels.ancl)");
  trn->add_option("--checkpoint", o.checkpoint, "where to write the model (default <out>/model_<mode>.ancm)");
  trn->add_option("--resume", o.resume, "start from this checkpoint's parameters");
  auto* eva = app.add_subcommand("evaluate", "run one algorithm on the test noise");
  eva->add_option("--algo", o.algo, "unsup, sup, fxlms, fixed or none")->capture_default_str();
  auto* cmp = app.add_subcommand("compare", "run several algorithms on the same test noise");
  cmp->add_option("--algos", o.algos, "comma-separated list (eval.algos)");
  auto* self = app.add_subcommand("selftest", "run the fast invariant suite");

  for (auto* sub : {lab, trn}) {
    sub->add_option("--dataset", o.dataset, "dataset directory (default <out>/dataset)");
    sub->add_option("--bank", o.bank, "sub-filter bank (default <out>/bank.ancb)");
  }
  for (auto* sub : {eva, cmp}) {
    sub->add_option("--bank", o.bank, "sub-filter bank (default <out>/bank.ancb)");
    sub->add_option("--broadband", o.broadband, "broadband filter for the fixed baseline");
    sub->add_option("--checkpoint", o.checkpoint, "unsupervised model (default <out>/model_unsup.ancm)");
    sub->add_option("--supervised-checkpoint", o.supervised_checkpoint,
                    "supervised model (default <out>/model_sup.ancm)");
    sub->add_option("--noise", o.noise, "test noise (.ancs, default: generated nonstationary noise)");
    sub->add_option("--crossfade", o.crossfade_ms, "crossfade between frame filters in ms (eval.crossfade_ms)");
  }
  for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    sub->footer(anc::config::describe_keys());
  }
  (void)gen, (void)pre, (void)self;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("", "usage", e.what());
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  const auto start = std::chrono::steady_clock::now();
  try {
    if (o.threads > 0) anc::set_max_threads(o.threads);
    const auto cfg = build_config(o);
    fs::create_directories(o.out);
    Manifest m(o.out);
    for (const auto& f : o.config_files) m.input(f);
    int status = 0;
    if (sub == "gen-dataset") cmd_gen_dataset(o, cfg, m);
    else if (sub == "pretrain") cmd_pretrain(o, cfg, m);
    else if (sub == "decompose") cmd_decompose(o, cfg, m);
    else if (sub == "label") cmd_label(o, cfg, m);
    else if (sub == "train") cmd_train(o, cfg, m);
    else if (sub == "evaluate") cmd_evaluate(o, cfg, m);
    else if (sub == "compare") cmd_compare(o, cfg, m);
    else if (sub == "selftest") status = cmd_selftest(o, m);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    m.write(sub, cfg, std::vector<std::string>(argv, argv + argc), wall);
    if (status != 0) return report_error(sub, "selftest_failed", "one or more self-test checks failed");
    return 0;
  } catch (const anc::Error& e) {
    return report_error(sub, e.kind(), e.what());
  } catch (const std::exception& e) {
    return report_error(sub, "internal", e.what());
  }
}
