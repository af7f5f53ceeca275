#include "anc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "anc/error.hpp"

namespace anc::config {

namespace {

constexpr Source P = Source::Paper;
constexpr Source U = Source::PaperUnspecified;
constexpr ValueType R = ValueType::Real;
constexpr ValueType C = ValueType::Count;
constexpr ValueType S = ValueType::Seed;
constexpr ValueType B = ValueType::Bool;
constexpr ValueType T = ValueType::Text;

std::vector<KeySpec> build_registry() {
  return {
      {"signal.sample_rate_hz", "16000", C, P, "sample rate of every signal and path"},

      {"paths.low_hz", "20", R, U, "lower band edge of the synthetic paths"},
      {"paths.high_hz", "7900", R, U, "upper band edge of the synthetic paths"},
      {"paths.primary_taps", "256", C, U, "synthetic primary path length before the delay"},
      {"paths.primary_delay", "16", C, U, "leading zeros of the synthetic primary path"},
      {"paths.secondary_taps", "128", C, U, "synthetic secondary path length before the delay"},
      {"paths.secondary_delay", "8", C, U, "leading zeros of the synthetic secondary path"},
      {"paths.mismatch", "0", R, U, "relative Gaussian perturbation of the secondary path estimate"},
      {"paths.seed", "11", S, U, "seed for the secondary-estimate perturbation"},

      {"pretrain.num_taps", "1024", C, P, "control filter length N"},
      {"pretrain.step_size", "0.005", R, U, "FxLMS step size for broadband pre-training"},
      {"pretrain.normalized", "true", B, U, "normalise the pre-training step by reference power"},
      {"pretrain.seconds", "30", R, U, "length of the broadband pre-training run"},
      {"pretrain.noise_low_hz", "20", R, U, "lower edge of the pre-training noise"},
      {"pretrain.noise_high_hz", "7800", R, U, "upper edge of the pre-training noise"},
      {"pretrain.noise_filter_taps", "511", C, U, "bandpass length shaping the pre-training noise"},
      {"pretrain.required_nmse_db", "-10", R, U, "final-second NMSE pre-training must reach"},
      {"pretrain.seed", "3", S, U, "seed for the pre-training noise"},

      {"decompose.num_bands", "15", C, P, "number of sub control filters M"},
      {"decompose.spacing", "linear", T, U, "band edge spacing", {"linear", "log"}},

      {"dataset.num_instances", "2200", C, U, "generated frames, validation included"},
      {"dataset.validation_count", "200", C, U, "frames held out for validation"},
      {"dataset.frame_seconds", "1", R, P, "frame length in seconds"},
      {"dataset.center_min_hz", "100", R, U, "lowest band centre"},
      {"dataset.center_max_hz", "6000", R, U, "highest band centre"},
      {"dataset.bandwidth_min_hz", "100", R, U, "narrowest band"},
      {"dataset.bandwidth_max_hz", "2000", R, U, "widest band"},
      {"dataset.filter_taps", "511", C, U, "bandpass length shaping each frame"},
      {"dataset.edge_floor_hz", "20", R, U, "band edges are clamped above this"},
      {"dataset.edge_margin_hz", "100", R, U, "band edges stay this far below Nyquist"},
      {"dataset.seed", "1", S, U, "seed for frame generation"},
      {"dataset.split_seed", "5", S, U, "seed for the train/validation split"},

      {"label.step_size", "0.0001", R, U, "LMS step for soft-weight labels"},
      {"label.passes", "10", C, U, "LMS sweeps over each frame"},
      {"label.normalized", "true", B, U, "normalise the label step by |u(n)|^2"},

      {"model.architecture", "standard", T, U, "CNN layer descriptor, or standard / compact"},
      {"model.seed", "21", S, U, "seed for CNN initialisation"},

      {"train.mode", "unsupervised", T, P, "training objective", {"unsupervised", "supervised"}},
      {"train.batch_size", "32", C, U, "frames per optimizer step"},
      {"train.epochs", "10", C, U, "passes over the training set"},
      {"train.learning_rate", "0.001", R, U, "Adam learning rate"},
      {"train.loss_reduction", "mean", T, P, "reduction of the squared error", {"mean", "sum"}},
      {"train.memory_budget_bytes", "2147483648", C, U, "largest unfolded working set before streaming"},
      {"train.seed", "7", S, U, "seed for batch shuffling"},

      {"eval.fxlms_step_size", "0.0001", R, P, "FxLMS baseline step size"},
      {"eval.fxlms_taps", "1024", C, P, "FxLMS baseline filter length"},
      {"eval.crossfade_ms", "0", R, U, "crossfade between consecutive GFANC filters"},
      {"eval.psd_segment_len", "1024", C, U, "Welch segment length"},
      {"eval.psd_overlap", "0.5", R, U, "Welch segment overlap"},
      {"eval.noise_seconds", "10", C, U, "length of the nonstationary test noise"},
      {"eval.noise_seed", "99", S, U, "seed for the nonstationary test noise"},
      {"eval.algos", "unsup,sup,fxlms,fixed,none", T, U, "algorithms compared"},
  };
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw InvalidArgument("config key '" + key + "' expects a real number, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw InvalidArgument("config key '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InvalidArgument("config key '" + key + "' expects true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void check_value(const KeySpec& spec, const std::string& v) {
  switch (spec.type) {
    case ValueType::Real: parse_real(spec.key, v); break;
    case ValueType::Count:
    case ValueType::Seed: parse_unsigned(spec.key, v); break;
    case ValueType::Bool: parse_bool(spec.key, v); break;
    case ValueType::Text:
      if (!spec.choices.empty() && std::find(spec.choices.begin(), spec.choices.end(), v) == spec.choices.end()) {
        std::string allowed;
        for (const auto& c : spec.choices) allowed += (allowed.empty() ? "" : ", ") + c;
        throw InvalidArgument("config key '" + spec.key + "' must be one of " + allowed + ", got '" + v + "'");
      }
      if (spec.key == "eval.algos") {
        if (split_list(v).empty()) throw InvalidArgument("eval.algos lists no algorithms");
        for (const auto& id : split_list(v)) algorithm_from_id(id);
      }
      if (spec.key == "model.architecture" && v != "standard" && v != "compact") nn::CnnArchitecture::parse(v);
      break;
  }
}

}  // namespace

std::string to_string(Source source) { return source == Source::Paper ? "paper" : "paper_unspecified"; }

const std::vector<KeySpec>& registry() {
  static const std::vector<KeySpec> keys = build_registry();
  return keys;
}

const KeySpec& key_spec(const std::string& key) {
  for (const auto& k : registry()) {
    if (k.key == key) return k;
  }
  throw InvalidArgument("unknown config key '" + key + "'");
}

std::string describe_keys() {
  std::ostringstream out;
  out << "Config keys (key=value in --config, or --set key=value):\n";
  for (const auto& k : registry()) {
    out << "  " << k.key << " = " << k.default_value << "  [source: " << to_string(k.source) << "]  " << k.help
        << '\n';
  }
  return out.str();
}

RunConfig::RunConfig() {
  for (const auto& k : registry()) values_[k.key] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& spec = key_spec(key);
  const std::string v = trim(value);
  check_value(spec, v);
  values_[key] = v;
}

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(number);
    if (eq == std::string::npos) throw InvalidArgument(where + ": expected key=value, got '" + line + "'");
    try {
      set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(where + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("config file not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path.string());
}

const std::string& RunConfig::raw(const std::string& key) const {
  key_spec(key);
  return values_.at(key);
}

double RunConfig::real(const std::string& key) const { return parse_real(key, raw(key)); }
std::size_t RunConfig::count(const std::string& key) const { return parse_unsigned(key, raw(key)); }
std::uint64_t RunConfig::seed(const std::string& key) const { return parse_unsigned(key, raw(key)); }
bool RunConfig::flag(const std::string& key) const { return parse_bool(key, raw(key)); }
const std::string& RunConfig::text(const std::string& key) const { return raw(key); }

nlohmann::json RunConfig::snapshot() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : registry()) j[k.key] = {{"value", values_.at(k.key)}, {"source", to_string(k.source)}};
  return j;
}

nlohmann::json RunConfig::seeds() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : registry()) {
    if (k.type == ValueType::Seed) j[k.key] = seed(k.key);
  }
  return j;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& k : registry()) out += k.key + "=" + values_.at(k.key) + "\n";
  return out;
}

std::uint32_t RunConfig::sample_rate_hz() const {
  const auto rate = count("signal.sample_rate_hz");
  if (rate == 0 || rate > 1'000'000) throw InvalidArgument("signal.sample_rate_hz out of range");
  return static_cast<std::uint32_t>(rate);
}

SyntheticPathOptions RunConfig::path_options() const {
  SyntheticPathOptions o;
  o.low_hz = real("paths.low_hz");
  o.high_hz = real("paths.high_hz");
  o.primary_taps = count("paths.primary_taps");
  o.primary_delay = count("paths.primary_delay");
  o.secondary_taps = count("paths.secondary_taps");
  o.secondary_delay = count("paths.secondary_delay");
  o.estimate_mismatch = real("paths.mismatch");
  return o;
}

PretrainOptions RunConfig::pretrain_options() const {
  PretrainOptions o;
  o.num_taps = count("pretrain.num_taps");
  o.step_size = real("pretrain.step_size");
  o.normalized = flag("pretrain.normalized");
  o.duration_s = real("pretrain.seconds");
  o.noise_low_hz = real("pretrain.noise_low_hz");
  o.noise_high_hz = real("pretrain.noise_high_hz");
  o.noise_filter_taps = count("pretrain.noise_filter_taps");
  o.required_nmse_db = real("pretrain.required_nmse_db");
  return o;
}

DatasetSpec RunConfig::dataset_spec() const {
  DatasetSpec s;
  s.num_instances = count("dataset.num_instances");
  s.frame_seconds = real("dataset.frame_seconds");
  s.sample_rate_hz = sample_rate_hz();
  s.center_min_hz = real("dataset.center_min_hz");
  s.center_max_hz = real("dataset.center_max_hz");
  s.bandwidth_min_hz = real("dataset.bandwidth_min_hz");
  s.bandwidth_max_hz = real("dataset.bandwidth_max_hz");
  s.filter_taps = count("dataset.filter_taps");
  s.edge_floor_hz = real("dataset.edge_floor_hz");
  s.edge_margin_hz = real("dataset.edge_margin_hz");
  s.seed = seed("dataset.seed");
  s.validate();
  return s;
}

LabelOptions RunConfig::label_options() const {
  LabelOptions o;
  o.step_size = real("label.step_size");
  o.passes = count("label.passes");
  o.normalized = flag("label.normalized");
  return o;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  c.batch_size = count("train.batch_size");
  c.epochs = count("train.epochs");
  c.learning_rate = real("train.learning_rate");
  c.loss_reduction = loss_reduction_from_string(text("train.loss_reduction"));
  c.seed = seed("train.seed");
  c.mode = train_mode_from_string(text("train.mode"));
  c.anti_noise.memory_budget_bytes = count("train.memory_budget_bytes");
  c.validate();
  return c;
}

ComparisonArtifacts RunConfig::comparison_defaults() const {
  ComparisonArtifacts a;
  a.fxlms_step_size = real("eval.fxlms_step_size");
  a.fxlms_taps = count("eval.fxlms_taps");
  a.gfanc.crossfade_ms = real("eval.crossfade_ms");
  a.psd_segment_len = count("eval.psd_segment_len");
  a.psd_overlap = real("eval.psd_overlap");
  return a;
}

std::vector<Algorithm> RunConfig::algorithms() const {
  std::vector<Algorithm> out;
  for (const auto& id : split_list(text("eval.algos"))) out.push_back(algorithm_from_id(id));
  return out;
}

nn::CnnArchitecture RunConfig::architecture() const {
  const auto& v = text("model.architecture");
  if (v == "standard") return nn::CnnArchitecture::standard();
  if (v == "compact") return nn::CnnArchitecture::compact();
  return nn::CnnArchitecture::parse(v);
}

}  // namespace anc::config
