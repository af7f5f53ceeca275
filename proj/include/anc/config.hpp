#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "anc/acoustic.hpp"
#include "anc/adaptive.hpp"
#include "anc/control_filters.hpp"
#include "anc/evaluation.hpp"
#include "anc/nn/cnn.hpp"
#include "anc/training.hpp"

#include <json.hpp>

namespace anc::config {

/// Where a default comes from: the method description, or a documented stand-in.
enum class Source { Paper, PaperUnspecified };
std::string to_string(Source source);

enum class ValueType { Real, Count, Seed, Bool, Text };

struct KeySpec {
  std::string key;
  std::string default_value;
  ValueType type;
  Source source;
  std::string help;
  /// Allowed values for Text keys; empty means free text.
  std::vector<std::string> choices = {};
};

/// Every configurable key, in display order.
const std::vector<KeySpec>& registry();
const KeySpec& key_spec(const std::string& key);

/// Help text listing each key, its default and its source tag.
std::string describe_keys();

/// Flat key=value configuration with dotted keys. Unknown keys and values
/// that do not parse as the key's type are hard errors.
class RunConfig {
 public:
  RunConfig();

  void set(const std::string& key, const std::string& value);
  /// `key=value` lines; '#' starts a comment. Errors carry the line number.
  void load_file(const std::filesystem::path& path);
  void load_text(const std::string& text, const std::string& origin = "<text>");

  const std::string& raw(const std::string& key) const;
  double real(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  std::uint64_t seed(const std::string& key) const;
  bool flag(const std::string& key) const;
  const std::string& text(const std::string& key) const;

  /// {key: {"value": ..., "source": ...}} for every key.
  nlohmann::json snapshot() const;
  /// Only the *.seed keys.
  nlohmann::json seeds() const;
  /// Round-trippable key=value text.
  std::string to_text() const;

  std::uint32_t sample_rate_hz() const;
  SyntheticPathOptions path_options() const;
  PretrainOptions pretrain_options() const;
  DatasetSpec dataset_spec() const;
  LabelOptions label_options() const;
  TrainConfig train_config() const;
  ComparisonArtifacts comparison_defaults() const;
  std::vector<Algorithm> algorithms() const;
  nn::CnnArchitecture architecture() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace anc::config
