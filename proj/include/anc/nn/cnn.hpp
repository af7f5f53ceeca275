#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "anc/nn/tensor.hpp"
#include "anc/rng.hpp"

namespace anc::nn {

struct LayerSpec {
  enum class Kind { Conv, Relu, MaxPool, GlobalAvgPool, Linear, Sigmoid };
  Kind kind = Kind::Relu;
  std::size_t out_channels = 0;  // Conv
  std::size_t kernel = 0;        // Conv
  std::size_t stride = 1;        // Conv
  std::size_t window = 0;        // MaxPool
};

/// Layer sequence of the soft-weight network, written as a descriptor such as
///
///   conv(8,64,8);relu;maxpool(4);conv(16,16,2);relu;maxpool(4);
///   conv(32,8,2);relu;gap;linear;sigmoid
///
/// conv(out_channels, kernel, stride); the single `linear` layer maps to the
/// model's M outputs. The descriptor is stored in checkpoints.
struct CnnArchitecture {
  std::vector<LayerSpec> layers;

  static CnnArchitecture standard();
  /// Scaled-down stack for short frames (>= 64 samples), used by the fast
  /// gradient checks.
  static CnnArchitecture compact();
  static CnnArchitecture parse(const std::string& descriptor);
  std::string descriptor() const;
};

struct NamedParameter {
  std::string name;
  Tensor value;
};

/// Maps a frame of F_s samples to M soft weights in (0, 1).
class CnnModel {
 public:
  /// Throws InvalidArgument if the architecture cannot consume frames of
  /// `frame_length` samples (a conv kernel or pool window outgrows its
  /// input) or does not end in gap ... linear ... sigmoid.
  static CnnModel build(std::size_t num_outputs, std::size_t frame_length, Rng& rng,
                        const CnnArchitecture& architecture = CnnArchitecture::standard());

  /// input [B,1,F_s] -> [B,M].
  Tensor forward(const Tensor& input) const;

  /// Standardises each frame (zero mean, unit variance, variance floored at
  /// 1e-12) and stacks them into [B,1,F_s]. The result carries no gradient.
  Tensor prepare_input(std::span<const std::span<const double>> frames) const;
  Tensor prepare_input(std::span<const double> frame) const;

  /// Forward pass on one raw frame, returning plain weights.
  std::vector<double> predict(std::span<const double> frame) const;

  const std::vector<NamedParameter>& parameters() const noexcept { return params_; }
  std::vector<Tensor> parameter_tensors() const;
  std::size_t parameter_count() const;
  std::size_t num_outputs() const noexcept { return num_outputs_; }
  std::size_t frame_length() const noexcept { return frame_length_; }
  const CnnArchitecture& architecture() const noexcept { return architecture_; }

  /// Deep copy with independent parameter storage.
  CnnModel clone() const;

 private:
  CnnModel() = default;
  friend CnnModel load_checkpoint(const std::filesystem::path& path);

  void validate_and_allocate(Rng* rng);

  CnnArchitecture architecture_;
  std::size_t num_outputs_ = 0;
  std::size_t frame_length_ = 0;
  std::vector<NamedParameter> params_;
};

/// Convenience wrapper for CnnModel::build with the standard architecture.
CnnModel build_cnn(std::size_t num_outputs, std::size_t frame_length, Rng& rng);

/// Per-frame standardisation used before the network.
std::vector<double> standardize(std::span<const double> frame);

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// "ANCM" file: magic, u32 version, architecture descriptor (u32 length +
/// bytes), u32 M, u32 F_s, u32 parameter count, then per parameter: name
/// (u32 length + bytes), u32 rank, rank x u32 dims, float64 data.
void save_checkpoint(const std::filesystem::path& path, const CnnModel& model);
CnnModel load_checkpoint(const std::filesystem::path& path);

}  // namespace anc::nn
