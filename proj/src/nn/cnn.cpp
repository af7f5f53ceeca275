#include "anc/nn/cnn.hpp"

#include <cmath>
#include <sstream>

#include "anc/error.hpp"
#include "anc/io.hpp"
#include "anc/nn/ops.hpp"

namespace anc::nn {

namespace {

LayerSpec conv(std::size_t out, std::size_t k, std::size_t stride) {
  return {LayerSpec::Kind::Conv, out, k, stride, 0};
}
LayerSpec pool(std::size_t w) { return {LayerSpec::Kind::MaxPool, 0, 0, 1, w}; }
LayerSpec simple(LayerSpec::Kind kind) { return {kind, 0, 0, 1, 0}; }

std::vector<std::size_t> parse_args(const std::string& token, const std::string& name, std::size_t expected) {
  const auto open = token.find('(');
  const auto close = token.rfind(')');
  if (open == std::string::npos || close != token.size() - 1) {
    throw InvalidArgument("architecture: malformed layer '" + token + "'");
  }
  std::vector<std::size_t> args;
  std::stringstream ss(token.substr(open + 1, close - open - 1));
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(part, &used);
      if (used != part.size() || v <= 0) throw std::invalid_argument("bad");
      args.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw InvalidArgument("architecture: bad argument '" + part + "' in " + name);
    }
  }
  if (args.size() != expected) {
    throw InvalidArgument("architecture: " + name + " takes " + std::to_string(expected) + " arguments");
  }
  return args;
}

}  // namespace

CnnArchitecture CnnArchitecture::standard() {
  using K = LayerSpec::Kind;
  return {{conv(8, 64, 8), simple(K::Relu), pool(4), conv(16, 16, 2), simple(K::Relu), pool(4), conv(32, 8, 2),
           simple(K::Relu), simple(K::GlobalAvgPool), simple(K::Linear), simple(K::Sigmoid)}};
}

CnnArchitecture CnnArchitecture::compact() {
  using K = LayerSpec::Kind;
  return {{conv(3, 8, 4), simple(K::Relu), pool(2), conv(4, 4, 2), simple(K::Relu), simple(K::GlobalAvgPool),
           simple(K::Linear), simple(K::Sigmoid)}};
}

CnnArchitecture CnnArchitecture::parse(const std::string& descriptor) {
  CnnArchitecture arch;
  std::stringstream ss(descriptor);
  std::string token;
  while (std::getline(ss, token, ';')) {
    token.erase(0, token.find_first_not_of(" \t\n"));
    token.erase(token.find_last_not_of(" \t\n") + 1);
    if (token.empty()) continue;
    using K = LayerSpec::Kind;
    if (token.rfind("conv", 0) == 0) {
      const auto a = parse_args(token, "conv", 3);
      arch.layers.push_back(conv(a[0], a[1], a[2]));
    } else if (token.rfind("maxpool", 0) == 0) {
      arch.layers.push_back(pool(parse_args(token, "maxpool", 1)[0]));
    } else if (token == "relu") {
      arch.layers.push_back(simple(K::Relu));
    } else if (token == "gap") {
      arch.layers.push_back(simple(K::GlobalAvgPool));
    } else if (token == "linear") {
      arch.layers.push_back(simple(K::Linear));
    } else if (token == "sigmoid") {
      arch.layers.push_back(simple(K::Sigmoid));
    } else {
      throw InvalidArgument("architecture: unknown layer '" + token + "'");
    }
  }
  return arch;
}

std::string CnnArchitecture::descriptor() const {
  std::string out;
  for (const auto& l : layers) {
    if (!out.empty()) out += ';';
    switch (l.kind) {
      case LayerSpec::Kind::Conv:
        out += "conv(" + std::to_string(l.out_channels) + "," + std::to_string(l.kernel) + "," +
               std::to_string(l.stride) + ")";
        break;
      case LayerSpec::Kind::Relu: out += "relu"; break;
      case LayerSpec::Kind::MaxPool: out += "maxpool(" + std::to_string(l.window) + ")"; break;
      case LayerSpec::Kind::GlobalAvgPool: out += "gap"; break;
      case LayerSpec::Kind::Linear: out += "linear"; break;
      case LayerSpec::Kind::Sigmoid: out += "sigmoid"; break;
    }
  }
  return out;
}

void CnnModel::validate_and_allocate(Rng* rng) {
  using K = LayerSpec::Kind;
  const auto fail = [&](const std::string& why) {
    throw InvalidArgument("architecture '" + architecture_.descriptor() + "' with frame length " +
                          std::to_string(frame_length_) + ": " + why);
  };
  if (num_outputs_ < 1) fail("needs at least one output");
  if (architecture_.layers.empty() || architecture_.layers.back().kind != K::Sigmoid) fail("must end with sigmoid");

  std::size_t channels = 1, length = frame_length_;
  bool pooled = false, has_linear = false;
  std::size_t conv_index = 0;
  const auto add_param = [&](std::string name, Shape shape, std::size_t fan_in) {
    std::vector<double> data(numel(shape), 0.0);
    if (rng) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (double& v : data) v = rng->uniform(-bound, bound);
    }
    params_.push_back({std::move(name), Tensor::from(std::move(shape), std::move(data), true)});
  };

  for (const auto& layer : architecture_.layers) {
    switch (layer.kind) {
      case K::Conv: {
        if (pooled) fail("conv after global pooling");
        if (layer.kernel > length) fail("conv kernel " + std::to_string(layer.kernel) + " exceeds length " +
                                        std::to_string(length));
        const std::string name = "conv" + std::to_string(conv_index++);
        add_param(name + ".weight", {layer.out_channels, channels, layer.kernel}, channels * layer.kernel);
        add_param(name + ".bias", {layer.out_channels}, channels * layer.kernel);
        length = (length - layer.kernel) / layer.stride + 1;
        channels = layer.out_channels;
        break;
      }
      case K::MaxPool:
        if (pooled) fail("maxpool after global pooling");
        if (length / layer.window == 0) fail("maxpool window exceeds length");
        length /= layer.window;
        break;
      case K::GlobalAvgPool:
        if (pooled) fail("repeated global pooling");
        pooled = true;
        break;
      case K::Linear:
        if (!pooled || has_linear) fail("exactly one linear layer must follow global pooling");
        add_param("linear.weight", {num_outputs_, channels}, channels);
        add_param("linear.bias", {num_outputs_}, channels);
        has_linear = true;
        break;
      case K::Relu:
      case K::Sigmoid:
        break;
    }
  }
  if (!has_linear) fail("missing linear layer");
}

CnnModel CnnModel::build(std::size_t num_outputs, std::size_t frame_length, Rng& rng,
                         const CnnArchitecture& architecture) {
  CnnModel model;
  model.architecture_ = architecture;
  model.num_outputs_ = num_outputs;
  model.frame_length_ = frame_length;
  model.validate_and_allocate(&rng);
  return model;
}

CnnModel build_cnn(std::size_t num_outputs, std::size_t frame_length, Rng& rng) {
  return CnnModel::build(num_outputs, frame_length, rng);
}

Tensor CnnModel::forward(const Tensor& input) const {
  if (input.rank() != 3 || input.dim(1) != 1 || input.dim(2) != frame_length_) {
    throw InvalidArgument("CNN input must be [B,1," + std::to_string(frame_length_) + "], got " +
                          to_string(input.shape()));
  }
  using K = LayerSpec::Kind;
  Tensor x = input;
  std::size_t p = 0;
  for (const auto& layer : architecture_.layers) {
    switch (layer.kind) {
      case K::Conv:
        x = conv1d(x, params_[p].value, params_[p + 1].value, layer.stride);
        p += 2;
        break;
      case K::Relu: x = relu(x); break;
      case K::MaxPool: x = maxpool1d(x, layer.window); break;
      case K::GlobalAvgPool: x = global_avgpool(x); break;
      case K::Linear:
        x = linear(x, params_[p].value, params_[p + 1].value);
        p += 2;
        break;
      case K::Sigmoid: x = sigmoid(x); break;
    }
  }
  return x;
}

std::vector<double> standardize(std::span<const double> frame) {
  const double n = static_cast<double>(frame.size());
  double mean = 0.0;
  for (double v : frame) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : frame) var += (v - mean) * (v - mean);
  var /= n;
  const double inv_std = 1.0 / std::sqrt(std::max(var, 1e-12));
  std::vector<double> out(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) out[i] = (frame[i] - mean) * inv_std;
  return out;
}

Tensor CnnModel::prepare_input(std::span<const std::span<const double>> frames) const {
  if (frames.empty()) throw InvalidArgument("prepare_input needs at least one frame");
  std::vector<double> data;
  data.reserve(frames.size() * frame_length_);
  for (const auto& f : frames) {
    if (f.size() != frame_length_) {
      throw InvalidArgument("frame has " + std::to_string(f.size()) + " samples, model expects " +
                            std::to_string(frame_length_));
    }
    const auto z = standardize(f);
    data.insert(data.end(), z.begin(), z.end());
  }
  return Tensor::from({frames.size(), 1, frame_length_}, std::move(data));
}

Tensor CnnModel::prepare_input(std::span<const double> frame) const {
  const std::span<const double> one[] = {frame};
  return prepare_input(one);
}

std::vector<double> CnnModel::predict(std::span<const double> frame) const {
  const Tensor out = forward(prepare_input(frame));
  return {out.data().begin(), out.data().end()};
}

std::vector<Tensor> CnnModel::parameter_tensors() const {
  std::vector<Tensor> out;
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

std::size_t CnnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

CnnModel CnnModel::clone() const {
  CnnModel copy;
  copy.architecture_ = architecture_;
  copy.num_outputs_ = num_outputs_;
  copy.frame_length_ = frame_length_;
  for (const auto& p : params_) {
    copy.params_.push_back(
        {p.name, Tensor::from(p.value.shape(), std::vector<double>(p.value.data().begin(), p.value.data().end()),
                              true)});
  }
  return copy;
}

void save_checkpoint(const std::filesystem::path& path, const CnnModel& model) {
  io::BinaryWriter w;
  w.magic("ANCM");
  w.u32(kCheckpointFormatVersion);
  w.string(model.architecture().descriptor());
  w.u32(static_cast<std::uint32_t>(model.num_outputs()));
  w.u32(static_cast<std::uint32_t>(model.frame_length()));
  w.u32(static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& p : model.parameters()) {
    w.string(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) w.u32(static_cast<std::uint32_t>(d));
    w.f64s(p.value.data());
  }
  w.write_file(path);
}

CnnModel load_checkpoint(const std::filesystem::path& path) {
  auto r = io::BinaryReader::from_file(path);
  r.expect_magic("ANCM");
  if (const auto version = r.u32(); version != kCheckpointFormatVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  CnnModel model;
  try {
    model.architecture_ = CnnArchitecture::parse(r.string());
    model.num_outputs_ = r.u32();
    model.frame_length_ = r.u32();
    model.validate_and_allocate(nullptr);
  } catch (const InvalidArgument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  const std::uint32_t count = r.u32();
  if (count != model.params_.size()) throw FormatError(path.string() + ": parameter count does not match architecture");
  for (auto& p : model.params_) {
    const std::string name = r.string();
    if (name != p.name) throw FormatError(path.string() + ": expected parameter " + p.name + ", found " + name);
    const std::uint32_t rank = r.u32();
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.u32());
    if (shape != p.value.shape()) throw FormatError(path.string() + ": shape mismatch for " + name);
    const auto values = r.f64s(numel(shape));
    for (double v : values) {
      if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite value in " + name);
    }
    std::copy(values.begin(), values.end(), p.value.mutable_data().begin());
  }
  r.expect_end();
  return model;
}

}  // namespace anc::nn
