#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "anc/acoustic.hpp"
#include "anc/control_filters.hpp"
#include "anc/error.hpp"
#include "anc/evaluation.hpp"
#include "anc/io.hpp"
#include "anc/nn/cnn.hpp"
#include "anc/training.hpp"
#include "helpers.hpp"

using namespace anc;

namespace {

DatasetSpec small_spec() {
  DatasetSpec s;
  s.num_instances = 40;
  s.sample_rate_hz = 8000;
  s.center_max_hz = 3000;
  s.bandwidth_max_hz = 800;
  s.filter_taps = 127;
  s.seed = 3;
  return s;
}

struct Rig {
  AcousticPaths paths;
  SubFilterBank bank;
};

const Rig& rig() {
  static const Rig r = [] {
    Rng rng(1);
    SyntheticPathOptions po;
    po.high_hz = 3900;
    po.primary_taps = 64;
    po.primary_delay = 4;
    po.secondary_taps = 32;
    po.secondary_delay = 2;
    const auto paths = synth_training_paths(rng, 8000, po);
    PretrainOptions pre;
    pre.num_taps = 64;
    pre.duration_s = 6.0;
    pre.noise_high_hz = 3800;
    pre.noise_filter_taps = 127;
    Rng prng(2);
    const auto broadband = pretrain_broadband(paths, prng, pre).filter;
    return Rig{paths, decompose(broadband, 4, 8000)};
  }();
  return r;
}

}  // namespace

TEST_SUITE("training_pipeline") {
  TEST_CASE("dataset generation is seeded and band-limited") {
    const auto spec = small_spec();
    const auto a = generate_dataset(spec), b = generate_dataset(spec);
    REQUIRE(a.frames.size() == 40);
    for (std::size_t i = 0; i < 40; ++i) {
      CHECK(a.frames[i] == b.frames[i]);
      CHECK(a.frames[i].size() == 8000);
      CHECK(a.bands[i].low_hz >= spec.edge_floor_hz);
      CHECK(a.bands[i].high_hz <= 4000.0 - spec.edge_margin_hz);
      CHECK(a.bands[i].low_hz < a.bands[i].high_hz);
    }
    const auto band = clamp_band(spec, 100, 2000);
    CHECK(band.low_hz == spec.edge_floor_hz);
  }

  TEST_CASE("split is a seeded partition") {
    const auto s = split_indices(100, 20, 5);
    CHECK(s.validation.size() == 20);
    CHECK(s.train.size() == 80);
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.validation.begin(), s.validation.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < 100; ++i) CHECK(all[i] == i);
    CHECK(split_indices(100, 20, 5).validation == s.validation);
    CHECK(split_indices(100, 20, 6).validation != s.validation);
    CHECK_THROWS_AS(split_indices(10, 10, 1), InvalidArgument);
  }

  TEST_CASE("dataset directory round trip and checksums") {
    const auto spec = small_spec();
    const auto data = generate_dataset(spec);
    const auto root = std::filesystem::temp_directory_path() / "anc_unit_dataset";
    std::filesystem::remove_all(root);
    save_dataset_dir(root / "a", spec, data);
    save_dataset_dir(root / "b", spec, data);
    const auto back = load_dataset_dir(root / "a");
    REQUIRE(back.frames.size() == data.frames.size());
    for (std::size_t i = 0; i < back.frames.size(); ++i) CHECK(back.frames[i] == data.frames[i]);
    CHECK(back.spec.to_json() == spec.to_json());
    for (const auto& entry : std::filesystem::directory_iterator(root / "a")) {
      CHECK(io::sha256_file(entry.path()) == io::sha256_file(root / "b" / entry.path().filename()));
    }
    CHECK_THROWS_AS(load_dataset_dir(root / "missing"), MissingArtifact);
  }

  TEST_CASE("unsupervised training descends to within 1 dB of the best constant weight on a grid") {
    const auto& r = rig();
    const auto data = generate_dataset(small_spec());
    const auto split = split_indices(data.frames.size(), 10, 5);
    std::vector<Signal> tr, va;
    for (auto i : split.train) tr.push_back(data.frames[i]);
    for (auto i : split.validation) va.push_back(data.frames[i]);

    Rng mrng(4);
    auto model = nn::CnnModel::build(4, 8000, mrng, nn::CnnArchitecture::compact());
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 40;
    cfg.learning_rate = 1e-2;
    const auto report = train_unsupervised(model, r.bank, r.paths, UnlabelledDataset(tr), UnlabelledDataset(va), cfg);
    REQUIRE(report.epoch_loss.size() == 40);
    CHECK(report.epoch_loss.back() < report.epoch_loss.front());

    // The CNN has no labels at all: it only sees the loss. It should still do
    // come within 1 dB of the best constant weight vector on {0, .5, 1}^4.
    const auto frames = propagate_frames(tr, r.paths);
    const double learned = frame_local_nmse_db(model, r.bank, frames);
    double best_grid = 1e300;
    for (int code = 0; code < 81; ++code) {
      std::vector<double> g(4);
      for (int i = 0, c = code; i < 4; ++i, c /= 3) g[i] = 0.5 * (c % 3);
      const auto w = combine(r.bank, g);
      double e = 0.0, d = 0.0;
      for (const auto& f : frames) {
        const auto err = per_frame_error(w, Signal(f.disturbance, 8000), Signal(f.filtered_reference, 8000));
        for (std::size_t n = 0; n < err.size(); ++n) e += err[n] * err[n];
        for (double v : f.disturbance) d += v * v;
      }
      best_grid = std::min(best_grid, 10.0 * std::log10(e / d));
    }
    MESSAGE("learned ", learned, " dB, best grid ", best_grid, " dB");
    CHECK(learned <= best_grid + 1.0);
  }

  TEST_CASE("training is deterministic") {
    const auto& r = rig();
    const auto data = generate_dataset(small_spec());
    std::vector<Signal> tr(data.frames.begin(), data.frames.begin() + 16);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.epochs = 2;
    std::vector<double> out[2];
    for (auto& o : out) {
      Rng mrng(9);
      auto model = nn::CnnModel::build(4, 8000, mrng, nn::CnnArchitecture::compact());
      train_unsupervised(model, r.bank, r.paths, UnlabelledDataset(tr), UnlabelledDataset(tr), cfg);
      o = model.predict(tr[0].samples());
    }
    CHECK(out[0] == out[1]);
  }

  TEST_CASE("supervised training fits labels") {
    Rng rng(10);
    auto model = nn::CnnModel::build(2, 512, rng, nn::CnnArchitecture::compact());
    std::vector<LabelledExample> ex;
    for (int i = 0; i < 8; ++i) {
      auto f = testing::normals(rng, 512);
      if (i % 2) for (double& v : f) v = std::abs(v);
      ex.push_back({Signal(f, 8000), WeightVector({i % 2 ? 1.0 : 0.0, i % 2 ? 0.0 : 1.0})});
    }
    TrainConfig cfg;
    cfg.mode = TrainMode::Supervised;
    cfg.batch_size = 4;
    cfg.epochs = 60;
    cfg.learning_rate = 1e-2;
    const auto report = train_supervised(model, ex, cfg);
    CHECK(report.epoch_loss.back() < 0.5 * report.epoch_loss.front());
  }

  TEST_CASE("config validation") {
    TrainConfig cfg;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    CHECK_THROWS_AS(train_mode_from_string("semi"), InvalidArgument);
  }
}
