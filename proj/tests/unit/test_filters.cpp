#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "anc/acoustic.hpp"
#include "anc/control_filters.hpp"
#include "anc/error.hpp"
#include "anc/evaluation.hpp"
#include "anc/io.hpp"
#include "anc/signal.hpp"
#include "helpers.hpp"

using namespace anc;

namespace {

std::filesystem::path temp_dir(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / ("anc_unit_" + std::string(name));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

AcousticPaths identity_paths(std::uint32_t rate = 16000) {
  return make_paths(ImpulseResponse::delta(rate), ImpulseResponse::delta(rate));
}

ControlFilter random_filter(Rng& rng, std::size_t n) { return ControlFilter(testing::normals(rng, n)); }

}  // namespace

TEST_SUITE("acoustic_env") {
  TEST_CASE("synthetic paths") {
    Rng a(11), b(11);
    const auto p = synth_training_paths(a, 16000);
    const auto q = synth_training_paths(b, 16000);
    CHECK(p.primary == q.primary);
    CHECK(p.secondary_true == q.secondary_true);
    for (std::size_t i = 0; i < 16; ++i) CHECK(p.primary[i] == 0.0);
    CHECK(p.secondary_estimate == p.secondary_true);
    CHECK(p.primary.sample_rate_hz() == 16000);
  }

  TEST_CASE("propagate") {
    Rng rng(1);
    const auto paths = synth_training_paths(rng, 16000);
    const auto zero = propagate(Signal(std::vector<double>(100, 0.0), 16000), paths);
    for (double v : zero.disturbance.samples()) CHECK(v == 0.0);
    for (double v : zero.filtered_reference.samples()) CHECK(v == 0.0);

    const auto x = Signal(testing::normals(rng, 500), 16000);
    const auto id = propagate(x, identity_paths());
    CHECK(id.disturbance == x);
    CHECK(id.filtered_reference == x);

    const auto out = propagate(x, paths);
    CHECK(out.disturbance == filter_same(x, paths.primary));
    CHECK(out.filtered_reference == filter_same(x, paths.secondary_estimate));
  }

  TEST_CASE("identity paths give 0 dB with no control") {
    Rng rng(2);
    const auto x = Signal(testing::normals(rng, 1000), 16000);
    const auto r = propagate(x, identity_paths());
    CHECK(nmse_db(r.disturbance, r.disturbance) == 0.0);
  }

  TEST_CASE("path files") {
    const auto dir = temp_dir("paths");
    Rng rng(3);
    const auto paths = synth_training_paths(rng, 16000);
    save_paths(paths, dir / "p.ancs", dir / "s.ancs", dir / "e.ancs");
    const auto back = load_paths(dir / "p.ancs", dir / "s.ancs", dir / "e.ancs");
    CHECK(back.primary == paths.primary);
    CHECK(back.secondary_true == paths.secondary_true);
    const auto no_estimate = load_paths(dir / "p.ancs", dir / "s.ancs");
    CHECK(no_estimate.secondary_estimate == no_estimate.secondary_true);
    io::save_impulse_response(dir / "s8k.ancs", ImpulseResponse::delta(8000));
    CHECK_THROWS_AS(load_paths(dir / "p.ancs", dir / "s8k.ancs"), InvalidArgument);
  }

  TEST_CASE("estimate mismatch is seeded and only touches the estimate") {
    Rng rng(4);
    const auto paths = synth_training_paths(rng, 16000);
    Rng a(9), b(9);
    const auto pa = perturb_estimate(paths, a, 0.1);
    const auto pb = perturb_estimate(paths, b, 0.1);
    CHECK(pa.secondary_estimate == pb.secondary_estimate);
    CHECK(!(pa.secondary_estimate == paths.secondary_true));
    CHECK(pa.secondary_true == paths.secondary_true);
  }
}

TEST_SUITE("control_filters") {
  TEST_CASE("decompose reconstructs for many band counts") {
    Rng rng(5);
    const auto w = random_filter(rng, 1024);
    for (std::size_t m : {2, 3, 7, 15, 32}) {
      for (auto spacing : {BandSpacing::Linear, BandSpacing::Logarithmic}) {
        const auto bank = decompose(w, m, 16000, spacing);
        REQUIRE(bank.num_bands() == m);
        CHECK(bank.band_edges_hz.front() == 0.0);
        CHECK(bank.band_edges_hz.back() == 8000.0);
        const auto sum = combine(bank, WeightVector::ones(m));
        for (std::size_t j = 0; j < 1024; ++j) CHECK(std::abs(sum[j] - w[j]) <= 1e-9);
      }
    }
  }

  TEST_CASE("delta splits into complementary half bands") {
    std::vector<double> d(64, 0.0);
    d[0] = 1.0;
    const auto bank = decompose(ControlFilter(d), 2, 16000);
    const auto low = fft_magnitude(bank.filters[0].taps(), 64);
    const auto high = fft_magnitude(bank.filters[1].taps(), 64);
    for (std::size_t k = 0; k <= 32; ++k) {
      CHECK(low[k] + high[k] == doctest::Approx(1.0));
      CHECK(std::min(low[k], high[k]) <= 1e-12);
    }
    CHECK(low[0] == doctest::Approx(1.0));
    CHECK(high[32] == doctest::Approx(1.0));
  }

  TEST_CASE("M=15, N=1024 bands have no leakage") {
    Rng rng(6);
    const auto bank = decompose(random_filter(rng, 1024), 15, 16000);
    for (std::size_t i = 0; i < 15; ++i) {
      const auto mag = fft_magnitude(bank.filters[i].taps(), 1024);
      double inside = 0.0, outside = 0.0;
      for (std::size_t k = 0; k <= 512; ++k) {
        const double hz = 16000.0 * k / 1024;
        const bool in = hz >= bank.band_edges_hz[i] && hz <= bank.band_edges_hz[i + 1];
        (in ? inside : outside) += mag[k] * mag[k];
      }
      CHECK(outside <= 1e-9 * (inside + outside));
    }
  }

  TEST_CASE("combine") {
    Rng rng(7);
    const auto bank = decompose(random_filter(rng, 128), 15, 16000);
    const auto z = combine(bank, WeightVector::zeros(15));
    for (double v : z.taps()) CHECK(v == 0.0);
    CHECK(combine(bank, WeightVector::one_hot(15, 4)) == bank.filters[4]);
    std::vector<double> g(15);
    for (double& v : g) v = rng.uniform();
    const auto w = combine(bank, g);
    for (std::size_t n = 0; n < 128; ++n) {
      double acc = 0.0;
      for (std::size_t i = 0; i < 15; ++i) acc += g[i] * bank.filters[i][n];
      CHECK(w[n] == doctest::Approx(acc).epsilon(1e-12));
    }
    // Linearity holds for unconstrained weights too.
    std::vector<double> g2(15), mix(15);
    for (std::size_t i = 0; i < 15; ++i) {
      g2[i] = rng.uniform();
      mix[i] = 3.0 * g[i] - 2.0 * g2[i];
    }
    const auto w2 = combine(bank, g2), wm = combine(bank, std::span<const double>(mix));
    for (std::size_t n = 0; n < 128; ++n) CHECK(wm[n] == doctest::Approx(3.0 * w[n] - 2.0 * w2[n]).epsilon(1e-12));
    CHECK_THROWS_AS(combine(bank, WeightVector::ones(3)), InvalidArgument);
  }

  TEST_CASE("weight vector validation") {
    CHECK_THROWS_AS(WeightVector({0.5, 1.5}), InvalidArgument);
    CHECK_THROWS_AS(WeightVector({-0.1}), InvalidArgument);
    const auto c = WeightVector::clamped({-1.0, 0.5, 2.0});
    CHECK(c[0] == 0.0);
    CHECK(c[1] == 0.5);
    CHECK(c[2] == 1.0);
  }

  TEST_CASE("bank file round trip") {
    const auto dir = temp_dir("bank");
    Rng rng(8);
    const auto bank = decompose(random_filter(rng, 64), 4, 16000, BandSpacing::Logarithmic);
    save_bank(dir / "b.ancb", bank);
    const auto back = load_bank(dir / "b.ancb");
    REQUIRE(back.num_bands() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(back.filters[i] == bank.filters[i]);
    CHECK(back.band_edges_hz == bank.band_edges_hz);
    CHECK(back.sample_rate_hz == 16000);
  }

  TEST_CASE("pretrain on identity paths converges to a delta") {
    PretrainOptions o;
    o.num_taps = 32;
    o.duration_s = 3.0;
    Rng a(10), b(10);
    const auto r = pretrain_broadband(identity_paths(), a, o);
    CHECK(r.final_second_nmse_db <= -20.0);
    CHECK(r.filter[0] == doctest::Approx(1.0).epsilon(0.05));
    for (std::size_t j = 1; j < 32; ++j) CHECK(std::abs(r.filter[j]) < 0.05);
    CHECK(pretrain_broadband(identity_paths(), b, o).filter == r.filter);
  }

  TEST_CASE("pretrain with zero step does not converge") {
    PretrainOptions o;
    o.num_taps = 16;
    o.duration_s = 1.0;
    o.step_size = 0.0;
    Rng rng(1);
    CHECK_THROWS_AS(pretrain_broadband(identity_paths(), rng, o), NonConvergenceError);
  }
}
