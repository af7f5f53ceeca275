#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "anc/acoustic.hpp"
#include "anc/adaptive.hpp"
#include "anc/anc_loss.hpp"
#include "anc/control_filters.hpp"
#include "anc/error.hpp"
#include "anc/evaluation.hpp"
#include "anc/signal.hpp"
#include "helpers.hpp"

using namespace anc;

namespace {

AcousticPaths identity_paths(std::uint32_t rate = 16000) {
  return make_paths(ImpulseResponse::delta(rate), ImpulseResponse::delta(rate));
}

Signal tone(double hz, double amplitude, std::size_t n, std::uint32_t rate = 16000) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = amplitude * std::sin(2.0 * std::numbers::pi * hz * i / rate);
  return Signal(std::move(v), rate);
}

}  // namespace

TEST_SUITE("adaptive_baselines") {
  TEST_CASE("history buffer is newest first") {
    HistoryBuffer h(3);
    h.push(1);
    h.push(2);
    auto v = h.view();
    CHECK(v[0] == 2);
    CHECK(v[1] == 1);
    CHECK(v[2] == 0);
    for (int i = 3; i <= 10; ++i) h.push(i);
    v = h.view();
    CHECK(v[0] == 10);
    CHECK(v[1] == 9);
    CHECK(v[2] == 8);
  }

  TEST_CASE("FxLMS hand trace, N=2") {
    // s = s_hat = delta, mu = 0.5, x = [1,2,3], d = [1,1,1]:
    // n=0: y=0, e=1, w=[0.5,0]; n=1: y=1, e=0; n=2: y=1.5, e=-0.5, w=[-0.25,-0.5].
    const auto s = ImpulseResponse::delta(16000);
    auto state = make_fxlms_state(2, 0.5, s, 1);
    CHECK(fxlms_step(state, 1, 1, s) == 1.0);
    CHECK(state.weights == std::vector<double>{0.5, 0.0});
    CHECK(fxlms_step(state, 2, 1, s) == 0.0);
    CHECK(fxlms_step(state, 3, 1, s) == -0.5);
    CHECK(state.weights == std::vector<double>{-0.25, -0.5});
  }

  TEST_CASE("FxLMS with zero step passes the disturbance through") {
    Rng rng(1);
    const auto paths = synth_training_paths(rng, 16000);
    const auto x = Signal(testing::normals(rng, 4000), 16000);
    const auto d = propagate(x, paths).disturbance;
    auto state = make_fxlms_state(64, 0.0, paths.secondary_true, paths.secondary_estimate.size());
    CHECK(run_fxlms(state, x, d, paths.secondary_estimate) == d);
    for (double w : state.weights) CHECK(w == 0.0);
  }

  TEST_CASE("FxLMS cancels a tone on identity paths") {
    const auto r = simulate_fxlms(identity_paths(), tone(500, 1.0, 5 * 16000), 1e-3, 1024);
    REQUIRE(r.per_second_nmse_db.size() == 5);
    CHECK(r.per_second_nmse_db.back() <= -20.0);
    // Non-increasing until the residual reaches the rounding floor.
    for (std::size_t s = 2; s < 5; ++s) {
      if (r.per_second_nmse_db[s - 1] > -200.0) CHECK(r.per_second_nmse_db[s] <= r.per_second_nmse_db[s - 1] + 0.5);
    }
  }

  TEST_CASE("FxLMS divergence carries the sample index") {
    const auto s = ImpulseResponse::delta(16000);
    auto state = make_fxlms_state(4, 10.0, s, 1);
    const auto x = tone(1000, 10.0, 2000);
    try {
      run_fxlms(state, x, x, s);
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.index() < 2000);
      CHECK(e.index() == state.samples_processed - 1);
    }
    const auto r = simulate_fxlms(identity_paths(), x, 10.0, 4);
    REQUIRE(r.diverged_at.has_value());
    CHECK(r.error.size() == *r.diverged_at);
  }

  TEST_CASE("physical and commuted orderings agree for a frozen filter") {
    Rng rng(2);
    const auto paths = synth_training_paths(rng, 16000);
    const auto x = Signal(testing::normals(rng, 3000), 16000);
    const auto d = propagate(x, paths).disturbance;
    auto state = make_fxlms_state(32, 0.0, paths.secondary_true, paths.secondary_estimate.size());
    state.weights = testing::normals(rng, 32);
    const auto physical = run_fxlms(state, x, d, paths.secondary_estimate);
    const auto commuted = per_frame_error(ControlFilter(state.weights), d, filter_same(x, paths.secondary_true));
    for (std::size_t n = 0; n < x.size(); ++n) CHECK(physical[n] == doctest::Approx(commuted[n]).epsilon(1e-10));
  }

  TEST_CASE("label_frame picks the occupied band") {
    // Off-band sub filters are negated so any off-band weight hurts; only
    // band 1 is worth switching on.
    std::vector<double> d(1024, 0.0);
    d[0] = 1.0;
    auto bank = decompose(ControlFilter(d), 4, 16000);
    for (std::size_t i : {0u, 2u, 3u}) {
      auto taps = bank.filters[i].vector();
      for (double& t : taps) t = -t;
      bank.filters[i] = ControlFilter(std::move(taps));
    }
    Rng rng(3);
    const auto noise = white_noise(rng, 16000, 16000);
    const auto frame = filter_same(noise, design_bandpass(2600, 3400, 511, 16000));
    const auto r = label_frame(frame, bank, identity_paths());
    CHECK(r.weights[1] >= 0.8);
    for (std::size_t i : {0u, 2u, 3u}) CHECK(r.weights[i] <= 0.2);
    CHECK(r.residual_nmse_db <= r.zero_weight_nmse_db + 1e-9);

    // Brute force over one-hot vectors agrees on the best band.
    std::size_t best = 0;
    double best_nmse = 1e300;
    for (std::size_t m = 0; m < 4; ++m) {
      const auto w = combine(bank, WeightVector::one_hot(4, m));
      const double e = nmse_db(per_frame_error(w, frame, frame), frame);
      if (e < best_nmse) best_nmse = e, best = m;
    }
    CHECK(best == 1);

    LabelOptions frozen;
    frozen.step_size = 0.0;
    CHECK(label_frame(frame, bank, identity_paths(), frozen).weights == WeightVector::zeros(4));
    CHECK(label_frame(frame, bank, identity_paths()).weights == r.weights);
  }

  TEST_CASE("labelled dataset") {
    std::vector<double> d(32, 0.0);
    d[0] = 1.0;
    const auto bank = decompose(ControlFilter(d), 3, 8000);
    const auto paths = identity_paths(8000);
    CHECK(build_labelled_dataset({}, bank, paths).examples.empty());
    Rng rng(4);
    std::vector<Signal> frames;
    for (int i = 0; i < 10; ++i) {
      const double lo = 200 + 300 * i;
      frames.push_back(filter_same(white_noise(rng, 2000, 8000), design_bandpass(lo, lo + 300, 101, 8000)));
    }
    const auto data = build_labelled_dataset(frames, bank, paths);
    REQUIRE(data.examples.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(data.examples[i].frame == frames[i]);
      for (double g : data.examples[i].soft_weights.values()) CHECK((g >= 0.0 && g <= 1.0));
    }
    const auto path = std::filesystem::temp_directory_path() / "anc_unit_labels.ancl";
    save_labelled_dataset(path, data.examples);
    const auto back = load_labelled_dataset(path, 8000);
    REQUIRE(back.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(back[i].frame == data.examples[i].frame);
      CHECK(back[i].soft_weights == data.examples[i].soft_weights);
    }
  }
}
