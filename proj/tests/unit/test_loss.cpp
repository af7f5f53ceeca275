#include <doctest.h>

#include <cmath>

#include "anc/anc_loss.hpp"
#include "anc/control_filters.hpp"
#include "anc/nn/cnn.hpp"
#include "anc/nn/ops.hpp"
#include "anc/selftest.hpp"
#include "helpers.hpp"

using namespace anc;
using nn::Tensor;

namespace {

const AntiNoiseOptions kUnfolded{std::size_t{1} << 40};
const AntiNoiseOptions kStreaming{0};

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_SUITE("anc_loss") {
  TEST_CASE("anti-noise examples on both paths") {
    const auto fx = Tensor::from({1, 3}, {1, 2, 3});
    for (const auto& opt : {kUnfolded, kStreaming}) {
      CHECK(values(anti_noise(Tensor::from({1, 2}, {1, 1}), fx, opt)) == std::vector<double>{1, 3, 5});
      CHECK(values(anti_noise(Tensor::from({1, 4}, {1, 0, 0, 0}), fx, opt)) == values(fx));
    }
  }

  TEST_CASE("unfold pipeline matches the naive oracle") {
    Rng rng(1);
    const auto w = testing::normals(rng, 4 * 64), x = testing::normals(rng, 4 * 256);
    const auto oracle = selftest::naive_anti_noise(w, x, 4, 64, 256);
    const auto wt = Tensor::from({4, 64}, w), xt = Tensor::from({4, 256}, x);
    const auto a = anti_noise_unfolded(wt, xt), b = anti_noise_streaming(wt, xt);
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      CHECK(std::abs(a.data()[i] - oracle[i]) <= 1e-10);
      CHECK(std::abs(b.data()[i] - oracle[i]) <= 1e-10);
    }
  }

  TEST_CASE("the flip is what makes the identity filter work") {
    // Mutation test: dropping the flip delays the identity filter by N-1 samples.
    const auto w = Tensor::from({1, 3}, {1, 0, 0});
    const auto fx = Tensor::from({1, 4}, {1, 2, 3, 4});
    const auto windows = nn::unfold(nn::pad_left(fx, 2), 3, 1);
    CHECK(values(nn::batched_matvec(windows, nn::flip_last(w))) == std::vector<double>{1, 2, 3, 4});
    CHECK(values(nn::batched_matvec(windows, w)) != std::vector<double>{1, 2, 3, 4});
    CHECK(values(anti_noise_unfolded(w, fx)) == std::vector<double>{1, 2, 3, 4});
  }

  TEST_CASE("loss special cases") {
    Rng rng(2);
    const auto d = Tensor::from({2, 32}, testing::normals(rng, 64));
    const auto fx = Tensor::from({2, 32}, testing::normals(rng, 64));
    const auto zero = anc_loss({d, fx, Tensor::zeros({2, 8})});
    double ms = 0.0;
    for (double v : d.data()) ms += v * v;
    CHECK(zero.item() == doctest::Approx(ms / 64).epsilon(1e-14));
    CHECK(anc_loss({d, fx, Tensor::zeros({2, 8})}, LossReduction::Sum).item() == doctest::Approx(ms));

    const auto w = Tensor::from({2, 8}, testing::normals(rng, 16));
    const auto synth = anti_noise(w, fx);
    CHECK(anc_loss({synth, fx, w}).item() == 0.0);
    CHECK(anc_loss({d, fx, w}).item() > 0.0);
  }

  TEST_CASE("loss gradients against central differences") {
    Rng rng(3);
    const auto d = Tensor::from({2, 40}, testing::normals(rng, 80));
    const auto fx = Tensor::from({2, 40}, testing::normals(rng, 80));
    for (const auto& opt : {kUnfolded, kStreaming}) {
      CHECK(testing::gradcheck({Tensor::from({2, 6}, testing::normals(rng, 12), true)},
                               [&](const std::vector<Tensor>& t) { return anc_loss({d, fx, t[0]}, LossReduction::Mean, opt); }) <=
            1e-5);
      const auto bank = Tensor::from({3, 6}, testing::normals(rng, 18));
      CHECK(testing::gradcheck({Tensor::from({2, 3}, {0.2, 0.5, 0.9, 0.1, 0.7, 0.4}, true)},
                               [&](const std::vector<Tensor>& t) {
                                 return anc_loss({d, fx, nn::matmul(t[0], bank)}, LossReduction::Mean, opt);
                               }) <= 1e-5);
    }
  }

  TEST_CASE("every CNN parameter receives a gradient") {
    Rng rng(4);
    auto model = nn::CnnModel::build(4, 256, rng, nn::CnnArchitecture::compact());
    const auto bank = Tensor::from({4, 16}, testing::normals(rng, 64));
    const auto f = testing::normals(rng, 256);
    const auto input = model.prepare_input(std::span<const double>(f));
    const auto d = Tensor::from({1, 256}, testing::normals(rng, 256));
    const auto fx = Tensor::from({1, 256}, testing::normals(rng, 256));
    anc_loss({d, fx, nn::matmul(model.forward(input), bank)}).backward();
    for (const auto& p : model.parameters()) {
      REQUIRE(p.value.has_grad());
      double norm = 0.0;
      for (double g : p.value.grad()) norm += g * g;
      CHECK_MESSAGE(norm > 0.0, p.name);
    }
  }

  TEST_CASE("per_frame_error") {
    Rng rng(5);
    const auto d = Signal(testing::normals(rng, 100), 16000);
    const auto fx = Signal(testing::normals(rng, 100), 16000);
    CHECK(per_frame_error(ControlFilter::zeros(8), d, fx) == d);
    std::vector<double> delta(8, 0.0);
    delta[0] = 1.0;
    const auto cancelled = per_frame_error(ControlFilter(delta), fx, fx);
    for (double v : cancelled.samples()) CHECK(v == 0.0);
    const auto w = testing::normals(rng, 8);
    const auto e = per_frame_error(ControlFilter(w), d, fx);
    const auto row = error_signal({Tensor::from({1, 100}, d.vector()), Tensor::from({1, 100}, fx.vector()),
                                   Tensor::from({1, 8}, w)});
    for (std::size_t i = 0; i < 100; ++i) CHECK(std::abs(e[i] - row.data()[i]) <= 1e-12);
  }

  TEST_CASE("working-set estimate selects the path") {
    CHECK(unfolded_working_set_bytes(32, 16000, 1024) > (std::size_t{2} << 30));
    CHECK(unfolded_working_set_bytes(1, 100, 8) < 1 << 20);
  }
}
