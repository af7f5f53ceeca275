#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "anc/error.hpp"
#include "anc/nn/cnn.hpp"
#include "anc/nn/ops.hpp"
#include "anc/nn/optimizer.hpp"
#include "helpers.hpp"

using namespace anc;
using nn::Tensor;

namespace {

Tensor rand_tensor(Rng& rng, nn::Shape shape) {
  return Tensor::from(shape, testing::normals(rng, nn::numel(shape)), true);
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_SUITE("autodiff_nn") {
  TEST_CASE("conv1d examples") {
    const auto x = Tensor::from({1, 1, 4}, {1, 2, 3, 4});
    const auto k = Tensor::from({1, 1, 2}, {1, 1});
    CHECK(values(nn::conv1d(x, k, Tensor::zeros({1}), 1)) == std::vector<double>{3, 5, 7});
    CHECK(values(nn::conv1d(x, k, Tensor(), 2)) == std::vector<double>{3, 7});
    Rng rng(1);
    const auto in = rand_tensor(rng, {2, 3, 5});
    const auto eye = Tensor::from({3, 3, 1}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    CHECK(values(nn::conv1d(in, eye, Tensor(), 1)) == values(in));
  }

  TEST_CASE("elementwise examples") {
    CHECK(values(nn::relu(Tensor::from({3}, {-1, 0, 2}))) == std::vector<double>{0, 0, 2});
    CHECK(nn::sigmoid(Tensor::scalar(0.0)).item() == 0.5);
    CHECK(values(nn::maxpool1d(Tensor::from({1, 1, 5}, {1, 3, 2, 2, 9}), 2)) == std::vector<double>{3, 2});
    CHECK(values(nn::global_avgpool(Tensor::from({1, 2, 2}, {1, 3, 2, 6}))) == std::vector<double>{2, 4});
  }

  TEST_CASE("maxpool routes the gradient to the first maximum") {
    const auto x = Tensor::from({1, 1, 4}, {5, 5, 1, 1}, true);
    nn::sum(nn::maxpool1d(x, 2)).backward();
    CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{1, 0, 1, 0});
  }

  TEST_CASE("backward examples") {
    const auto p = Tensor::from({2}, {1, 2}, true);
    nn::sum(p).backward();
    CHECK(std::vector<double>(p.grad().begin(), p.grad().end()) == std::vector<double>{1, 1});
    p.zero_grad();
    nn::sum(nn::square(p)).backward();
    CHECK(std::vector<double>(p.grad().begin(), p.grad().end()) == std::vector<double>{2, 4});
  }

  TEST_CASE("gradients of every op against central differences") {
    Rng rng(2);
    using Inputs = std::vector<Tensor>;
    CHECK(testing::gradcheck({rand_tensor(rng, {2, 3, 9}), rand_tensor(rng, {4, 3, 3}), rand_tensor(rng, {4})},
                             [](const Inputs& t) { return nn::sum(nn::square(nn::conv1d(t[0], t[1], t[2], 2))); }) <=
          1e-5);
    CHECK(testing::gradcheck({rand_tensor(rng, {2, 2, 6})},
                             [](const Inputs& t) { return nn::sum(nn::square(nn::relu(t[0]))); }) <= 1e-5);
    CHECK(testing::gradcheck({rand_tensor(rng, {3, 4})},
                             [](const Inputs& t) { return nn::sum(nn::square(nn::sigmoid(t[0]))); }) <= 1e-5);
    CHECK(testing::gradcheck({rand_tensor(rng, {2, 2, 7})},
                             [](const Inputs& t) { return nn::sum(nn::square(nn::maxpool1d(t[0], 3))); }) <= 1e-5);
    CHECK(testing::gradcheck({rand_tensor(rng, {2, 3, 5})},
                             [](const Inputs& t) { return nn::sum(nn::square(nn::global_avgpool(t[0]))); }) <= 1e-5);
    CHECK(testing::gradcheck({rand_tensor(rng, {3, 4}), rand_tensor(rng, {2, 4}), rand_tensor(rng, {2})},
                             [](const Inputs& t) { return nn::sum(nn::square(nn::linear(t[0], t[1], t[2]))); }) <=
          1e-5);
    CHECK(testing::gradcheck({rand_tensor(rng, {3, 4}), rand_tensor(rng, {4, 5})},
                             [](const Inputs& t) { return nn::sum(nn::square(nn::matmul(t[0], t[1]))); }) <= 1e-5);
    CHECK(testing::gradcheck({rand_tensor(rng, {2, 6}), rand_tensor(rng, {2, 6})},
                             [](const Inputs& t) { return nn::mse(nn::mul(t[0], t[1]), nn::sub(t[0], t[1])); }) <=
          1e-5);
    CHECK(testing::gradcheck({rand_tensor(rng, {2, 6})}, [](const Inputs& t) {
            const auto u = nn::unfold(nn::pad_left(t[0], 2), 3, 1);
            return nn::sum(nn::square(nn::reshape(u, {2, 18})));
          }) <= 1e-5);
    CHECK(testing::gradcheck({rand_tensor(rng, {2, 4, 3}), rand_tensor(rng, {2, 3})}, [](const Inputs& t) {
            return nn::mean(nn::square(nn::batched_matvec(t[0], nn::flip_last(t[1]))));
          }) <= 1e-5);
  }

  TEST_CASE("standard CNN shape, range and budget") {
    Rng a(3), b(3);
    const auto model = nn::build_cnn(15, 16000, a);
    CHECK(model.parameter_count() <= 50000);
    const auto again = nn::build_cnn(15, 16000, b);
    for (std::size_t i = 0; i < model.parameters().size(); ++i)
      CHECK(values(model.parameters()[i].value) == values(again.parameters()[i].value));

    Rng rng(4);
    const auto f1 = testing::normals(rng, 16000), f2 = testing::normals(rng, 16000);
    const std::vector<std::span<const double>> frames{f1, f2};
    const auto out = model.forward(model.prepare_input(frames));
    CHECK(out.shape() == nn::Shape{2, 15});
    for (double v : out.data()) CHECK((v > 0.0 && v < 1.0));
    CHECK(model.predict(f1) == model.predict(f1));
  }

  TEST_CASE("input standardisation is amplitude invariant") {
    Rng rng(5);
    auto f = testing::normals(rng, 256);
    const auto s1 = nn::standardize(f);
    for (double& v : f) v *= 1000.0;
    const auto s2 = nn::standardize(f);
    for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s1[i] == doctest::Approx(s2[i]));
    const auto flat = nn::standardize(std::vector<double>(16, 2.0));
    for (double v : flat) CHECK(v == 0.0);
  }

  TEST_CASE("architecture descriptors round trip") {
    const auto std_arch = nn::CnnArchitecture::standard();
    CHECK(nn::CnnArchitecture::parse(std_arch.descriptor()).descriptor() == std_arch.descriptor());
    CHECK_THROWS_AS(nn::CnnArchitecture::parse("nonsense"), InvalidArgument);
  }

  TEST_CASE("checkpoint round trip is bit exact") {
    Rng rng(6);
    const auto model = nn::CnnModel::build(4, 512, rng, nn::CnnArchitecture::compact());
    const auto path = std::filesystem::temp_directory_path() / "anc_unit_model.ancm";
    nn::save_checkpoint(path, model);
    const auto back = nn::load_checkpoint(path);
    CHECK(back.architecture().descriptor() == model.architecture().descriptor());
    const auto f = testing::normals(rng, 512);
    CHECK(back.predict(f) == model.predict(f));
  }

  TEST_CASE("adam") {
    SUBCASE("zero gradient leaves parameters unchanged") {
      const auto p = Tensor::from({3}, {1, 2, 3}, true);
      nn::AdamOptimizer opt({p});
      opt.zero_grad();
      nn::sum(nn::mul(p, Tensor::zeros({3}))).backward();
      opt.step();
      CHECK(values(p) == std::vector<double>{1, 2, 3});
    }
    SUBCASE("one step matches the update formula") {
      const auto p = Tensor::from({1}, {0.5}, true);
      nn::AdamOptimizer opt({p}, {0.1, 0.9, 0.999, 1e-8});
      p.zero_grad();
      nn::sum(nn::mul(p, Tensor::from({1}, {2.0}))).backward();
      opt.step();
      // m = 0.2, v = 0.004, m_hat = 2, v_hat = 4, step = 0.1 * 2 / (2 + 1e-8).
      CHECK(p.data()[0] == doctest::Approx(0.5 - 0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-15));
    }
    SUBCASE("minimises a quadratic") {
      const auto p = Tensor::from({1}, {0.0}, true);
      nn::AdamOptimizer opt({p}, {0.1, 0.9, 0.999, 1e-8});
      for (int i = 0; i < 200; ++i) {
        opt.zero_grad();
        nn::sum(nn::square(nn::sub(p, Tensor::from({1}, {3.0})))).backward();
        opt.step();
      }
      CHECK(std::abs(p.data()[0] - 3.0) <= 0.05);
    }
  }
}
