#include "anc/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <sstream>

#include "anc/acoustic.hpp"
#include "anc/adaptive.hpp"
#include "anc/anc_loss.hpp"
#include "anc/control_filters.hpp"
#include "anc/evaluation.hpp"
#include "anc/nn/cnn.hpp"
#include "anc/nn/ops.hpp"
#include "anc/rng.hpp"

namespace anc::selftest {

namespace {

using Clock = std::chrono::steady_clock;

std::string sci(double v) {
  std::ostringstream out;
  out.precision(3);
  out << std::scientific << v;
  return out.str();
}

template <class F>
CheckResult timed(std::string name, F&& body) {
  const auto start = Clock::now();
  CheckResult r;
  r.name = std::move(name);
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("threw: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

std::vector<double> normals(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

Signal normal_signal(Rng& rng, std::size_t n, std::uint32_t rate) { return Signal(normals(rng, n), rate); }

ControlFilter random_filter(Rng& rng, std::size_t n) {
  // Decaying random taps, roughly what an adapted controller looks like.
  std::vector<double> taps(n);
  for (std::size_t j = 0; j < n; ++j) taps[j] = rng.normal() * std::exp(-static_cast<double>(j) / (n / 4.0));
  return ControlFilter(std::move(taps));
}

}  // namespace

std::vector<double> naive_anti_noise(std::span<const double> w, std::span<const double> x, std::size_t batch,
                                     std::size_t taps, std::size_t length) {
  std::vector<double> y(batch * length, 0.0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t n = 0; n < length; ++n) {
      double acc = 0.0;
      for (std::size_t j = 0; j < taps && j <= n; ++j) acc += w[b * taps + j] * x[b * length + n - j];
      y[b * length + n] = acc;
    }
  return y;
}

CheckResult check_unfold_oracle(const UnfoldOracleOptions& o) {
  return timed("unfold pipeline vs naive convolution", [&](CheckResult& r) {
    Rng rng(o.seed);
    double worst = 0.0;
    for (std::size_t i = 0; i < o.instances; ++i) {
      const std::size_t b = 1 + rng.uniform_index(o.max_batch);
      const std::size_t n = 1 + rng.uniform_index(o.max_taps);
      const std::size_t f = 1 + rng.uniform_index(o.max_frame);
      const auto w = normals(rng, b * n);
      const auto x = normals(rng, b * f);
      const auto oracle = naive_anti_noise(w, x, b, n, f);
      const auto wt = nn::Tensor::from({b, n}, w);
      const auto xt = nn::Tensor::from({b, f}, x);
      const auto unfolded = anti_noise_unfolded(wt, xt);
      const auto streamed = anti_noise_streaming(wt, xt);
      for (std::size_t k = 0; k < oracle.size(); ++k) {
        worst = std::max({worst, std::abs(unfolded.data()[k] - oracle[k]), std::abs(streamed.data()[k] - oracle[k])});
      }
    }
    r.passed = worst <= o.tolerance;
    r.detail = std::to_string(o.instances) + " instances, max abs error " + sci(worst);
  });
}

CheckResult check_end_to_end_gradient(const GradientCheckOptions& o) {
  return timed("end-to-end gradient vs central differences", [&](CheckResult& r) {
    Rng rng(o.seed);
    auto model = nn::CnnModel::build(o.num_bands, o.frame_length, rng, nn::CnnArchitecture::compact());
    const auto bank = decompose(random_filter(rng, o.num_taps), o.num_bands, 16000, BandSpacing::Linear);
    const auto bank_t = nn::Tensor::from({bank.num_bands(), bank.num_taps()}, bank.flattened());
    std::vector<std::vector<double>> frames;
    for (std::size_t b = 0; b < o.batch; ++b) frames.push_back(normals(rng, o.frame_length));
    const auto d = nn::Tensor::from({o.batch, o.frame_length}, normals(rng, o.batch * o.frame_length));
    const auto fx = nn::Tensor::from({o.batch, o.frame_length}, normals(rng, o.batch * o.frame_length));
    std::vector<std::span<const double>> views(frames.begin(), frames.end());
    const auto input = model.prepare_input(views);
    const AntiNoiseOptions unfolded{std::size_t{1} << 40};

    const auto loss = [&] {
      const auto filters = nn::matmul(model.forward(input), bank_t);
      return anc_loss(LossBatch{d, fx, filters}, LossReduction::Mean, unfolded);
    };
    loss().backward();

    double worst = 0.0;
    std::size_t checked = 0;
    for (const auto& p : model.parameters()) {
      const std::vector<double> analytic(p.value.grad().begin(), p.value.grad().end());
      nn::Tensor handle = p.value;
      auto values = handle.mutable_data();
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double keep = values[i];
        values[i] = keep + o.epsilon;
        const double up = loss().item();
        values[i] = keep - o.epsilon;
        const double down = loss().item();
        values[i] = keep;
        const double numeric = (up - down) / (2.0 * o.epsilon);
        const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
        ++checked;
      }
    }
    r.passed = worst <= o.tolerance;
    r.detail = std::to_string(checked) + " parameters, max relative error " + sci(worst);
  });
}

CheckResult check_reconstruction(std::span<const std::size_t> band_counts, std::size_t num_taps, double tolerance,
                                 std::uint64_t seed) {
  return timed("sub-filter reconstruction and orthogonality", [&](CheckResult& r) {
    Rng rng(seed);
    const auto broadband = random_filter(rng, num_taps);
    double worst_tap = 0.0, worst_inner = 0.0;
    for (std::size_t m : band_counts) {
      const auto bank = decompose(broadband, m, 16000, BandSpacing::Linear);
      const auto sum = combine(bank, WeightVector::ones(m));
      for (std::size_t j = 0; j < num_taps; ++j) {
        worst_tap = std::max(worst_tap, std::abs(sum.taps()[j] - broadband.taps()[j]));
      }
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) {
          const auto fa = bank.filters[a].taps();
          const auto fb = bank.filters[b].taps();
          const double norms = std::sqrt(kernels::energy(fa) * kernels::energy(fb));
          if (norms > 0.0) worst_inner = std::max(worst_inner, std::abs(kernels::dot(fa, fb)) / norms);
        }
    }
    r.passed = worst_tap <= tolerance && worst_inner <= tolerance;
    r.detail = "max tap error " + sci(worst_tap) + ", max normalised inner product " + sci(worst_inner);
  });
}

CheckResult check_first_frame(std::uint64_t seed) {
  return timed("GFANC frame 0 error equals disturbance bitwise", [&](CheckResult& r) {
    Rng rng(seed);
    const std::uint32_t rate = 16000;
    const auto paths = synth_training_paths(rng, rate);
    const auto bank = decompose(random_filter(rng, 64), 4, rate, BandSpacing::Linear);
    const auto noise = normal_signal(rng, 3 * rate, rate);
    bool ok = true;
    for (double c : {0.0, 0.3, 1.0}) {
      const auto result = simulate_gfanc(constant_weight_generator(std::vector<double>(4, c)), bank, paths, noise);
      ok = ok && std::memcmp(result.error.samples().data(), result.disturbance.samples().data(),
                             rate * sizeof(double)) == 0;
    }
    Rng model_rng(seed + 1);
    const auto model = nn::CnnModel::build(4, rate, model_rng, nn::CnnArchitecture::standard());
    const auto result = simulate_gfanc(model, bank, paths, noise);
    ok = ok && std::memcmp(result.error.samples().data(), result.disturbance.samples().data(),
                           rate * sizeof(double)) == 0;
    r.passed = ok;
    r.detail = ok ? "4 simulations, frame 0 identical" : "frame 0 differs from the disturbance";
  });
}

CheckResult check_nmse_formula() {
  return timed("NMSE formula", [&](CheckResult& r) {
    Rng rng(707);
    const auto d = normals(rng, 4096);
    std::vector<double> half(d.size()), e(d.size()), scaled_e(d.size()), scaled_d(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      half[i] = 0.5 * d[i];
      e[i] = rng.normal();
      scaled_e[i] = 37.5 * e[i];
      scaled_d[i] = 37.5 * d[i];
    }
    const double same = nmse_db(d, d);
    const double halved = nmse_db(half, d);
    const double shift = std::abs(nmse_db(scaled_e, scaled_d) - nmse_db(e, d));
    const double expected = 10.0 * std::log10(0.25);
    r.passed = same == 0.0 && std::abs(halved - expected) <= 1e-9 && std::abs(halved + 6.0206) <= 1e-4 &&
               shift <= 1e-12;
    r.detail = "e=d " + sci(same) + " dB, e=d/2 " + std::to_string(halved) + " dB, scaling shift " + sci(shift);
  });
}

CheckResult check_fxlms_zero_step(std::uint64_t seed) {
  return timed("FxLMS with zero step is no control", [&](CheckResult& r) {
    Rng rng(seed);
    const std::uint32_t rate = 16000;
    const auto paths = synth_training_paths(rng, rate);
    const auto noise = normal_signal(rng, rate, rate);
    const auto result = simulate_fxlms(paths, noise, 0.0, 64);
    const double v = nmse_db(result.error, result.disturbance);
    r.passed = v == 0.0;
    r.detail = "NMSE " + sci(v) + " dB";
  });
}

CheckResult check_constant_weights(std::uint64_t seed) {
  return timed("constant-weight GFANC matches a fixed filter", [&](CheckResult& r) {
    Rng rng(seed);
    const std::uint32_t rate = 16000;
    const auto paths = synth_training_paths(rng, rate);
    const auto bank = decompose(random_filter(rng, 256), 8, rate, BandSpacing::Linear);
    const auto noise = normal_signal(rng, 4 * rate, rate);
    const std::vector<double> g{0.1, 0.9, 0.4, 1.0, 0.0, 0.7, 0.25, 0.5};
    const auto framed = simulate_gfanc(constant_weight_generator(g), bank, paths, noise);
    const auto fixed = simulate_fixed(combine(bank, g), paths, noise);
    double worst = 0.0;
    for (std::size_t n = rate; n < noise.size(); ++n) worst = std::max(worst, std::abs(framed.error[n] - fixed.error[n]));
    r.passed = worst <= 1e-12;
    r.detail = "max difference after frame 0 " + sci(worst);
  });
}

std::vector<CheckResult> run_fast_suite() {
  const std::size_t bands[] = {2, 8, 15};
  return {check_unfold_oracle(),  check_end_to_end_gradient(),    check_reconstruction(bands),
          check_first_frame(),    check_nmse_formula(),           check_fxlms_zero_step(),
          check_constant_weights()};
}

}  // namespace anc::selftest
