#include "doctest.h"

#include "phyrm/diffmodel.hpp"
#include "phyrm/fft.hpp"
#include "phyrm/rng.hpp"

#include <cmath>

using namespace phyrm;

namespace {

NetConfig small_net() {
  NetConfig net;
  net.depth = 2;
  net.channels = {4, 6};
  net.temb_dim = 8;
  return net;
}

}  // namespace

TEST_CASE("single-step schedule") {
  const NoiseSchedule s = make_schedule(1, 0.5, 0.5);
  CHECK(s.alpha_bar_at(1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.alpha_bar_at(0) == 1.0);
}

TEST_CASE("cumulative products match a direct loop and decay monotonically") {
  const NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
  double prod = 1.0;
  for (int t = 1; t <= 100; ++t) {
    prod *= 1.0 - s.beta_at(t);
    CHECK(s.alpha_bar_at(t) == doctest::Approx(prod).epsilon(1e-14));
    CHECK(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
    if (t > 1) CHECK(s.beta_at(t) > s.beta_at(t - 1));
  }
  // signal-to-noise ratio strictly decreasing
  double prev = 1e300;
  for (int t = 1; t <= 100; ++t) {
    const double snr = s.alpha_bar_at(t) / (1.0 - s.alpha_bar_at(t));
    CHECK(snr < prev);
    prev = snr;
  }
}

TEST_CASE("schedule bounds are validated") {
  CHECK_THROWS(make_schedule(0, 1e-4, 0.02));
  CHECK_THROWS(make_schedule(10, 0.0, 0.02));
  CHECK_THROWS(make_schedule(10, 0.3, 0.2));
  CHECK_THROWS(make_schedule(10, 0.5, 1.0));
}

TEST_CASE("corruption blends signal and noise by the schedule") {
  Rng rng(3);
  const Tensor4 y0 = Tensor4::rand_uniform(2, 1, 8, 8, rng, 0.0, 1.0);
  const Tensor4 eps = Tensor4::randn(2, 1, 8, 8, rng);
  const NoiseSchedule s = make_schedule(100, 1e-4, 0.02);

  // near-zero noise at the first step
  const Tensor4 y1 = corrupt(y0, {1, 1}, eps, s);
  for (int64_t i = 0; i < y0.size(); ++i)
    CHECK(y1.v[i] == doctest::Approx(std::sqrt(1.0 - 1e-4) * y0.v[i] +
                                     std::sqrt(1e-4) * eps.v[i]).epsilon(1e-12));

  // a crushing schedule leaves almost pure noise
  const NoiseSchedule hard = make_schedule(60, 0.5, 0.99);
  const Tensor4 yT = corrupt(y0, {60, 60}, eps, hard);
  for (int64_t i = 0; i < y0.size(); ++i)
    CHECK(yT.v[i] == doctest::Approx(eps.v[i]).epsilon(1e-8));

  CHECK_THROWS_AS(corrupt(y0, {0, 1}, eps, s), std::out_of_range);
  CHECK_THROWS_AS(corrupt(y0, {1, 101}, eps, s), std::out_of_range);
}

TEST_CASE("corruption statistics match the schedule moments") {
  Rng rng(17);
  const Tensor4 y0 = Tensor4::rand_uniform(1, 1, 8, 8, rng, 0.2, 0.8);
  const NoiseSchedule s = make_schedule(100, 1e-4, 0.02);
  const int t = 40;
  const double ab = s.alpha_bar_at(t);

  const int draws = 10000;
  std::vector<double> mean(64, 0.0);
  double var = 0.0;
  for (int d = 0; d < draws; ++d) {
    const Tensor4 eps = Tensor4::randn(1, 1, 8, 8, rng);
    const Tensor4 yt = corrupt(y0, {t}, eps, s);
    for (int i = 0; i < 64; ++i) {
      mean[i] += yt.v[i];
      const double dlt = yt.v[i] - std::sqrt(ab) * y0.v[i];
      var += dlt * dlt;
    }
  }
  for (int i = 0; i < 64; ++i) {
    mean[i] /= draws;
    CHECK(mean[i] == doctest::Approx(std::sqrt(ab) * y0.v[i]).epsilon(0.05));
  }
  var /= draws * 64;
  CHECK(var == doctest::Approx(1.0 - ab).epsilon(0.05));
}

TEST_CASE("zero-initialized fusion gates pass nothing through") {
  ModelParams params(5);
  Tape tape(&params);
  Rng rng(5);
  Tape::Id fd = tape.input(Tensor4::randn(1, 4, 8, 8, rng));
  Tape::Id fc = tape.input(Tensor4::randn(1, 4, 8, 8, rng));
  Tape::Id fused = anchor_fuse(tape, "t.anchor", fd, fc);
  // force both gate convolutions to zero
  for (auto& v : params.get("t.anchor.gd.w").value) v = 0.0;
  for (auto& v : params.get("t.anchor.gc.w").value) v = 0.0;
  Tape tape2(&params);
  Tape::Id fused2 = anchor_fuse(tape2, "t.anchor", tape2.input(tape.val(fd)),
                                tape2.input(tape.val(fc)));
  for (double v : tape2.val(fused2).v) CHECK(v == 0.0);
}

TEST_CASE("fusion output is bounded by one regardless of input magnitude") {
  ModelParams params(6);
  Tape tape(&params);
  Rng rng(6);
  Tensor4 big = Tensor4::randn(1, 4, 8, 8, rng);
  for (auto& v : big.v) v *= 1e6;
  Tape::Id fused = anchor_fuse(tape, "t.anchor", tape.input(big), tape.input(big));
  for (double v : tape.val(fused).v) CHECK(std::abs(v) <= 1.0);
}

TEST_CASE("fusion matches a direct elementwise reference") {
  ModelParams params(7);
  Rng rng(7);
  const Tensor4 fd = Tensor4::randn(1, 3, 4, 4, rng);
  const Tensor4 fc = Tensor4::randn(1, 3, 4, 4, rng);
  Tape tape(&params);
  Tape::Id out = anchor_fuse(tape, "t.a", tape.input(fd), tape.input(fc));
  const auto& wd = params.get("t.a.gd.w").value;
  const auto& wc = params.get("t.a.gc.w").value;
  const auto& bd = params.get("t.a.gd.b").value;
  const auto& bc = params.get("t.a.gc.b").value;
  for (int co = 0; co < 3; ++co)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double pre_d = bd[co], pre_c = bc[co];
        for (int ci = 0; ci < 3; ++ci) {
          pre_d += wd[co * 3 + ci] * fd.at(0, ci, i, j);
          pre_c += wc[co * 3 + ci] * fc.at(0, ci, i, j);
        }
        const double want = 1.0 / (1.0 + std::exp(-pre_d)) * std::tanh(pre_c);
        CHECK(tape.val(out).at(0, co, i, j) == doctest::Approx(want).epsilon(1e-12));
      }
}

TEST_CASE("zero spectral gate halves the spatial features") {
  ModelParams params(8);
  Rng rng(8);
  const Tensor4 fsp = Tensor4::randn(1, 4, 8, 8, rng);
  Tape tape(&params);
  Tape::Id out = rf_sa(tape, "t.rfsa", tape.input(Tensor4(1, 4, 8, 8, 0.0)), tape.input(fsp));
  for (int64_t i = 0; i < fsp.size(); ++i)
    CHECK(tape.val(out).v[i] == doctest::Approx(0.5 * fsp.v[i]).epsilon(1e-14));
}

TEST_CASE("spectral gate matches the composed reference pipeline") {
  ModelParams params(9);
  Rng rng(9);
  const Tensor4 fin = Tensor4::randn(1, 2, 8, 8, rng);
  const Tensor4 fsp = Tensor4::randn(1, 2, 8, 8, rng);
  // breathe life into the zero-initialized gate parameters
  params.ensure("t.rfsa.scale", {1, 2, 1, 1}, 0).value = {0.7, -0.4};
  params.ensure("t.rfsa.bias", {1, 2, 1, 1}, 0).value = {0.1, 0.3};

  Tape tape(&params);
  Tape::Id out = rf_sa(tape, "t.rfsa", tape.input(fin), tape.input(fsp));

  for (int c = 0; c < 2; ++c) {
    std::vector<double> plane(64);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) plane[i * 8 + j] = fin.at(0, c, i, j);
    const ComplexPlane spec = fft2(plane, 8, 8);
    const double s = params.get("t.rfsa.scale").value[c];
    const double b = params.get("t.rfsa.bias").value[c];
    for (int i = 0; i < 64; ++i) {
      const double mag = std::hypot(spec.re[i], spec.im[i]);
      const double gate = 1.0 / (1.0 + std::exp(-(s * mag + b)));
      const double want = gate * fsp.at(0, c, i / 8, i % 8);
      CHECK(tape.val(out).at(0, c, i / 8, i % 8) == doctest::Approx(want).epsilon(1e-10));
      CHECK(gate > 0.0);
      CHECK(gate < 1.0);
    }
  }
}

TEST_CASE("constant gate input concentrates the spectrum at the origin") {
  const std::vector<double> plane(64, 0.37);
  const ComplexPlane spec = fft2(plane, 8, 8);
  CHECK(std::hypot(spec.re[0], spec.im[0]) == doctest::Approx(64 * 0.37).epsilon(1e-10));
  for (int i = 1; i < 64; ++i) CHECK(std::hypot(spec.re[i], spec.im[i]) < 1e-10);
}

TEST_CASE("noise prediction is deterministic, shaped, and time-sensitive") {
  ModelParams params(10);
  DiffNet net(small_net());
  Rng rng(10);
  const Tensor4 y_t = Tensor4::randn(1, 1, 16, 16, rng);
  const Tensor4 y0 = Tensor4::rand_uniform(1, 1, 16, 16, rng, 0.0, 1.0);
  const Tensor4 a1 = Tensor4::randn(1, 4, 8, 8, rng);
  const Tensor4 a2 = Tensor4::randn(1, 6, 4, 4, rng);

  auto forward = [&](int t) {
    Tape tape(&params);
    Tape::Id out = net.predict_noise(tape, tape.input(y_t), tape.input(y0), {t},
                                     {tape.input(a1), tape.input(a2)});
    return tape.val(out);
  };
  const Tensor4 p1 = forward(3);
  const Tensor4 p2 = forward(3);
  CHECK(p1.v == p2.v);
  CHECK(p1.h == 16);
  CHECK(p1.w == 16);
  CHECK(p1.c == 1);

  const Tensor4 p3 = forward(47);
  double max_diff = 0.0;
  for (int64_t i = 0; i < p1.size(); ++i)
    max_diff = std::max(max_diff, std::abs(p1.v[i] - p3.v[i]));
  CHECK(max_diff > 0.0);

  Tape tape(&params);
  CHECK_THROWS_WITH_AS(
      net.predict_noise(tape, tape.input(y_t), tape.input(y0), {3}, {tape.input(a1)}),
      "level-count mismatch", std::invalid_argument);
}

TEST_CASE("noise loss identities") {
  Rng rng(11);
  const Tensor4 eps = Tensor4::randn(1, 1, 100, 100, rng);
  CHECK(loss_diff(eps, eps) == 0.0);
  const Tensor4 zero(1, 1, 100, 100, 0.0);
  CHECK(loss_diff(eps, zero) == doctest::Approx(1.0).epsilon(0.05));
  Tensor4 twice = eps;
  for (auto& v : twice.v) v *= 2.0;
  CHECK(loss_diff(twice, zero) == doctest::Approx(4.0 * loss_diff(eps, zero)).epsilon(1e-12));
}

TEST_CASE("sampling is reproducible and honors the closed forms") {
  NetConfig cfg = small_net();
  ModelParams params(12);
  DiffNet net(cfg);
  Rng rng(12);
  const Tensor4 y0 = Tensor4::rand_uniform(1, 1, 16, 16, rng, 0.0, 1.0);
  const Tensor4 a1 = Tensor4::randn(1, 4, 8, 8, rng);
  const Tensor4 a2 = Tensor4::randn(1, 6, 4, 4, rng);
  const std::vector<Tensor4> anchors{a1, a2};

  const NoiseSchedule sched = make_schedule(20, 1e-3, 0.05);
  const Tensor4 s1 = ancestral_sample(net, params, anchors, y0, sched, 99);
  const Tensor4 s2 = ancestral_sample(net, params, anchors, y0, sched, 99);
  CHECK(s1.v == s2.v);
  for (double v : s1.v) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  // zero the prediction head: the chain becomes a pure affine contraction
  {
    // materialize head parameters, then zero them
    Tape tape(&params);
    net.predict_noise(tape, tape.input(y0), tape.input(y0), {1},
                      {tape.input(a1), tape.input(a2)});
    for (auto& v : params.get("unet2.head.w").value) v = 0.0;
    for (auto& v : params.get("unet2.head.b").value) v = 0.0;
  }

  const NoiseSchedule one = make_schedule(1, 0.3, 0.3);
  const Tensor4 out1 = ancestral_sample(net, params, anchors, y0, one, 7);
  Rng ref(derive_seed(7, {seedtag::kDiffusion}));
  const Tensor4 x1 = Tensor4::randn(1, 1, 16, 16, ref);
  for (int64_t i = 0; i < out1.size(); ++i) {
    const double want = std::clamp(x1.v[i] / std::sqrt(0.7), 0.0, 1.0);
    CHECK(out1.v[i] == doctest::Approx(want).epsilon(1e-12));
  }

  // multi-step noiseless contraction: x_0 = x_T / sqrt(alpha_bar_T)
  SampleOpts opts;
  opts.inject_noise = false;
  const Tensor4 outc = ancestral_sample(net, params, anchors, y0, sched, 7, opts);
  Rng ref2(derive_seed(7, {seedtag::kDiffusion}));
  const Tensor4 xT = Tensor4::randn(1, 1, 16, 16, ref2);
  for (int64_t i = 0; i < outc.size(); ++i) {
    const double want =
        std::clamp(xT.v[i] / std::sqrt(sched.alpha_bar_at(sched.steps)), 0.0, 1.0);
    CHECK(outc.v[i] == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("timestep embedding is even-dimensional and bounded") {
  CHECK_THROWS(timestep_embedding({1}, 7));
  const Tensor4 e = timestep_embedding({1, 50}, 16);
  CHECK(e.n == 2);
  CHECK(e.c == 16);
  for (double v : e.v) CHECK(std::abs(v) <= 1.0);
}
