#include "doctest.h"

#include "phyrm/condmodel.hpp"
#include "phyrm/rng.hpp"
#include "phyrm/synthgen.hpp"

#include <cmath>

using namespace phyrm;

namespace {

NetConfig small_net() {
  NetConfig net;
  net.depth = 3;
  net.channels = {4, 6, 8};
  net.temb_dim = 8;
  return net;
}

Scene demo_scene(int n) {
  Scene s{BinaryMask(n, n), std::nullopt, {}, 1.0};
  for (int i = n / 4; i < n / 4 + 3; ++i)
    for (int j = n / 2; j < n / 2 + 4; ++j) s.buildings.set(i, j, true);
  s.transmitters.push_back(Transmitter{2.0, double(n) - 3.0, 23.0, 2.4});
  return s;
}

}  // namespace

TEST_CASE("input assembly layout") {
  const Scene s = demo_scene(16);
  Grid2D truth(16, 16, 1.0, 0.0);
  Rng rng(3);
  for (auto& v : truth.values()) v = rng.uniform(0.0, 1.0);
  BinaryMask obs(16, 16);
  obs.set(5, 5, true);
  obs.set(9, 2, true);

  const Tensor4 x = cond_input_item(s, truth, &obs, false);
  REQUIRE(x.c == 4);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) {
      const bool m = obs.get(i, j);
      CHECK(x.at(0, 0, i, j) == (m ? truth.at(i, j) : 0.0));
      CHECK(x.at(0, 1, i, j) == (m ? 1.0 : 0.0));
      CHECK(x.at(0, 2, i, j) == (s.buildings.get(i, j) ? 1.0 : 0.0));
    }
  CHECK(x.at(0, 3, 13, 2) == 1.0);  // transmitter one-hot

  // unobserved truth pixels never leak into the observation channel
  Grid2D zeroed = truth;
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j)
      if (!obs.get(i, j)) zeroed.at(i, j) = 0.0;
  const Tensor4 x2 = cond_input_item(s, zeroed, &obs, false);
  CHECK(x.v == x2.v);
}

TEST_CASE("forward pass shape and determinism contracts") {
  const Scene s = demo_scene(32);
  Grid2D truth(32, 32, 1.0, 0.5);
  ModelParams params(11);
  CondNet net(small_net(), 4);

  Tape tape(&params);
  Tape::Id x = tape.input(cond_input_item(s, truth, nullptr, false));
  const CondForward a = net.forward(tape, x);
  REQUIRE(a.features.size() == 3);
  CHECK(tape.val(a.y0).h == 32);
  CHECK(tape.val(a.y0).c == 1);
  CHECK(tape.val(a.features[0]).h == 16);
  CHECK(tape.val(a.features[0]).c == 4);
  CHECK(tape.val(a.features[1]).h == 8);
  CHECK(tape.val(a.features[1]).c == 6);
  CHECK(tape.val(a.features[2]).h == 4);
  CHECK(tape.val(a.features[2]).c == 8);

  Tape tape2(&params);
  const CondForward b = net.forward(tape2, tape2.input(cond_input_item(s, truth, nullptr, false)));
  CHECK(tape.val(a.y0).v == tape2.val(b.y0).v);

  for (double v : tape.val(a.y0).v) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("spatial dims must be divisible by the downsampling factor") {
  ModelParams params(1);
  CondNet net(small_net(), 4);
  Tape tape(&params);
  Tape::Id x = tape.input(Tensor4(1, 4, 20, 20, 0.1));
  CHECK_THROWS_WITH_AS(net.forward(tape, x), "depth/size mismatch", std::invalid_argument);
}

TEST_CASE("loss reduces to the smoothness term on an exact estimate") {
  const int n = 8;
  // linear field: zero Laplacian, k = 0, f = 0
  Grid2D u(n, n, 1.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) u.at(i, j) = 0.05 * (i + j);
  HelmholtzField geom{Grid2D(n, n), Grid2D(n, n), Grid2D(n, n), Grid2D(n, n), Grid2D(n, n),
                      BinaryMask(n, n), BinaryMask(n, n), BinaryMask(n, n)};
  for (int i = 1; i < n - 1; ++i)
    for (int j = 1; j < n - 1; ++j) geom.interior.set(i, j, true);
  geom.boundary.set(0, 0, true);
  geom.bc_values.at(0, 0) = u.at(0, 0);
  geom.source.set(4, 4, true);
  geom.src_values.at(4, 4) = u.at(4, 4);

  const LossWeights w{};
  const CondLossReport rep = loss_cond(u, u, geom, w);
  CHECK(rep.mse == 0.0);
  CHECK(rep.pinn == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(rep.reg == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(rep.total == doctest::Approx(w.reg * 0.05).epsilon(1e-12));
}

TEST_CASE("constant estimates carry no smoothness penalty") {
  const Grid2D c(8, 8, 1.0, 0.42);
  CHECK(total_variation(c) == 0.0);
}

TEST_CASE("component weighting matches the tuned coefficients") {
  const int n = 8;
  // ramp with mean absolute difference 0.3 in both orientations
  Grid2D y0(n, n, 1.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) y0.at(i, j) = 0.3 * (i + j);
  Grid2D truth = y0;
  for (auto& v : truth.values()) v -= 0.2;  // MSE = 0.04

  HelmholtzField geom{Grid2D(n, n), Grid2D(n, n), Grid2D(n, n), Grid2D(n, n), Grid2D(n, n),
                      BinaryMask(n, n), BinaryMask(n, n), BinaryMask(n, n)};
  for (int i = 1; i < n - 1; ++i)
    for (int j = 1; j < n - 1; ++j) geom.interior.set(i, j, true);
  // linear ramp has zero Laplacian; forcing of -sqrt(0.2/1.5) gives
  // a PDE component of 0.2/1.5, weighted back to 0.2
  for (auto& v : geom.f.values()) v = -std::sqrt(0.2 / 1.5);
  geom.boundary.set(0, 0, true);
  geom.bc_values.at(0, 0) = y0.at(0, 0);
  geom.source.set(3, 3, true);
  geom.src_values.at(3, 3) = y0.at(3, 3);

  const LossWeights w{};  // 1.0, 0.1, 1.5, 0.5, 0.2, ...
  CHECK(w.mse == 1.0);
  CHECK(w.reg == 0.1);
  CHECK(w.pde == 1.5);
  CHECK(w.bc == 0.5);
  CHECK(w.source == 0.2);
  CHECK(w.cond == 1.0);
  CHECK(w.diff == 1.0);

  const CondLossReport rep = loss_cond(y0, truth, geom, w);
  CHECK(rep.mse == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(rep.pinn == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(rep.reg == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(rep.total == doctest::Approx(0.27).epsilon(1e-12));
}

TEST_CASE("loss is strictly positive on any real scene") {
  const Scene s = demo_scene(32);
  const Grid2D truth = render_ground_truth(s, DbRange{});
  const HelmholtzField geom = build_field(s, PhysicsConfig{});
  ModelParams params(21);
  CondNet net(small_net(), 4);
  Tape tape(&params);
  const CondForward f = net.forward(tape, tape.input(cond_input_item(s, truth, nullptr, false)));
  const Grid2D y0 = [&] {
    Grid2D g(32, 32, 1.0);
    const Tensor4& t = tape.val(f.y0);
    std::copy(t.v.begin(), t.v.end(), g.values().begin());
    return g;
  }();
  const CondLossReport rep = loss_cond(y0, truth, geom, LossWeights{});
  CHECK(rep.total > 0.0);
}

TEST_CASE("tape-composed loss agrees with the reference evaluation") {
  const Scene s = demo_scene(16);
  const Grid2D truth = render_ground_truth(s, DbRange{});
  const HelmholtzField geom = build_field(s, PhysicsConfig{});
  const LossWeights w{};
  ModelParams params(31);
  CondNet net(small_net(), 4);

  Tape tape(&params);
  const CondForward f = net.forward(tape, tape.input(cond_input_item(s, truth, nullptr, false)));
  Tensor4 truth_t(1, 1, 16, 16);
  std::copy(truth.values().begin(), truth.values().end(), truth_t.v.begin());
  PinnLossTerms terms;
  Tape::Id total = tape.weighted_sum({{tape.mse(f.y0, tape.input(truth_t)), w.mse},
                                      {tape.tv(f.y0), w.reg},
                                      {tape.pinn(f.y0, {&geom}, w.pinn(), &terms), 1.0}});

  Grid2D y0(16, 16, 1.0);
  std::copy(tape.val(f.y0).v.begin(), tape.val(f.y0).v.end(), y0.values().begin());
  const CondLossReport rep = loss_cond(y0, truth, geom, w);
  CHECK(tape.scalar(total) == doctest::Approx(rep.total).epsilon(1e-14));
  CHECK(terms.total == doctest::Approx(rep.pinn).epsilon(1e-14));
}
