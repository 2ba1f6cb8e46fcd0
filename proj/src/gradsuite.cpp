#include "phyrm/gradsuite.hpp"

#include "phyrm/condmodel.hpp"
#include "phyrm/diffmodel.hpp"
#include "phyrm/rng.hpp"

#include <cmath>

namespace phyrm {

namespace {

// Random but physically well-formed 16x16 scene geometry.
HelmholtzField make_test_field(int n, Rng& rng) {
  Scene scene{BinaryMask(n, n), std::nullopt, {}, 1.0};
  for (int i = 5; i < 9; ++i)
    for (int j = 6; j < 10; ++j) scene.buildings.set(i, j, true);
  Transmitter tx;
  tx.x = 2.0;
  tx.y = 12.0;
  tx.exponent = 2.0 + rng.uniform();
  scene.transmitters.push_back(tx);
  return build_field(scene, PhysicsConfig{});
}

}  // namespace

GradSuiteResult run_grad_suite(double tol_network, double tol_physics, uint64_t seed) {
  GradSuiteResult result;
  constexpr int kSize = 16;
  Rng rng(seed);

  // --- both networks through the combined objective ---
  {
    NetConfig net;
    net.depth = 3;
    net.channels = {4, 6, 8};
    net.temb_dim = 8;
    CondNet cond(net, 4);
    DiffNet diff(net);
    const HelmholtzField geom = make_test_field(kSize, rng);
    const LossWeights weights{};
    const NoiseSchedule sched = make_schedule(10, 1e-4, 0.02);

    // fixed inputs; kept away from activation kinks by construction
    const Tensor4 x_in = Tensor4::rand_uniform(1, 4, kSize, kSize, rng, 0.1, 0.9);
    const Tensor4 truth = Tensor4::rand_uniform(1, 1, kSize, kSize, rng, 0.1, 0.9);
    const Tensor4 eps = Tensor4::randn(1, 1, kSize, kSize, rng);
    const std::vector<int> tsteps{4};
    const double ab = sched.alpha_bar_at(tsteps[0]);
    const std::vector<double> ka{std::sqrt(ab)}, kb{std::sqrt(1.0 - ab)};

    ModelParams params(seed);
    auto objective = [&](ModelParams& p) {
      Tape tape(&p);
      Tape::Id x = tape.input(x_in);
      CondForward cf = cond.forward(tape, x);
      Tape::Id l_cond = tape.weighted_sum(
          {{tape.mse(cf.y0, tape.input(truth)), weights.mse},
           {tape.tv(cf.y0), weights.reg},
           {tape.pinn(cf.y0, {&geom}, weights.pinn(), nullptr), 1.0}});
      // coupled: diffusion gradients flow back into the conditional net
      Tape::Id y_t = tape.blend(cf.y0, tape.input(eps), ka, kb);
      Tape::Id eps_pred = diff.predict_noise(tape, y_t, cf.y0, tsteps, cf.features);
      Tape::Id l_diff = tape.mse(eps_pred, tape.input(eps));
      Tape::Id total = tape.weighted_sum({{l_cond, weights.cond}, {l_diff, weights.diff}});
      // checked at a small scale so the finite-difference roundoff floor sits
      // below the relative-error denominator floor
      return std::pair{tape.scale(total, 1e-4), std::move(tape)};
    };

    {
      auto [root, tape] = objective(params);
      params.zero_grads();
      tape.backward(root);
    }
    result.n_network_blocks = static_cast<int>(params.blocks().size());
    auto f = [&]() {
      auto [root, tape] = objective(params);
      return tape.scalar(root);
    };
    result.network = grad_check(f, params, 1e-6, tol_network, seed);
  }

  // --- physics losses against the field, all coordinates ---
  {
    Rng prng(derive_seed(seed, {0x9d7}));
    const HelmholtzField geom = make_test_field(kSize, prng);
    const PinnWeights w{1.5, 0.5, 0.2};
    ModelParams uparams(0);
    ParamBlock& blk = uparams.ensure("u", {1, 1, kSize, kSize}, 0);
    for (double& v : blk.value) v = prng.uniform(0.0, 1.0);
    pinn_losses_grad_at(blk.value, geom, w, blk.grad);
    for (double& g : blk.grad) g *= 1e-4;
    auto f = [&]() { return 1e-4 * pinn_losses_at(blk.value, geom, w).total; };
    result.physics = grad_check(f, uparams, 1e-5, tol_physics, seed, 1 << 20);
  }

  result.pass = result.network.pass && result.physics.pass;
  return result;
}

}  // namespace phyrm
