// Diffusion refiner (second stage): noise schedule, forward corruption,
// gated anchor fusion of condition features, spectral attention at the
// bottleneck, noise prediction, and ancestral sampling.
#pragma once

#include "phyrm/condmodel.hpp"

namespace phyrm {

struct NoiseSchedule {
  int steps = 0;                  // T
  std::vector<double> beta;       // beta[t-1] for t = 1..T
  std::vector<double> alpha;      // 1 - beta
  std::vector<double> alpha_bar;  // cumulative product

  double beta_at(int t) const { return beta.at(t - 1); }
  double alpha_at(int t) const { return alpha.at(t - 1); }
  // alpha_bar(0) = 1 by definition.
  double alpha_bar_at(int t) const { return t == 0 ? 1.0 : alpha_bar.at(t - 1); }
};

// Linear beta in [beta_min, beta_max] over T steps.
NoiseSchedule make_schedule(int T, double beta_min, double beta_max);

// y_t = sqrt(alpha_bar_t) y0 + sqrt(1 - alpha_bar_t) eps, per batch item.
Tensor4 corrupt(const Tensor4& y0, const std::vector<int>& t, const Tensor4& eps,
                const NoiseSchedule& sched);

// sigmoid(conv1x1(f_d)) * tanh(conv1x1(f_c)); parameters live under prefix.
Tape::Id anchor_fuse(Tape& tape, const std::string& prefix, Tape::Id f_d, Tape::Id f_c);

// Per-channel spectral gate: G = sigmoid(scale_c * |fft2(f_input)| + bias_c),
// output G * f_spatial. Gate parameters are zero-initialized.
Tape::Id rf_sa(Tape& tape, const std::string& prefix, Tape::Id f_input, Tape::Id f_spatial);

// Sinusoidal embedding of integer timesteps, shape (N, dim, 1, 1).
Tensor4 timestep_embedding(const std::vector<int>& t, int dim);

double loss_diff(const Tensor4& eps, const Tensor4& eps_pred);

struct DiffFlags {
  bool disable_rfsa = false;
  bool disable_anchor = false;
};

class DiffNet {
 public:
  explicit DiffNet(NetConfig cfg);

  using Flags = DiffFlags;

  // anchors = condition features z_1..z_L on the same tape; the initial
  // estimate is concatenated to y_t at the input. Output is unconstrained
  // (predicted noise), same spatial shape as y_t.
  Tape::Id predict_noise(Tape& tape, Tape::Id y_t, Tape::Id y0_condition,
                         const std::vector<int>& tsteps, const std::vector<Tape::Id>& anchors,
                         Flags flags = {}) const;

  const NetConfig& config() const { return cfg_; }

 private:
  NetConfig cfg_;
};

struct SampleOpts {
  bool inject_noise = true;  // turn off for the deterministic contraction path
  DiffNet::Flags flags{};
};

// Ancestral sampling from x_T ~ N(0, I), conditioned on the first-stage
// estimate and its features; the result is clamped to [0,1] at the end only.
Tensor4 ancestral_sample(const DiffNet& net, ModelParams& params,
                         const std::vector<Tensor4>& anchors, const Tensor4& y0_condition,
                         const NoiseSchedule& sched, uint64_t seed, SampleOpts opts = {});

// Extracts one (item, channel) plane into a grid.
Grid2D tensor_plane_to_grid(const Tensor4& t, int item, int channel, double spacing);

}  // namespace phyrm
