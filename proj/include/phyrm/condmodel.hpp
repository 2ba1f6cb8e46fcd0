// Conditional generation model (first stage): encoder-decoder over masked
// observations producing an initial estimate and multi-scale decoder
// features, trained with data + physics + smoothness losses.
#pragma once

#include "phyrm/grid.hpp"
#include "phyrm/tape.hpp"
#include "phyrm/weights.hpp"

namespace phyrm {

struct NetConfig {
  int depth = 3;
  std::vector<int> channels = {16, 32, 64};  // one entry per level
  int temb_dim = 32;                         // diffusion-stage embedding width

  void validate() const;
};

// Input channel layout: 0 truth*mask, 1 mask, 2 buildings, 3 transmitter
// one-hot, 4 vehicles (dynamic maps only). Pass obs = nullptr for an empty
// observation mask (full-conditioning setups).
Tensor4 cond_input_item(const Scene& scene, const Grid2D& truth, const BinaryMask* obs,
                        bool vehicle_channel);

struct CondForward {
  Tape::Id y0 = -1;                 // (N, 1, H, W) in (0, 1)
  std::vector<Tape::Id> features;   // z_1 (H/2) ... z_L (H/2^L)
};

class CondNet {
 public:
  CondNet(NetConfig cfg, int in_channels);

  // Requires spatial dims divisible by 2^depth.
  CondForward forward(Tape& tape, Tape::Id input) const;

  const NetConfig& config() const { return cfg_; }
  int in_channels() const { return in_c_; }

 private:
  NetConfig cfg_;
  int in_c_;
};

struct CondLossReport {
  double total = 0.0;
  double mse = 0.0;
  double pinn = 0.0;
  double pde = 0.0;
  double bc = 0.0;
  double source = 0.0;
  double reg = 0.0;
};

// Mean absolute forward difference, both orientations pooled; the
// smoothness regularizer.
double total_variation(const Grid2D& g);

// Reference (non-tape) evaluation of the first-stage loss for a single map.
// Physics terms are skipped when all their weights are zero.
CondLossReport loss_cond(const Grid2D& y0, const Grid2D& truth, const HelmholtzField& geom,
                         const LossWeights& w);

}  // namespace phyrm
