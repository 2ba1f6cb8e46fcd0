// The seven loss-combination coefficients shared by both training stages.
#pragma once

#include "phyrm/physics.hpp"

namespace phyrm {

struct LossWeights {
  double mse = 1.0;
  double reg = 0.1;
  double pde = 1.5;
  double bc = 0.5;
  double source = 0.2;
  double cond = 1.0;
  double diff = 1.0;

  PinnWeights pinn() const { return PinnWeights{pde, bc, source}; }
  bool pinn_enabled() const { return pde > 0.0 || bc > 0.0 || source > 0.0; }

  void validate() const;
};

}  // namespace phyrm
