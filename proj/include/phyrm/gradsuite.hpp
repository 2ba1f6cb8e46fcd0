// End-to-end gradient verification: every trainable block of both networks
// through the full two-stage objective (stages coupled so condition features
// and the spectral path are exercised), plus the physics losses on their own
// tighter tolerance.
#pragma once

#include "phyrm/gradcheck.hpp"

#include <vector>

namespace phyrm {

struct GradSuiteResult {
  GradCheckReport network;   // both U-Nets, all blocks, combined objective
  GradCheckReport physics;   // PDE/boundary/source losses w.r.t. the field
  int n_network_blocks = 0;
  bool pass = false;
};

GradSuiteResult run_grad_suite(double tol_network = 1e-4, double tol_physics = 1e-6,
                               uint64_t seed = 5);

}  // namespace phyrm
