// Central finite-difference verification of analytic gradients.
#pragma once

#include "phyrm/params.hpp"

#include <functional>
#include <string>

namespace phyrm {

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  std::string worst_param;
  int worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares the analytic gradients already stored in the parameter blocks
// against central differences of f (a deterministic forward evaluation at
// the current parameter values). Large blocks are subsampled to at most
// max_coords coordinates. Relative error per coordinate is
// |a - n| / max(|a|, |n|, 1e-8); the check passes iff the max is <= tol.
GradCheckReport grad_check(const std::function<double()>& f, ModelParams& params,
                           double step, double tol, uint64_t sample_seed = 17,
                           int max_coords = 200);

}  // namespace phyrm
